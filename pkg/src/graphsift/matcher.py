"""Graph-pair dissimilarity scoring.

Two matching constraints are provided. The gallery-image-based one
(GIBMC) takes, for every gallery vertex, its minimum descriptor
distance over all probe vertices; probe vertices may serve several
gallery vertices. The reduced-point-based one (RPBMC) keeps only
mutually-best vertex pairs, so the pairing is strictly one-to-one.

Either way the vertex stage yields a list of pair distances and the
edge stage compares edge attributes over the paired sub-graphs. Both
lists are then weighted by the Gaussian empirical rule: distances
within 1, 2 and 3 standard deviations of the list mean are multiplied
by 0.075, 0.05 and 0.025; anything farther is dropped. The combined
score blends the two weighted means (equal weight by default). Lower
is always more similar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.spatial.distance import cdist

from .config import MatchConfig
from .errors import EmptyGallery, EmptyGraph, TooFewKeypoints
from .facegraph import (
    CorrespondenceSet,
    FaceGraph,
    edge_component_arrays,
    mutual_correspondence,
)


class Constraint(Enum):
    GIBMC = "gibmc"
    RPBMC = "rpbmc"


@dataclass(frozen=True)
class WeightParams:
    """Mean and population standard deviation of a distance list, plus
    the per-band multipliers applied around them."""

    mu: float
    sigma: float
    multipliers: tuple[float, float, float]


@dataclass(frozen=True)
class MatchScore:
    """Scores for one gallery/probe graph pair.

    vertex_raw and edge_raw are plain means of the pair distances;
    the weighted fields apply the empirical-rule multipliers first.
    n_edge_pairs = 0 flags a pairing too small to form edges: under
    GIBMC the vertex component then carries the combined score alone,
    and under RPBMC (where the vertex evidence itself is the pairing)
    every score field is +inf, since fewer than 2 mutual pairs cannot
    form the reduced graphs the constraint is defined over.
    """

    vertex_raw: float
    edge_raw: float
    vertex_weighted: float
    edge_weighted: float
    combined: float
    n_vertex_pairs: int
    n_edge_pairs: int
    constraint: Constraint


def gibmc_vertex_score(
    g_gallery: FaceGraph, g_probe: FaceGraph
) -> tuple[np.ndarray, float]:
    """Per-gallery-vertex minimum descriptor distance and its mean."""
    if g_gallery.n_vertices == 0 or g_probe.n_vertices == 0:
        raise EmptyGraph("vertex scoring needs non-empty graphs")
    dist = cdist(g_gallery.descriptors, g_probe.descriptors)
    minima = dist.min(axis=1)
    return minima, float(minima.mean())


def _min_distance_pairing(
    g_gallery: FaceGraph, g_probe: FaceGraph
) -> list[tuple[int, int]]:
    """Per-gallery-vertex best probe target, reduced to unique targets.

    When several gallery vertices share a probe target only the
    smallest-distance one survives (ties keep the lowest gallery
    index). This is the pairing the GIBMC edge stage runs on.
    """
    dist = cdist(g_gallery.descriptors, g_probe.descriptors)
    best_j = dist.argmin(axis=1)
    by_target: dict[int, tuple[float, int]] = {}
    for i, j in enumerate(best_j):
        d = float(dist[i, j])
        held = by_target.get(int(j))
        if held is None or d < held[0]:
            by_target[int(j)] = (d, i)
    return sorted((i, j) for j, (_, i) in by_target.items())


def gibmc_edge_score(
    g_gallery: FaceGraph,
    g_probe: FaceGraph,
    vertex_pairs: list[tuple[int, int]],
    edge_weights: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> tuple[np.ndarray, float]:
    """Edge-attribute distances over the paired sub-graphs.

    Edge (a, a') corresponds to (b, b') iff a-b and a'-b' are vertex
    pairs; the per-edge distance is the Euclidean norm of the
    component-wise EdgeAttr difference (components scaled by
    ``edge_weights``). Fewer than 2 vertex pairs means no edges: the
    result is an empty list and 0.0, flagged by n_edge_pairs = 0.
    """
    if len(vertex_pairs) < 2:
        return np.empty(0), 0.0
    gal_idx = np.array([i for i, _ in vertex_pairs], dtype=np.intp)
    prb_idx = np.array([j for _, j in vertex_pairs], dtype=np.intp)
    gl, gt, gs = edge_component_arrays(g_gallery, gal_idx)
    pl, pt, ps = edge_component_arrays(g_probe, prb_idx)
    w0, w1, w2 = edge_weights
    dists = np.sqrt(
        (w0 * (gl - pl)) ** 2 + (w1 * (gt - pt)) ** 2 + (w2 * (gs - ps)) ** 2
    )
    return dists, float(dists.mean())


def rpbmc_pairs(
    g_gallery: FaceGraph, g_probe: FaceGraph, ratio: float = 0.8
) -> CorrespondenceSet:
    """Mutually-best vertex pairs; strictly one-to-one.

    Reciprocity already forces one pair per target (any multiple
    assignment keeps only its reciprocated, minimum-distance member);
    the structural check here guards that contract.
    """
    cs = mutual_correspondence(g_gallery, g_probe, ratio)
    gi = cs.gallery_indices()
    pi = cs.probe_indices()
    if len(set(gi)) != len(gi) or len(set(pi)) != len(pi):
        raise AssertionError("mutual correspondence produced a repeated vertex")
    return cs


def band_multipliers(
    distances: np.ndarray,
    mu: float,
    sigma: float,
    multipliers: tuple[float, float, float] = (0.075, 0.05, 0.025),
) -> np.ndarray:
    """Empirical-rule multiplier for each distance.

    Bands are closed on the outer edge: within 1 sigma of the mean
    (inclusive) takes the first multiplier, then (1, 2] sigma the
    second, (2, 3] sigma the third, and beyond 3 sigma the multiplier
    is 0. A zero sigma puts every value in the first band.
    """
    z = np.abs(np.asarray(distances, dtype=np.float64) - mu)
    out = np.zeros(z.shape)
    out[z <= sigma] = multipliers[0]
    out[(z > sigma) & (z <= 2.0 * sigma)] = multipliers[1]
    out[(z > 2.0 * sigma) & (z <= 3.0 * sigma)] = multipliers[2]
    return out


def gaussian_weight(
    distances: np.ndarray | list[float],
    multipliers: tuple[float, float, float] = (0.075, 0.05, 0.025),
) -> tuple[WeightParams, np.ndarray]:
    """Multiply each distance by its empirical-rule band multiplier."""
    arr = np.asarray(distances, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("cannot weight an empty distance list")
    mu = float(arr.mean())
    sigma = float(arr.std())
    mults = band_multipliers(arr, mu, sigma, multipliers)
    return WeightParams(mu, sigma, multipliers), arr * mults


def weighted_mean(
    distances: np.ndarray | list[float],
    multipliers: tuple[float, float, float] = (0.075, 0.05, 0.025),
) -> float:
    """Mean of the weighted distances over the surviving entries only.

    Beyond-3-sigma entries carry weight 0 and are excluded from the
    denominator; at least one entry always survives (the list mean is
    never more than a population sigma times sqrt(n) from every value).
    """
    arr = np.asarray(distances, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("cannot weight an empty distance list")
    mults = band_multipliers(arr, float(arr.mean()), float(arr.std()), multipliers)
    kept = int(np.count_nonzero(mults))
    return float((arr * mults).sum() / kept)


def match(
    g_gallery: FaceGraph,
    g_probe: FaceGraph,
    constraint: Constraint = Constraint.RPBMC,
    cfg: MatchConfig | None = None,
) -> MatchScore:
    """Score one gallery/probe pair under the chosen constraint."""
    if cfg is None:
        cfg = MatchConfig()
    if g_gallery.n_vertices < 2 or g_probe.n_vertices < 2:
        raise TooFewKeypoints("matching needs graphs with at least 2 vertices")

    if constraint is Constraint.GIBMC:
        vertex_dists, vertex_raw = gibmc_vertex_score(g_gallery, g_probe)
        pairs = _min_distance_pairing(g_gallery, g_probe)
    else:
        cs = rpbmc_pairs(g_gallery, g_probe, cfg.ratio)
        if len(cs) < 2:
            # fewer than 2 mutual pairs: the reduced point sets cannot
            # form graphs, so the pair is maximally dissimilar
            inf = math.inf
            return MatchScore(inf, inf, inf, inf, inf, len(cs), 0, constraint)
        vertex_dists = np.array([d for _, _, d in cs.pairs])
        vertex_raw = float(vertex_dists.mean())
        pairs = [(i, j) for i, j, _ in cs.pairs]

    edge_dists, edge_raw = gibmc_edge_score(
        g_gallery, g_probe, pairs, cfg.edge_weights
    )
    vertex_weighted = weighted_mean(vertex_dists, cfg.multipliers)
    if edge_dists.size:
        edge_weighted = weighted_mean(edge_dists, cfg.multipliers)
        combined = cfg.blend * vertex_weighted + (1.0 - cfg.blend) * edge_weighted
    else:
        # GIBMC with a collapsed pairing: no edge evidence either way,
        # so the vertex component carries the whole score
        edge_weighted = 0.0
        combined = vertex_weighted
    return MatchScore(
        vertex_raw=vertex_raw,
        edge_raw=edge_raw,
        vertex_weighted=vertex_weighted,
        edge_weighted=edge_weighted,
        combined=combined,
        n_vertex_pairs=len(vertex_dists),
        n_edge_pairs=len(edge_dists),
        constraint=constraint,
    )


def identify(
    probe: FaceGraph,
    gallery: list[FaceGraph],
    constraint: Constraint = Constraint.RPBMC,
    cfg: MatchConfig | None = None,
) -> list[tuple[str, MatchScore]]:
    """Rank gallery subjects by their best (lowest) combined score.

    Ties break lexicographically on subject id so the ranking is
    deterministic regardless of gallery order.
    """
    if not gallery:
        raise EmptyGallery("cannot identify against an empty gallery")
    best: dict[str, MatchScore] = {}
    for g in gallery:
        score = match(g, probe, constraint, cfg)
        held = best.get(g.subject_id)
        if held is None or score.combined < held.combined:
            best[g.subject_id] = score
    return sorted(best.items(), key=lambda kv: (kv[1].combined, kv[0]))


REPORT_HEADER = (
    "probe_image_id,gallery_subject_id,constraint,vertex_raw,edge_raw,"
    "vertex_weighted,edge_weighted,combined,n_vertex_pairs,n_edge_pairs"
)


def report_row(probe_image_id: str, subject_id: str, score: MatchScore) -> str:
    """One CSV line in the score-report format."""
    return ",".join(
        [
            probe_image_id,
            subject_id,
            score.constraint.value,
            f"{score.vertex_raw:.9g}",
            f"{score.edge_raw:.9g}",
            f"{score.vertex_weighted:.9g}",
            f"{score.edge_weighted:.9g}",
            f"{score.combined:.9g}",
            str(score.n_vertex_pairs),
            str(score.n_edge_pairs),
        ]
    )
