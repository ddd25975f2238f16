"""Complete-graph face representation and vertex correspondence.

A face is the complete graph over its keypoints: every vertex carries
the keypoint's descriptor, and every unordered vertex pair is an edge.
Edges are never materialized; their attributes (normalized length,
orientation difference, log-scale difference) are computed on demand
from the endpoints.

Correspondence between two graphs compares descriptors only. Location,
scale and orientation are deliberately kept out of vertex matching
(they are not comparable across unregistered images) and enter through
edge geometry instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.spatial.distance import cdist

from .errors import EmptyGraph, SelfLoop, TooFewKeypoints
from .sift import Keypoint


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = (a + math.pi) % (2.0 * math.pi) - math.pi
    return math.pi if w == -math.pi else w


@dataclass(frozen=True)
class EdgeAttr:
    """Geometry of one edge: length is normalized by the graph diameter
    so it lands in [0, 1]; dtheta is wrapped to (-pi, pi]."""

    length: float
    dtheta: float
    dlogscale: float

    def as_vector(self) -> np.ndarray:
        return np.array([self.length, self.dtheta, self.dlogscale])


class CorrespondenceMode(Enum):
    DIRECTIONAL = "directional"
    MUTUAL = "mutual"


@dataclass(frozen=True)
class CorrespondenceSet:
    """Vertex pairs (gallery index, probe index, descriptor distance).

    Directional mode is injective in the gallery coordinate only; mutual
    mode is one-to-one in both.
    """

    pairs: tuple[tuple[int, int, float], ...]
    mode: CorrespondenceMode

    def __len__(self) -> int:
        return len(self.pairs)

    def gallery_indices(self) -> list[int]:
        return [i for i, _, _ in self.pairs]

    def probe_indices(self) -> list[int]:
        return [j for _, j, _ in self.pairs]


@dataclass(frozen=True)
class FaceGraph:
    """Complete graph over a face's keypoints.

    ``descriptors`` is the stacked float64 (n, 128) matrix and
    ``diameter`` the maximum pairwise endpoint distance; both are
    computed once at construction and reused by every match.
    """

    vertices: tuple[Keypoint, ...]
    subject_id: str
    image_id: str
    descriptors: np.ndarray = field(repr=False, compare=False)
    diameter: float = field(compare=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        n = len(self.vertices)
        return n * (n - 1) // 2

    def positions(self) -> np.ndarray:
        return np.array([[kp.x, kp.y] for kp in self.vertices])


def build_graph(
    kps: list[Keypoint], subject_id: str, image_id: str
) -> FaceGraph:
    """Assemble a face graph; needs at least two keypoints."""
    if len(kps) < 2:
        raise TooFewKeypoints(
            f"{image_id!r}: got {len(kps)} keypoints, need at least 2"
        )
    desc = np.stack([kp.descriptor for kp in kps]).astype(np.float64)
    pos = np.array([[kp.x, kp.y] for kp in kps])
    diameter = float(cdist(pos, pos).max())
    return FaceGraph(
        vertices=tuple(kps),
        subject_id=subject_id,
        image_id=image_id,
        descriptors=desc,
        diameter=diameter,
    )


def edge_attr(g: FaceGraph, i: int, j: int) -> EdgeAttr:
    """Attributes of the edge between vertices i and j (in that order:
    dtheta and dlogscale flip sign when the endpoints swap)."""
    n = g.n_vertices
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"vertex index out of range for {n}-vertex graph")
    if i == j:
        raise SelfLoop(f"vertex {i} paired with itself")
    a, b = g.vertices[i], g.vertices[j]
    length = math.hypot(a.x - b.x, a.y - b.y)
    if g.diameter > 0.0:
        length /= g.diameter
    return EdgeAttr(
        length=length,
        dtheta=wrap_angle(a.orientation - b.orientation),
        dlogscale=math.log(a.scale) - math.log(b.scale),
    )


def edge_component_arrays(
    g: FaceGraph, idx: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """EdgeAttr components for all edges of the sub-graph on ``idx``.

    Edges follow np.triu_indices order over the given vertex sequence.
    Each formula mirrors edge_attr exactly so the vectorized and scalar
    paths agree to the bit.
    """
    idx = np.asarray(idx, dtype=np.intp)
    xs = np.array([g.vertices[i].x for i in idx])
    ys = np.array([g.vertices[i].y for i in idx])
    thetas = np.array([g.vertices[i].orientation for i in idx])
    logs = np.array([math.log(g.vertices[i].scale) for i in idx])
    a, b = np.triu_indices(len(idx), k=1)
    length = np.hypot(xs[a] - xs[b], ys[a] - ys[b])
    if g.diameter > 0.0:
        length = length / g.diameter
    dtheta = (thetas[a] - thetas[b] + math.pi) % (2.0 * math.pi) - math.pi
    dtheta[dtheta == -math.pi] = math.pi
    return length, dtheta, logs[a] - logs[b]


def _descriptor_distances(g1: FaceGraph, g2: FaceGraph) -> np.ndarray:
    if g1.n_vertices == 0 or g2.n_vertices == 0:
        raise EmptyGraph("correspondence needs non-empty graphs")
    return cdist(g1.descriptors, g2.descriptors)


def _ratio_accepted(dist: np.ndarray, ratio: float) -> list[tuple[int, int, float]]:
    """Row-wise nearest neighbor under the nearest/second-nearest test.

    Acceptance is d1 < ratio * d2; with a single column d2 is infinite,
    so every row is accepted. Equal distances tie-break to the lowest
    column index via argmin, and a duplicated minimum leaves d2 = d1
    (the tied entry stays in the rest of the row).
    """
    n_rows, n_cols = dist.shape
    best = dist.argmin(axis=1)
    d1 = dist[np.arange(n_rows), best]
    if n_cols == 1:
        d2 = np.full(n_rows, math.inf)
    else:
        d2 = np.partition(dist, 1, axis=1)[:, 1]
    return [
        (int(i), int(best[i]), float(d1[i]))
        for i in np.flatnonzero(d1 < ratio * d2)
    ]


def directional_correspondence(
    g1: FaceGraph, g2: FaceGraph, ratio: float = 0.8
) -> CorrespondenceSet:
    """Each g1 vertex to its nearest g2 vertex, ratio-test filtered.

    g2 vertices may repeat; combating that is the mutual variant's job.
    """
    dist = _descriptor_distances(g1, g2)
    return CorrespondenceSet(
        pairs=tuple(_ratio_accepted(dist, ratio)),
        mode=CorrespondenceMode.DIRECTIONAL,
    )


def mutual_correspondence(
    g1: FaceGraph, g2: FaceGraph, ratio: float = 0.8
) -> CorrespondenceSet:
    """Pairs kept iff each endpoint is the other's accepted nearest
    neighbor; one-to-one in both coordinates by construction."""
    dist = _descriptor_distances(g1, g2)
    forward = _ratio_accepted(dist, ratio)
    backward = _ratio_accepted(dist.T, ratio)
    reverse_best = {i2: j2 for i2, j2, _ in backward}
    pairs = tuple(
        (i, j, d) for i, j, d in forward if reverse_best.get(j) == i
    )
    return CorrespondenceSet(pairs=pairs, mode=CorrespondenceMode.MUTUAL)
