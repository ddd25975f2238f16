"""Shared fixtures: the seeded corpus and its extracted graphs.

Extraction over the full corpus is the expensive step, so it happens
once per session; tests treat the resulting graphs as read-only.
"""

from __future__ import annotations

import numpy as np
import pytest

from graphsift.corpus import generate_corpus, read_manifest
from graphsift.facegraph import build_graph
from graphsift.imageio import histogram_equalize, load_image
from graphsift.sift import Keypoint, extract_features

CORPUS_SEED = 42
CORPUS_SUBJECTS = 10
CORPUS_IMAGES = 4


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    generate_corpus(
        out,
        seed=CORPUS_SEED,
        n_subjects=CORPUS_SUBJECTS,
        images_per_subject=CORPUS_IMAGES,
    )
    return out


@pytest.fixture(scope="session")
def corpus_rows(corpus_dir):
    return read_manifest(corpus_dir / "manifest.csv")


@pytest.fixture(scope="session")
def corpus_graphs(corpus_rows):
    """(subject_id, image_id) -> FaceGraph for every corpus image."""
    graphs = {}
    for row in corpus_rows:
        img = histogram_equalize(load_image(row.image_path))
        graphs[(row.subject_id, row.image_id)] = build_graph(
            extract_features(img), row.subject_id, row.image_id
        )
    return graphs


def random_keypoint(rng: np.random.Generator) -> Keypoint:
    """A structurally valid keypoint with float32-exact fields."""
    return Keypoint(
        x=float(np.float32(rng.uniform(0.0, 128.0))),
        y=float(np.float32(rng.uniform(0.0, 128.0))),
        scale=float(np.float32(rng.uniform(0.5, 8.0))),
        orientation=float(np.float32(rng.uniform(0.0, 2.0 * np.pi))),
        descriptor=rng.random(128, dtype=np.float32),
    )


def random_graph(rng: np.random.Generator, n: int, subject="s", image="i"):
    return build_graph([random_keypoint(rng) for _ in range(n)], subject, image)
