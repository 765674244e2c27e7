"""Shared corpus builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from groupdistill import Corpus

from oracles import naive_min_hardest


def make_corpus(rng: np.random.Generator, k: int, size: int, d_emb: int,
                d_raw: int | None = None, groups_per_class: int = 2,
                labeled: bool = True) -> Corpus:
    """A random labeled corpus with well-separated ratio geometry.

    Classes sit at random directions of norm 2 with modest noise; draws whose
    hardest-negative similarity comes close to zero anywhere are rejected so
    the corpus is valid scoring input. Uses the naive oracle (not the package)
    to judge validity.
    """
    if d_raw is None:
        d_raw = d_emb
    labels = np.arange(size) % k  # every class populated for size >= k
    while True:
        centers = rng.standard_normal((k, d_emb))
        centers *= 2.0 / np.linalg.norm(centers, axis=1)[:, None]
        emb = centers[labels] + 0.3 * rng.standard_normal((size, d_emb))
        if np.all(np.linalg.norm(emb, axis=1) > 1e-6) and \
                naive_min_hardest(emb.tolist(), labels.tolist()) > 1e-3:
            break
    raw = emb.copy() if d_raw == d_emb \
        else np.hstack([emb, rng.standard_normal((size, d_raw - d_emb))])
    return Corpus(
        element_ids=tuple(f"e{i}" for i in range(size)),
        group_ids=tuple(
            f"c{labels[i]}g{i % groups_per_class}" for i in range(size)
        ),
        labels=labels if labeled else np.full(size, -1, dtype=np.int64),
        raw_inputs=raw,
        embeddings=emb,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def small_corpus(rng) -> Corpus:
    return make_corpus(rng, k=3, size=24, d_emb=6)
