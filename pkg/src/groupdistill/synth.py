"""Deterministic synthetic corpus generator.

Classes live at well-separated centers on a sphere; each element's embedding
is its class center plus isotropic Gaussian noise of that element's assigned
level. Most elements are "clean" (first noise level); a random fraction is
"corrupted" (drawn from the higher levels), which makes per-element quality
vary within every group — exactly the situation score-weighted pooling is
built for.

The generator guarantees a well-conditioned corpus for ratio scoring:

* every class center has a plausible confuser — its nearest other center's
  cosine lies in [0.15, 0.85] (no isolated and no duplicated classes);
* no element's hardest-negative centroid similarity comes within 0.02 of
  zero, so no similarity ratio is near-singular.

Draws violating either condition are rejected and redrawn from the same
generator stream, keeping everything a pure function of the configuration:
equal seeds give byte-identical corpora.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Corpus
from .exceptions import ValidationError
from .scoring import class_centroids

#: Accepted range for each class center's nearest-neighbour cosine.
CENTER_NN_COSINE = (0.15, 0.85)

#: Minimum |hardest-negative similarity| per element (vs empirical centroids).
HARDEST_NEGATIVE_FLOOR = 0.02

_MAX_ATTEMPTS = 200


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings.

    ``noise_levels[0]`` is the clean noise level; corrupted elements draw
    uniformly from the remaining levels. ``d_raw`` may be ``None`` (raw input
    = embedding) or ``2 * d_emb`` (embedding concatenated with an extra-noisy
    copy of itself).
    """

    k_classes: int = 10
    elements_per_class: int = 200
    groups_per_class: int = 40
    d_emb: int = 16
    d_raw: int | None = None
    centroid_scale: float = 2.0
    noise_levels: tuple[float, ...] = (0.1, 2.0)
    corruption_prob: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if self.k_classes < 2:
            raise ValidationError("k_classes must be >= 2")
        if self.elements_per_class < 1:
            raise ValidationError("elements_per_class must be >= 1")
        if not 1 <= self.groups_per_class <= self.elements_per_class:
            raise ValidationError(
                "groups_per_class must lie in [1, elements_per_class]"
            )
        if self.d_emb < 2:
            raise ValidationError("d_emb must be >= 2")
        if self.d_raw is not None and self.d_raw not in (self.d_emb, 2 * self.d_emb):
            raise ValidationError(
                f"d_raw must be d_emb or 2*d_emb, got {self.d_raw}"
            )
        if not self.centroid_scale > 0:
            raise ValidationError("centroid_scale must be positive")
        if len(self.noise_levels) == 0 or any(l < 0 for l in self.noise_levels):
            raise ValidationError("noise_levels must be >= 0 and non-empty")
        if not 0.0 <= self.corruption_prob <= 1.0:
            raise ValidationError("corruption_prob must lie in [0, 1]")

    @property
    def size(self) -> int:
        return self.k_classes * self.elements_per_class


def _draw_centers(rng: np.random.Generator, k: int, d: int,
                  scale: float) -> np.ndarray | None:
    centers = rng.standard_normal((k, d))
    norms = np.linalg.norm(centers, axis=1)
    if np.any(norms <= 1e-9):
        return None
    centers /= norms[:, None]
    mutual = centers @ centers.T
    np.fill_diagonal(mutual, -np.inf)
    nearest = mutual.max(axis=1)
    lo, hi = CENTER_NN_COSINE
    if nearest.min() < lo or nearest.max() > hi:
        return None
    return centers * scale


def _well_conditioned(embeddings: np.ndarray, labels: np.ndarray) -> bool:
    """True when no element's hardest-negative similarity is near zero."""
    table = class_centroids(embeddings, labels)
    cen = table.centroids
    cen_norms = np.linalg.norm(cen, axis=1)
    emb_norms = np.linalg.norm(embeddings, axis=1)
    if np.any(emb_norms <= 1e-9) or np.any(cen_norms <= 1e-9):
        return False
    sims = (embeddings / emb_norms[:, None]) @ (cen / cen_norms[:, None]).T
    sims[np.arange(len(labels)), labels] = -np.inf
    return bool(np.abs(sims.max(axis=1)).min() >= HARDEST_NEGATIVE_FLOOR)


def generate(config: SynthConfig) -> tuple[Corpus, dict[str, float]]:
    """Build a corpus plus the true per-element noise level.

    Draw order within one attempt (fixed for reproducibility): class centers,
    corruption mask, corrupted-level choices, embedding noise, then — only
    when ``d_raw == 2 * d_emb`` — the second noisy view. Ill-conditioned
    attempts are discarded whole and redrawn.
    """
    rng = np.random.default_rng(config.seed)
    k, epc = config.k_classes, config.elements_per_class
    n = config.size
    labels = np.repeat(np.arange(k, dtype=np.int64), epc)
    high = np.asarray(config.noise_levels[1:], dtype=float)

    for _ in range(_MAX_ATTEMPTS):
        centers = _draw_centers(rng, k, config.d_emb, config.centroid_scale)
        corrupted = rng.random(n) < config.corruption_prob
        levels = np.full(n, config.noise_levels[0])
        if high.size:
            picks = rng.integers(0, high.size, size=n)
            levels[corrupted] = high[picks[corrupted]]
        noise = rng.standard_normal((n, config.d_emb)) * levels[:, None]
        extra = None
        if config.d_raw == 2 * config.d_emb:
            extra = rng.standard_normal((n, config.d_emb)) * levels[:, None]
        if centers is None:
            continue
        embeddings = centers[labels] + noise
        if not _well_conditioned(embeddings, labels):
            continue
        break
    else:
        raise ValidationError(
            "could not draw a well-conditioned corpus in "
            f"{_MAX_ATTEMPTS} attempts; the configuration is degenerate"
        )

    raw = embeddings.copy() if extra is None \
        else np.hstack([embeddings, embeddings + extra])

    element_ids = tuple(f"e{i:06d}" for i in range(n))
    # Elements rotate round-robin over their class's groups, so every group
    # gets a mix of clean and corrupted members.
    group_ids = tuple(
        f"c{labels[i]:03d}g{(i % epc) % config.groups_per_class:03d}"
        for i in range(n)
    )
    corpus = Corpus(
        element_ids=element_ids,
        group_ids=group_ids,
        labels=labels,
        raw_inputs=raw,
        embeddings=embeddings,
    )
    truth = {element_ids[i]: float(levels[i]) for i in range(n)}
    return corpus, truth
