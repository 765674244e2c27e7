"""Per-element discriminability scoring.

Each labeled element is scored by how much closer (in cosine similarity) its
embedding sits to its own class centroid than to the nearest competing
centroid:

* ``ratio = cos(embedding, own_centroid) / max_over_other_classes cos(embedding, other_centroid)``
* the corpus-wide ratios are standardised to z-values (population standard
  deviation) and squashed through the logistic function, yielding a score in
  the open interval (0, 1). Larger means "easier to tell apart".

The denominator is the *hardest negative*: the most confusable competing
class. Ratios are kept signed; a negative denominator flips the ratio's sign,
which the normalisation step absorbs like any other population value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .data import Corpus, DiscriminabilityRecord
from .exceptions import (
    DegenerateClassError,
    MissingClassError,
    NearSingularRatioError,
    ValidationError,
)
from .validation import (
    NORM_FLOOR,
    as_float_matrix,
    as_float_vector,
    as_label_vector,
    check_nonzero_norm,
    check_same_length,
)

#: Hardest-negative magnitudes at or below this raise NearSingularRatioError.
DENOMINATOR_FLOOR = 1e-12

#: Population standard deviations at or below this make scoring degenerate;
#: every element then receives the neutral score 0.5.
SIGMA_FLOOR = 1e-12

#: Scores are clamped to [_CLAMP, 1 - _CLAMP] so they stay strictly inside
#: (0, 1) even where the logistic saturates in float64.
_CLAMP = 1e-15


def logistic(z):
    """Numerically stable element-wise logistic function 1 / (1 + e^-z)."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two equal-length vectors, in [-1, 1]."""
    a = as_float_vector(a, "a")
    b = as_float_vector(b, "b")
    check_same_length(a, b, "a", "b")
    na = check_nonzero_norm(a, "a")
    nb = check_nonzero_norm(b, "b")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


@dataclass(frozen=True)
class CentroidTable:
    """Per-class mean embeddings and element counts."""

    centroids: np.ndarray  # (k, d)
    counts: np.ndarray     # (k,)

    @property
    def k_classes(self) -> int:
        return self.centroids.shape[0]

    @property
    def d_emb(self) -> int:
        return self.centroids.shape[1]


@dataclass(frozen=True)
class NormalizationStats:
    """Population mean and standard deviation of the raw ratios."""

    mu: float
    sigma: float


def class_centroids(embeddings, labels) -> CentroidTable:
    """Mean embedding per class over ``labels`` in [0, max(labels)].

    Every class in that range must be populated, and no centroid may have
    (near-)zero norm.
    """
    emb = as_float_matrix(embeddings, "embeddings")
    y = as_label_vector(labels, "labels")
    check_same_length(emb, y, "embeddings", "labels")
    if emb.shape[0] == 0:
        raise ValidationError("embeddings must be non-empty")
    if np.any(y < 0):
        raise ValidationError("labels must be >= 0 for centroid computation")
    k = int(y.max()) + 1
    counts = np.bincount(y, minlength=k)
    if np.any(counts == 0):
        missing = int(np.argmax(counts == 0))
        raise MissingClassError(f"class {missing} has no elements")
    sums = np.zeros((k, emb.shape[1]))
    np.add.at(sums, y, emb)
    centroids = sums / counts[:, None]
    norms = np.linalg.norm(centroids, axis=1)
    if np.any(norms <= NORM_FLOOR):
        bad = int(np.argmax(norms <= NORM_FLOOR))
        raise DegenerateClassError(
            f"class {bad} centroid has (near-)zero norm"
        )
    return CentroidTable(centroids=centroids, counts=counts)


def compute_centroids(corpus: Corpus) -> CentroidTable:
    """Class centroids of a fully labeled corpus."""
    if not corpus.is_labeled:
        raise ValidationError("centroid computation requires a fully labeled corpus")
    return class_centroids(corpus.embeddings, corpus.labels)


def raw_ratio(embedding, class_label: int, table: CentroidTable) -> float:
    """Positive-centroid similarity over hardest-negative similarity."""
    emb = as_float_vector(embedding, "embedding")
    if table.k_classes < 2:
        raise ValidationError(
            "ratio computation needs at least 2 classes, got "
            f"{table.k_classes}"
        )
    if not 0 <= class_label < table.k_classes:
        raise ValidationError(
            f"class_label {class_label} outside [0, {table.k_classes})"
        )
    sims = np.array([
        cosine_similarity(emb, table.centroids[c]) for c in range(table.k_classes)
    ])
    positive = sims[class_label]
    negatives = np.delete(sims, class_label)
    hardest = float(negatives.max())
    if abs(hardest) <= DENOMINATOR_FLOOR:
        raise NearSingularRatioError(
            f"hardest-negative similarity {hardest!r} is too close to zero",
            denominator=hardest,
        )
    return float(positive / hardest)


def similarity_ratios(embeddings, labels, table: CentroidTable,
                      element_ids=None) -> np.ndarray:
    """Vectorised :func:`raw_ratio` over a whole collection.

    Semantically identical to calling :func:`raw_ratio` per row; errors name
    the offending element when ``element_ids`` is given.
    """
    emb = as_float_matrix(embeddings, "embeddings")
    y = as_label_vector(labels, "labels")
    check_same_length(emb, y, "embeddings", "labels")
    if table.k_classes < 2:
        raise ValidationError(
            f"ratio computation needs at least 2 classes, got {table.k_classes}"
        )
    if emb.shape[1] != table.d_emb:
        raise ValidationError(
            f"embedding dimension {emb.shape[1]} does not match centroid "
            f"dimension {table.d_emb}"
        )
    if np.any((y < 0) | (y >= table.k_classes)):
        bad = int(np.argmax((y < 0) | (y >= table.k_classes)))
        raise ValidationError(
            f"label {int(y[bad])} outside [0, {table.k_classes})"
        )

    emb_norms = np.linalg.norm(emb, axis=1)
    if np.any(emb_norms <= NORM_FLOOR):
        bad = int(np.argmax(emb_norms <= NORM_FLOOR))
        name = element_ids[bad] if element_ids is not None else f"row {bad}"
        raise ValidationError(f"element {name!r} has (near-)zero norm")
    cen_norms = np.linalg.norm(table.centroids, axis=1)
    if np.any(cen_norms <= NORM_FLOOR):
        bad = int(np.argmax(cen_norms <= NORM_FLOOR))
        raise DegenerateClassError(f"class {bad} centroid has (near-)zero norm")

    sims = (emb / emb_norms[:, None]) @ (table.centroids / cen_norms[:, None]).T
    sims = np.clip(sims, -1.0, 1.0)
    rows = np.arange(emb.shape[0])
    positive = sims[rows, y]
    masked = sims.copy()
    masked[rows, y] = -np.inf
    hardest = masked.max(axis=1)
    small = np.abs(hardest) <= DENOMINATOR_FLOOR
    if np.any(small):
        bad = int(np.argmax(small))
        name = element_ids[bad] if element_ids is not None else f"row {bad}"
        raise NearSingularRatioError(
            f"element {name!r}: hardest-negative similarity "
            f"{float(hardest[bad])!r} is too close to zero",
            denominator=float(hardest[bad]),
        )
    return positive / hardest


def normalize_scores(ratios) -> tuple[np.ndarray, NormalizationStats]:
    """Standardise ratios (population sigma) and squash through the logistic.

    Returns the scores (strictly inside (0, 1)) together with the population
    statistics used. A population with (near-)zero spread maps every element
    to the neutral score 0.5 exactly.
    """
    arr = as_float_vector(ratios, "ratios")
    if arr.size == 0:
        raise ValidationError("ratios must be non-empty")
    mu = float(np.mean(arr))
    sigma = float(np.std(arr))
    stats = NormalizationStats(mu=mu, sigma=sigma)
    if sigma <= SIGMA_FLOOR:
        return np.full(arr.shape, 0.5), stats
    scores = logistic((arr - mu) / sigma)
    return np.clip(scores, _CLAMP, 1.0 - _CLAMP), stats


def score_corpus(corpus: Corpus) -> list[DiscriminabilityRecord]:
    """Score every element of a fully labeled corpus.

    Centroids and normalisation statistics are computed from the corpus
    itself (each element contributes to its own class centroid).
    """
    if not corpus.is_labeled:
        raise ValidationError("scoring requires a fully labeled corpus")
    if corpus.k_classes < 2:
        raise ValidationError(
            f"scoring needs at least 2 classes, got {corpus.k_classes}"
        )
    table = compute_centroids(corpus)
    ratios = similarity_ratios(
        corpus.embeddings, corpus.labels, table, element_ids=corpus.element_ids
    )
    scores, _ = normalize_scores(ratios)
    return [
        DiscriminabilityRecord(
            element_id=eid, d_raw=float(r), d_score=float(s)
        )
        for eid, r, s in zip(corpus.element_ids, ratios, scores)
    ]


class DiscriminabilityScorer(BaseEstimator):
    """Estimator facade over centroid scoring.

    ``fit`` learns class centroids and ratio-normalisation statistics from a
    labeled reference collection; ``transform`` scores (possibly different)
    labeled embeddings against those fixed statistics. ``fit_transform`` on a
    single collection reproduces :func:`score_corpus`.
    """

    def __init__(self):
        pass

    def fit(self, X, y) -> "DiscriminabilityScorer":
        X = as_float_matrix(X, "X")
        y = as_label_vector(y, "y")
        self.centroids_ = class_centroids(X, y)
        ratios = similarity_ratios(X, y, self.centroids_)
        _, self.stats_ = normalize_scores(ratios)
        return self

    def transform(self, X, y) -> np.ndarray:
        self._check_fitted()
        ratios = similarity_ratios(X, y, self.centroids_)
        if self.stats_.sigma <= SIGMA_FLOOR:
            return np.full(ratios.shape, 0.5)
        scores = logistic((ratios - self.stats_.mu) / self.stats_.sigma)
        return np.clip(scores, _CLAMP, 1.0 - _CLAMP)

    def fit_transform(self, X, y) -> np.ndarray:
        return self.fit(X, y).transform(X, y)

    def ratios(self, X, y) -> np.ndarray:
        self._check_fitted()
        return similarity_ratios(X, y, self.centroids_)

    def _check_fitted(self):
        if not hasattr(self, "centroids_"):
            raise NotFittedError(
                "this DiscriminabilityScorer instance is not fitted yet"
            )
