"""Pooling element embeddings into per-group representations.

The main strategy (``"ddl"``) filters a group's elements by their predicted
discriminability, rescales the survivors' scores to span [0, 1] exactly, and
pools the surviving embeddings by those weights. Baselines: ``"average"``
(uniform weights over all elements), ``"top1"`` (only the highest-scoring
element), and ``"ddl_no_rescale"`` (filter, but weight by the raw predicted
scores).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .data import Corpus
from .exceptions import ValidationError
from .validation import as_float_matrix, as_float_vector, check_same_length

STRATEGIES = ("ddl", "ddl_no_rescale", "average", "top1")

#: Score spans at or below this are treated as degenerate by :func:`rescale`.
SPAN_FLOOR = 1e-12


@dataclass(frozen=True)
class AggregationPolicy:
    """How a group is pooled: strategy, score threshold, survivor floor."""

    strategy: str = "ddl"
    threshold: float = 0.15
    min_survivors: int = 1

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValidationError(
                f"strategy must be one of {STRATEGIES}, got {self.strategy!r}"
            )
        if not 0.0 <= self.threshold <= 1.0:
            raise ValidationError(
                f"threshold must lie in [0, 1], got {self.threshold!r}"
            )
        if self.min_survivors < 1:
            raise ValidationError(
                f"min_survivors must be >= 1, got {self.min_survivors}"
            )


@dataclass(frozen=True)
class GroupRepresentation:
    """A pooled group feature plus bookkeeping about what was pooled."""

    group_id: str
    feature: np.ndarray
    used_count: int
    total_count: int
    weights: np.ndarray
    threshold: float

    def __post_init__(self):
        feature = np.asarray(self.feature, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if not self.group_id:
            raise ValidationError("group_id must be non-empty")
        if feature.ndim != 1 or not np.all(np.isfinite(feature)):
            raise ValidationError(
                f"group {self.group_id!r}: feature must be a finite vector"
            )
        if not 1 <= self.used_count <= self.total_count:
            raise ValidationError(
                f"group {self.group_id!r}: used_count must lie in "
                f"[1, total_count], got {self.used_count}/{self.total_count}"
            )
        if weights.ndim != 1 or weights.size != self.used_count:
            raise ValidationError(
                f"group {self.group_id!r}: weights must have one entry per "
                f"used element"
            )
        feature.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "feature", feature)
        object.__setattr__(self, "weights", weights)


def filter_by_score(scores, threshold: float, min_survivors: int = 1) -> np.ndarray:
    """Indices of scores strictly above ``threshold``, in element order.

    If fewer than ``min_survivors`` qualify, the highest-scoring elements are
    kept instead (ties broken toward the earliest element), so a group always
    contributes at least ``min(min_survivors, len(scores))`` elements.
    """
    s = as_float_vector(scores, "scores")
    if s.size == 0:
        raise ValidationError("scores must be non-empty")
    if min_survivors < 1:
        raise ValidationError(f"min_survivors must be >= 1, got {min_survivors}")
    keep = np.flatnonzero(s > threshold)
    if keep.size >= min_survivors:
        return keep
    k = min(int(min_survivors), s.size)
    # Stable sort on -s keeps earlier indices first among equal scores.
    best = np.argsort(-s, kind="stable")[:k]
    return np.sort(best)


def rescale(scores) -> np.ndarray:
    """Affinely map scores onto [0, 1] so min -> 0.0 and max -> 1.0 exactly.

    A (near-)constant set has no usable spread; every weight becomes 1.0.
    """
    s = as_float_vector(scores, "scores")
    if s.size == 0:
        raise ValidationError("scores must be non-empty")
    low = float(s.min())
    span = float(s.max()) - low
    if span <= SPAN_FLOOR:
        return np.ones(s.shape)
    return (s - low) / span


def aggregate(features, weights) -> np.ndarray:
    """Weighted mean of feature rows: ``sum(w_i * f_i) / sum(w_i)``."""
    f = as_float_matrix(features, "features")
    w = as_float_vector(weights, "weights")
    check_same_length(f, w, "features", "weights")
    if f.shape[0] == 0:
        raise ValidationError("cannot aggregate an empty feature set")
    if np.any(w < 0):
        raise ValidationError("weights must be non-negative")
    total = float(w.sum())
    if total <= 0.0:
        raise ValidationError("weights sum to zero; nothing to aggregate")
    return (w[:, None] * f).sum(axis=0) / total


def represent_group(group_id: str, raw_inputs, embeddings, model,
                    policy: AggregationPolicy) -> GroupRepresentation:
    """Pool one group's embeddings according to ``policy``.

    ``model`` must offer ``predict(raw_inputs) -> scores``; it is consulted
    for every strategy except ``"average"``.
    """
    raw = as_float_matrix(raw_inputs, "raw_inputs")
    emb = as_float_matrix(embeddings, "embeddings")
    check_same_length(raw, emb, "raw_inputs", "embeddings")
    n = emb.shape[0]
    if n == 0:
        raise ValidationError(f"group {group_id!r} has no elements")

    if policy.strategy == "average":
        idx = np.arange(n)
        weights = np.ones(n)
    else:
        scores = np.asarray(model.predict(raw), dtype=float).reshape(-1)
        if scores.size != n:
            raise ValidationError(
                f"group {group_id!r}: model returned {scores.size} scores "
                f"for {n} elements"
            )
        if policy.strategy == "top1":
            idx = np.array([int(np.argmax(scores))])
            weights = np.ones(1)
        else:
            idx = filter_by_score(scores, policy.threshold, policy.min_survivors)
            kept = scores[idx]
            weights = rescale(kept) if policy.strategy == "ddl" else kept

    feature = aggregate(emb[idx], weights)
    return GroupRepresentation(
        group_id=group_id,
        feature=feature,
        used_count=int(idx.size),
        total_count=n,
        weights=weights,
        threshold=policy.threshold,
    )


def represent_corpus(corpus: Corpus, model,
                     policy: AggregationPolicy) -> list[GroupRepresentation]:
    """One representation per group, in first-appearance order."""
    return [
        represent_group(
            gid, corpus.raw_inputs[rows], corpus.embeddings[rows], model, policy
        )
        for gid, rows in corpus.groups()
    ]


def count_base_evaluations(corpus: Corpus, model,
                           policy: AggregationPolicy) -> tuple[int, int]:
    """(elements whose embedding the pipeline consumes, total elements).

    ``"average"`` consumes everything; ``"top1"`` one per group; the
    filtering strategies consume exactly the filter survivors.
    """
    used = 0
    total = corpus.size
    for gid, rows in corpus.groups():
        n = rows.size
        if policy.strategy == "average":
            used += n
        elif policy.strategy == "top1":
            used += 1
        else:
            scores = np.asarray(
                model.predict(corpus.raw_inputs[rows]), dtype=float
            ).reshape(-1)
            used += filter_by_score(
                scores, policy.threshold, policy.min_survivors
            ).size
    return used, total


class GroupAggregator(BaseEstimator):
    """Estimator facade: corpus in, group representations out.

    Stateless apart from its parameters; ``fit`` exists for pipeline
    compatibility and returns ``self`` unchanged.
    """

    def __init__(self, model=None, strategy="ddl", threshold=0.15,
                 min_survivors=1):
        self.model = model
        self.strategy = strategy
        self.threshold = threshold
        self.min_survivors = min_survivors

    def _policy(self) -> AggregationPolicy:
        return AggregationPolicy(
            strategy=self.strategy,
            threshold=self.threshold,
            min_survivors=self.min_survivors,
        )

    def fit(self, X=None, y=None) -> "GroupAggregator":
        self._policy()  # validate parameters eagerly
        return self

    def transform(self, corpus: Corpus) -> list[GroupRepresentation]:
        policy = self._policy()
        if policy.strategy != "average" and self.model is None:
            raise ValidationError(
                f"strategy {policy.strategy!r} needs a fitted score model"
            )
        return represent_corpus(corpus, self.model, policy)
