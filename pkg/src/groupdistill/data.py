"""Core record and corpus types.

A *corpus* is an ordered collection of elements; each element carries a raw
input vector (what the distilled regressor sees), an embedding vector (what
centroids, scores, and group features are computed from), a group id, and an
optional class label. Elements of the same group are pooled into one group
representation; class labels drive centroid computation and evaluation.

All types are immutable after construction; the numpy arrays they hold are
marked read-only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .exceptions import ValidationError
from .validation import NORM_FLOOR

#: Sentinel stored in ``Corpus.labels`` for elements without a class label.
UNLABELED = -1


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ElementRecord:
    """One element: identifiers plus its raw-input and embedding vectors."""

    element_id: str
    group_id: str
    class_label: int | None
    raw_input: np.ndarray
    embedding: np.ndarray

    def __post_init__(self):
        if not self.element_id:
            raise ValidationError("element_id must be non-empty")
        if not self.group_id:
            raise ValidationError("group_id must be non-empty")
        if self.class_label is not None and self.class_label < 0:
            raise ValidationError(
                f"element {self.element_id!r}: class_label must be >= 0, "
                f"got {self.class_label}"
            )
        raw = np.asarray(self.raw_input, dtype=float)
        emb = np.asarray(self.embedding, dtype=float)
        if raw.ndim != 1 or raw.size == 0:
            raise ValidationError(
                f"element {self.element_id!r}: raw_input must be a non-empty vector"
            )
        if emb.ndim != 1 or emb.size == 0:
            raise ValidationError(
                f"element {self.element_id!r}: embedding must be a non-empty vector"
            )
        if not np.all(np.isfinite(raw)) or not np.all(np.isfinite(emb)):
            raise ValidationError(
                f"element {self.element_id!r}: vectors must be finite"
            )
        if not float(np.linalg.norm(emb)) > NORM_FLOOR:
            raise ValidationError(
                f"element {self.element_id!r}: embedding has (near-)zero norm"
            )
        object.__setattr__(self, "raw_input", _readonly(raw))
        object.__setattr__(self, "embedding", _readonly(emb))


@dataclass(frozen=True)
class Corpus:
    """An immutable, columnar view of an ordered element collection.

    ``labels`` uses :data:`UNLABELED` (-1) for unlabeled elements. Validation
    is row-local and set-based, so permuting rows never changes whether a
    corpus is accepted.
    """

    element_ids: tuple[str, ...]
    group_ids: tuple[str, ...]
    labels: np.ndarray
    raw_inputs: np.ndarray
    embeddings: np.ndarray

    def __post_init__(self):
        ids = tuple(str(e) for e in self.element_ids)
        gids = tuple(str(g) for g in self.group_ids)
        labels = np.asarray(self.labels, dtype=np.int64)
        raw = np.asarray(self.raw_inputs, dtype=float)
        emb = np.asarray(self.embeddings, dtype=float)

        n = len(ids)
        if n == 0:
            raise ValidationError("corpus must contain at least one element")
        for name, value in (("group_ids", gids), ("labels", labels),
                            ("raw_inputs", raw), ("embeddings", emb)):
            if len(value) != n:
                raise ValidationError(
                    f"{name} has length {len(value)}, expected {n}"
                )
        if raw.ndim != 2 or emb.ndim != 2:
            raise ValidationError("raw_inputs and embeddings must be 2-D arrays")
        if raw.shape[1] == 0 or emb.shape[1] == 0:
            raise ValidationError("vector dimensions must be positive")
        if labels.ndim != 1:
            raise ValidationError("labels must be one-dimensional")
        if any(not e for e in ids) or any(not g for g in gids):
            raise ValidationError("element and group ids must be non-empty")
        if len(set(ids)) != n:
            seen: set[str] = set()
            dup = next(e for e in ids if e in seen or seen.add(e))
            raise ValidationError(f"duplicate element_id {dup!r}")
        if np.any(labels < UNLABELED):
            bad = int(labels[labels < UNLABELED][0])
            raise ValidationError(f"class labels must be >= 0, got {bad}")
        if not np.all(np.isfinite(raw)):
            raise ValidationError("raw_inputs contain non-finite values")
        if not np.all(np.isfinite(emb)):
            raise ValidationError("embeddings contain non-finite values")
        norms = np.linalg.norm(emb, axis=1)
        if np.any(norms <= NORM_FLOOR):
            idx = int(np.argmax(norms <= NORM_FLOOR))
            raise ValidationError(
                f"element {ids[idx]!r}: embedding has (near-)zero norm"
            )

        object.__setattr__(self, "element_ids", ids)
        object.__setattr__(self, "group_ids", gids)
        object.__setattr__(self, "labels", _readonly(labels))
        object.__setattr__(self, "raw_inputs", _readonly(raw))
        object.__setattr__(self, "embeddings", _readonly(emb))

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_records(cls, records: Iterable[ElementRecord]) -> "Corpus":
        records = list(records)
        if not records:
            raise ValidationError("corpus must contain at least one element")
        d_raw = records[0].raw_input.size
        d_emb = records[0].embedding.size
        for rec in records:
            if rec.raw_input.size != d_raw or rec.embedding.size != d_emb:
                raise ValidationError(
                    f"element {rec.element_id!r}: inconsistent vector dimensions"
                )
        return cls(
            element_ids=tuple(r.element_id for r in records),
            group_ids=tuple(r.group_id for r in records),
            labels=np.array(
                [UNLABELED if r.class_label is None else r.class_label
                 for r in records],
                dtype=np.int64,
            ),
            raw_inputs=np.vstack([r.raw_input for r in records]),
            embeddings=np.vstack([r.embedding for r in records]),
        )

    # -- basic shape ----------------------------------------------------------

    @property
    def size(self) -> int:
        return len(self.element_ids)

    @property
    def d_raw(self) -> int:
        return self.raw_inputs.shape[1]

    @property
    def d_emb(self) -> int:
        return self.embeddings.shape[1]

    @property
    def is_labeled(self) -> bool:
        """True when every element carries a class label."""
        return bool(np.all(self.labels != UNLABELED))

    @property
    def k_classes(self) -> int:
        """Number of classes, inferred as ``max(label) + 1``."""
        if not self.is_labeled:
            raise ValidationError("corpus is not fully labeled")
        return int(self.labels.max()) + 1

    def __len__(self) -> int:
        return self.size

    def __iter__(self) -> Iterator[ElementRecord]:
        return (self.element(i) for i in range(self.size))

    def element(self, i: int) -> ElementRecord:
        label = int(self.labels[i])
        return ElementRecord(
            element_id=self.element_ids[i],
            group_id=self.group_ids[i],
            class_label=None if label == UNLABELED else label,
            raw_input=self.raw_inputs[i],
            embedding=self.embeddings[i],
        )

    # -- slicing and grouping -------------------------------------------------

    def subset(self, indices: Sequence[int]) -> "Corpus":
        """A new corpus containing the selected rows, in the given order."""
        idx = np.asarray(indices, dtype=np.int64)
        return Corpus(
            element_ids=tuple(self.element_ids[i] for i in idx),
            group_ids=tuple(self.group_ids[i] for i in idx),
            labels=self.labels[idx],
            raw_inputs=self.raw_inputs[idx],
            embeddings=self.embeddings[idx],
        )

    def groups(self) -> list[tuple[str, np.ndarray]]:
        """Group ids with their member row indices, in first-appearance order."""
        order: dict[str, list[int]] = {}
        for i, gid in enumerate(self.group_ids):
            order.setdefault(gid, []).append(i)
        return [(gid, np.array(rows, dtype=np.int64)) for gid, rows in order.items()]

    def group_labels(self) -> dict[str, int]:
        """Class label per group (requires labels to be group-consistent)."""
        out: dict[str, int] = {}
        for i, gid in enumerate(self.group_ids):
            label = int(self.labels[i])
            if label == UNLABELED:
                raise ValidationError(
                    f"group {gid!r} contains unlabeled elements"
                )
            if gid in out and out[gid] != label:
                raise ValidationError(
                    f"group {gid!r} mixes class labels {out[gid]} and {label}"
                )
            out.setdefault(gid, label)
        return out


@dataclass(frozen=True)
class DiscriminabilityRecord:
    """Per-element scoring result.

    ``d_raw`` is the unbounded centroid-similarity ratio, ``d_score`` its
    normalised value in the open interval (0, 1), and ``d_hat`` an optional
    regressor estimate of ``d_score``.
    """

    element_id: str
    d_raw: float
    d_score: float
    d_hat: float | None = None

    def __post_init__(self):
        if not self.element_id:
            raise ValidationError("element_id must be non-empty")
        if not np.isfinite(self.d_raw):
            raise ValidationError(
                f"element {self.element_id!r}: d_raw must be finite"
            )
        if not 0.0 < self.d_score < 1.0:
            raise ValidationError(
                f"element {self.element_id!r}: d_score must lie strictly "
                f"inside (0, 1), got {self.d_score!r}"
            )
        if self.d_hat is not None and not 0.0 < self.d_hat < 1.0:
            raise ValidationError(
                f"element {self.element_id!r}: d_hat must lie strictly "
                f"inside (0, 1), got {self.d_hat!r}"
            )
