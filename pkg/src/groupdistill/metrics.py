"""Verification and identification metrics for group representations.

Conventions, used consistently by every function here:

* A comparison score is the cosine similarity of two group features.
* A pair is *accepted* (called same-class) when its score is **at or above**
  the decision threshold.
* Candidate thresholds for operating-point searches are taken from the data
  itself, never from a fixed grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .aggregate import AggregationPolicy, GroupRepresentation, \
    count_base_evaluations, represent_corpus
from .data import Corpus
from .exceptions import ProtocolError, ValidationError
from .validation import NORM_FLOOR, as_float_matrix, as_float_vector, \
    as_label_vector, check_same_length


def pair_similarity(a, b) -> float:
    """Cosine similarity between two group features (or representations)."""
    from .scoring import cosine_similarity

    fa = a.feature if isinstance(a, GroupRepresentation) else a
    fb = b.feature if isinstance(b, GroupRepresentation) else b
    return cosine_similarity(fa, fb)


def _score_array(scores, name: str) -> np.ndarray:
    arr = as_float_vector(scores, name)
    if arr.size == 0:
        raise ValidationError(f"{name} must be non-empty")
    return np.sort(arr)


def _count_ge(sorted_scores: np.ndarray, threshold: float) -> int:
    """How many scores are at or above ``threshold``."""
    return int(sorted_scores.size - np.searchsorted(sorted_scores, threshold,
                                                    side="left"))


@dataclass(frozen=True)
class OperatingPoint:
    """A threshold choice and the rates it achieves."""

    threshold: float
    tar: float
    far: float
    reachable: bool


def roc_points(genuine, impostor) -> np.ndarray:
    """(false-accept rate, true-accept rate) pairs, both non-decreasing.

    One point per distinct observed score (thresholds swept from above the
    maximum down to the minimum), beginning at (0, 0).
    """
    g = _score_array(genuine, "genuine")
    m = _score_array(impostor, "impostor")
    thresholds = np.unique(np.concatenate([g, m]))[::-1]
    points = [(0.0, 0.0)]
    for t in thresholds:
        points.append((_count_ge(m, t) / m.size, _count_ge(g, t) / g.size))
    return np.array(points)


def tar_at_far(genuine, impostor, far_levels) -> dict[float, OperatingPoint]:
    """True-accept rate at each false-accept-rate budget.

    For each budget the threshold is the smallest observed score (over both
    populations pooled) whose false-accept rate does not exceed the budget;
    if no observed score qualifies, the threshold is nudged just above the
    highest impostor score. Budgets below ``1/len(impostor)`` cannot be
    realised by any non-zero false-accept count and are flagged
    ``reachable=False`` (the zero-false-accept threshold is still reported).
    """
    g = _score_array(genuine, "genuine")
    m = _score_array(impostor, "impostor")
    levels = [float(f) for f in np.atleast_1d(np.asarray(far_levels, dtype=float))]
    if not levels:
        raise ValidationError("far_levels must be non-empty")
    for f in levels:
        if not 0.0 < f <= 1.0:
            raise ValidationError(f"far level must lie in (0, 1], got {f!r}")

    candidates = np.unique(np.concatenate([g, m]))
    fars = np.array([_count_ge(m, t) / m.size for t in candidates])
    out: dict[float, OperatingPoint] = {}
    for f in levels:
        ok = np.flatnonzero(fars <= f)
        if ok.size:
            threshold = float(candidates[ok[0]])
        else:
            threshold = float(np.nextafter(m[-1], np.inf))
        out[f] = OperatingPoint(
            threshold=threshold,
            tar=_count_ge(g, threshold) / g.size,
            far=_count_ge(m, threshold) / m.size,
            reachable=f * m.size >= 1.0,
        )
    return out


def verification_accuracy(genuine, impostor) -> tuple[float, float]:
    """Best fraction of correctly classified pairs, and the threshold
    achieving it.

    Candidate thresholds are the midpoints between consecutive distinct
    observed scores, extended one unit below the minimum and one above the
    maximum so "accept everything" and "reject everything" are always
    considered. Ties go to the lowest threshold.
    """
    g = _score_array(genuine, "genuine")
    m = _score_array(impostor, "impostor")
    uniq = np.unique(np.concatenate([g, m]))
    edges = np.concatenate([[uniq[0] - 1.0], uniq, [uniq[-1] + 1.0]])
    candidates = (edges[:-1] + edges[1:]) / 2.0
    total = g.size + m.size
    accuracies = np.array([
        (_count_ge(g, t) + (m.size - _count_ge(m, t))) / total
        for t in candidates
    ])
    best = int(np.argmax(accuracies))  # first maximum -> lowest threshold
    return float(accuracies[best]), float(candidates[best])


def cmc_map(query_features, query_labels, gallery_features,
            gallery_labels) -> tuple[np.ndarray, float]:
    """Cumulative match characteristic and mean average precision.

    Queries are ranked against the gallery by cosine similarity, descending;
    equal similarities keep gallery order (stable sort). ``cmc[r]`` is the
    fraction of queries whose first correct match appears at rank <= r
    (0-based); every query's class must occur in the gallery.
    """
    q = as_float_matrix(query_features, "query_features")
    gal = as_float_matrix(gallery_features, "gallery_features")
    qy = as_label_vector(query_labels, "query_labels")
    gy = as_label_vector(gallery_labels, "gallery_labels")
    check_same_length(q, qy, "query_features", "query_labels")
    check_same_length(gal, gy, "gallery_features", "gallery_labels")
    if q.shape[0] == 0 or gal.shape[0] == 0:
        raise ValidationError("query and gallery must be non-empty")
    if q.shape[1] != gal.shape[1]:
        raise ValidationError(
            f"query dimension {q.shape[1]} does not match gallery "
            f"dimension {gal.shape[1]}"
        )
    missing = set(qy.tolist()) - set(gy.tolist())
    if missing:
        raise ProtocolError(
            f"query classes {sorted(missing)} are absent from the gallery"
        )
    qn = np.linalg.norm(q, axis=1)
    gn = np.linalg.norm(gal, axis=1)
    if np.any(qn <= NORM_FLOOR) or np.any(gn <= NORM_FLOOR):
        raise ValidationError("features must have non-zero norm")

    sims = (q / qn[:, None]) @ (gal / gn[:, None]).T
    order = np.argsort(-sims, axis=1, kind="stable")
    matches = gy[order] == qy[:, None]

    first_hit = matches.argmax(axis=1)
    cmc = np.cumsum(np.bincount(first_hit, minlength=gal.shape[0])) / q.shape[0]

    aps = np.empty(q.shape[0])
    for i in range(q.shape[0]):
        hits = np.flatnonzero(matches[i])
        precisions = np.arange(1, hits.size + 1) / (hits + 1.0)
        aps[i] = precisions.mean()
    return cmc, float(aps.mean())


# -- protocols and reports ---------------------------------------------------


@dataclass(frozen=True)
class EvalProtocol:
    """What to compare: labeled pairs, FAR budgets, optional identification
    split (gallery/query group ids plus the class label of every group)."""

    pairs: tuple[tuple[str, str, bool], ...]
    far_levels: tuple[float, ...] = (1e-2, 1e-3)
    gallery_ids: tuple[str, ...] = ()
    query_ids: tuple[str, ...] = ()
    group_labels: Mapping[str, int] | None = None

    def __post_init__(self):
        if not self.pairs:
            raise ProtocolError("protocol contains no pairs")
        if (self.gallery_ids or self.query_ids) and self.group_labels is None:
            raise ProtocolError(
                "identification split requires group_labels"
            )


def protocol_from_labels(group_labels: Mapping[str, int],
                         far_levels=(1e-2, 1e-3),
                         with_identification: bool = True) -> EvalProtocol:
    """Exhaustive verification pairs (and an identification split) from a
    group -> class mapping.

    Every unordered pair of distinct groups becomes a verification pair. The
    first group of each class (mapping order) forms the gallery; remaining
    groups become queries.
    """
    gids = list(group_labels)
    if len(gids) < 2:
        raise ProtocolError("need at least 2 groups to form pairs")
    pairs = tuple(
        (gids[i], gids[j], group_labels[gids[i]] == group_labels[gids[j]])
        for i in range(len(gids)) for j in range(i + 1, len(gids))
    )
    gallery: list[str] = []
    seen: set[int] = set()
    if with_identification:
        for gid in gids:
            if group_labels[gid] not in seen:
                seen.add(group_labels[gid])
                gallery.append(gid)
    queries = tuple(g for g in gids if g not in set(gallery)) \
        if with_identification else ()
    return EvalProtocol(
        pairs=pairs,
        far_levels=tuple(float(f) for f in far_levels),
        gallery_ids=tuple(gallery),
        query_ids=queries,
        group_labels=dict(group_labels),
    )


@dataclass(frozen=True)
class EvalReport:
    """Everything one evaluation run produces."""

    roc: np.ndarray
    operating_points: dict[float, OperatingPoint]
    best_accuracy: float
    best_threshold: float
    cmc: np.ndarray | None = None
    mean_ap: float | None = None

    @property
    def tar_at_far(self) -> dict[float, float]:
        return {f: p.tar for f, p in self.operating_points.items()}


def _features_by_id(
    representations: Iterable[GroupRepresentation] | Mapping[str, np.ndarray],
) -> dict[str, np.ndarray]:
    if isinstance(representations, Mapping):
        return {str(k): np.asarray(v, dtype=float)
                for k, v in representations.items()}
    return {r.group_id: r.feature for r in representations}


def pair_scores(representations, pairs) -> tuple[np.ndarray, np.ndarray]:
    """Cosine scores for labeled pairs, split into (genuine, impostor)."""
    feats = _features_by_id(representations)
    ids = list(feats)
    index = {gid: i for i, gid in enumerate(ids)}
    matrix = np.vstack([feats[g] for g in ids])
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms <= NORM_FLOOR):
        bad = ids[int(np.argmax(norms <= NORM_FLOOR))]
        raise ValidationError(f"group {bad!r} feature has (near-)zero norm")
    unit = matrix / norms[:, None]

    a_idx, b_idx, same = [], [], []
    for pa, pb, is_same in pairs:
        if pa not in index or pb not in index:
            missing = pa if pa not in index else pb
            raise ProtocolError(
                f"pair references unknown group {missing!r}"
            )
        a_idx.append(index[pa])
        b_idx.append(index[pb])
        same.append(bool(is_same))
    scores = np.clip(
        np.einsum("ij,ij->i", unit[a_idx], unit[b_idx]), -1.0, 1.0
    )
    mask = np.array(same, dtype=bool)
    return scores[mask], scores[~mask]


def evaluate_groups(representations, protocol: EvalProtocol) -> EvalReport:
    """Run the full verification (and optional identification) protocol."""
    genuine, impostor = pair_scores(representations, protocol.pairs)
    if genuine.size == 0 or impostor.size == 0:
        raise ProtocolError(
            "protocol needs at least one genuine and one impostor pair"
        )
    points = tar_at_far(genuine, impostor, protocol.far_levels)
    accuracy, threshold = verification_accuracy(genuine, impostor)
    cmc = mean_ap = None
    if protocol.query_ids and protocol.gallery_ids:
        feats = _features_by_id(representations)
        labels = protocol.group_labels
        for gid in (*protocol.gallery_ids, *protocol.query_ids):
            if gid not in feats:
                raise ProtocolError(f"protocol references unknown group {gid!r}")
            if gid not in labels:
                raise ProtocolError(f"group {gid!r} has no class label")
        cmc, mean_ap = cmc_map(
            np.vstack([feats[g] for g in protocol.query_ids]),
            [labels[g] for g in protocol.query_ids],
            np.vstack([feats[g] for g in protocol.gallery_ids]),
            [labels[g] for g in protocol.gallery_ids],
        )
    return EvalReport(
        roc=roc_points(genuine, impostor),
        operating_points=points,
        best_accuracy=accuracy,
        best_threshold=threshold,
        cmc=cmc,
        mean_ap=mean_ap,
    )


# -- strategy comparison -------------------------------------------------------


@dataclass(frozen=True)
class StrategyComparison:
    strategy: str
    report: EvalReport
    used: int
    total: int


def compare_strategies(corpus: Corpus, model,
                       policies: Sequence[AggregationPolicy],
                       protocol: EvalProtocol) -> list[StrategyComparison]:
    """Evaluate each pooling policy on the same corpus and protocol."""
    out = []
    for policy in policies:
        reps = represent_corpus(corpus, model, policy)
        report = evaluate_groups(reps, protocol)
        used, total = count_base_evaluations(corpus, model, policy)
        out.append(StrategyComparison(
            strategy=policy.strategy, report=report, used=used, total=total,
        ))
    return out


def comparison_rows(comparisons: Sequence[StrategyComparison]) -> list[dict]:
    """Flatten comparisons into CSV-friendly rows (one per strategy)."""
    rows = []
    for comp in comparisons:
        row: dict = {
            "strategy": comp.strategy,
            "used": comp.used,
            "total": comp.total,
            "accuracy": comp.report.best_accuracy,
            "threshold": comp.report.best_threshold,
        }
        for far in sorted(comp.report.operating_points):
            row[f"tar_at_far_{far:g}"] = comp.report.operating_points[far].tar
        if comp.report.mean_ap is not None:
            row["rank1"] = comp.report.cmc[0]
            row["map"] = comp.report.mean_ap
        rows.append(row)
    return rows


def format_comparison(comparisons: Sequence[StrategyComparison]) -> str:
    """Aligned text table over all compared strategies."""
    rows = comparison_rows(comparisons)
    fields = list(rows[0])
    table = [fields]
    for row in rows:
        rendered = []
        for f in fields:
            v = row.get(f, "")
            rendered.append(f"{v:.4f}" if isinstance(v, float) else str(v))
        table.append(rendered)
    widths = [max(len(r[i]) for r in table) for i in range(len(fields))]
    lines = [
        "  ".join(cell.rjust(w) if i else cell.ljust(w)
                  for i, (cell, w) in enumerate(zip(r, widths)))
        for r in table
    ]
    return "\n".join(lines)
