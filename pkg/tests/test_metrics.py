"""Verification and identification metrics against brute-force oracles."""

import math

import numpy as np
import pytest

from groupdistill import (
    AggregationPolicy,
    ProtocolError,
    ValidationError,
    cmc_map,
    compare_strategies,
    evaluate_groups,
    pair_similarity,
    protocol_from_labels,
    roc_points,
    tar_at_far,
    verification_accuracy,
)
from groupdistill.distill import DiscriminabilityRegressor
from groupdistill.metrics import (
    EvalProtocol,
    comparison_rows,
    format_comparison,
    pair_scores,
)

from conftest import make_corpus
from oracles import oracle_accuracy, oracle_cmc_map, oracle_tar_at_far


# -- tar_at_far -------------------------------------------------------------------


def test_tar_hand_example():
    points = tar_at_far([0.9, 0.8], [0.4, 0.2], [0.5])
    p = points[0.5]
    assert p.threshold == 0.4
    assert p.tar == 1.0
    assert p.far == 0.5
    assert p.reachable


def test_tar_fully_separated():
    for level in (0.01, 0.5, 1.0):
        points = tar_at_far([0.9, 0.8, 0.7], [0.2, 0.1], [level])
        assert points[level].tar == 1.0


def test_tar_identical_distributions():
    scores = [0.1, 0.2, 0.3, 0.4]
    points = tar_at_far(scores, scores, [0.5])
    assert points[0.5].tar == 0.5


def test_tar_unreachable_far_is_flagged():
    points = tar_at_far([0.9, 0.8], [0.5, 0.4, 0.3], [1e-3])
    p = points[1e-3]
    assert not p.reachable
    assert p.far == 0.0
    assert p.threshold > 0.5
    assert p.tar == 1.0


def test_tar_far_level_validation():
    with pytest.raises(ValidationError):
        tar_at_far([0.9], [0.1], [0.0])
    with pytest.raises(ValidationError):
        tar_at_far([0.9], [0.1], [1.5])
    with pytest.raises(ValidationError):
        tar_at_far([], [0.1], [0.5])


def test_tar_matches_oracle_on_random_lists(rng):
    for _ in range(300):
        n_g = int(rng.integers(1, 200))
        n_i = int(rng.integers(1, 200))
        # Coarse grid makes duplicate scores (ties) common.
        genuine = rng.integers(0, 25, size=n_g) / 25.0
        impostor = rng.integers(0, 25, size=n_i) / 25.0
        far = float(rng.uniform(0.005, 1.0))
        point = tar_at_far(genuine, impostor, [far])[far]
        threshold, tar, achieved = oracle_tar_at_far(
            genuine.tolist(), impostor.tolist(), far
        )
        assert abs(point.threshold - threshold) < 1e-12
        assert abs(point.tar - tar) < 1e-12
        assert abs(point.far - achieved) < 1e-12


# -- verification_accuracy -----------------------------------------------------------


def test_accuracy_separable():
    accuracy, threshold = verification_accuracy([0.9, 0.8], [0.2, 0.1])
    assert accuracy == 1.0
    assert 0.2 < threshold < 0.8


def test_accuracy_indistinguishable():
    accuracy, _ = verification_accuracy([0.6], [0.6])
    assert accuracy == 0.5


def test_accuracy_hand_example():
    accuracy, _ = verification_accuracy([0.9, 0.4], [0.5, 0.1])
    assert accuracy == 0.75


def test_accuracy_tie_takes_lowest_threshold():
    accuracy, threshold = verification_accuracy([0.4, 0.9], [0.1, 0.6])
    oracle_acc, oracle_t = oracle_accuracy([0.4, 0.9], [0.1, 0.6])
    assert accuracy == oracle_acc
    assert abs(threshold - oracle_t) < 1e-12


def test_accuracy_matches_oracle_on_random_lists(rng):
    for _ in range(200):
        n_g = int(rng.integers(1, 120))
        n_i = int(rng.integers(1, 120))
        genuine = rng.integers(0, 12, size=n_g) / 12.0
        impostor = rng.integers(0, 12, size=n_i) / 12.0
        accuracy, threshold = verification_accuracy(genuine, impostor)
        oracle_acc, oracle_t = oracle_accuracy(genuine.tolist(), impostor.tolist())
        assert abs(accuracy - oracle_acc) < 1e-12
        assert abs(threshold - oracle_t) < 1e-12


# -- roc -------------------------------------------------------------------------


def test_roc_monotone_and_anchored(rng):
    points = roc_points(rng.normal(0.6, 0.2, 50), rng.normal(0.3, 0.2, 80))
    assert points[0].tolist() == [0.0, 0.0]
    assert points[-1].tolist() == [1.0, 1.0]
    assert np.all(np.diff(points[:, 0]) >= 0)
    assert np.all(np.diff(points[:, 1]) >= 0)


# -- cmc / map --------------------------------------------------------------------


def test_cmc_perfect_match():
    gallery = np.eye(3)
    cmc, mean_ap = cmc_map(gallery, [0, 1, 2], gallery, [0, 1, 2])
    assert cmc.tolist() == [1.0, 1.0, 1.0]
    assert mean_ap == 1.0


def test_cmc_match_at_rank_two():
    gallery = np.array([[1.0, 0.0], [0.8, 0.6], [0.0, 1.0]])
    labels = [0, 1, 2]
    query = np.array([[1.0, 0.05]])
    cmc, mean_ap = cmc_map(query, [1], gallery, labels)
    assert cmc.tolist() == [0.0, 1.0, 1.0]
    assert mean_ap == 0.5


def test_map_two_relevant_items():
    # relevant at ranks 1 and 3 (cosines 1.0 and 0.5), irrelevant between at 0.7
    gallery = np.array([
        [1.0, 0.0],
        [0.7, math.sqrt(1.0 - 0.49)],
        [0.5, math.sqrt(0.75)],
    ])
    labels = [0, 1, 0]
    query = np.array([[1.0, 0.0]])
    _, mean_ap = cmc_map(query, [0], gallery, labels)
    assert abs(mean_ap - (1.0 + 2.0 / 3.0) / 2.0) < 1e-12


def test_cmc_tie_keeps_gallery_order():
    gallery = np.array([[1.0, 0.0], [1.0, 0.0]])
    cmc, _ = cmc_map(np.array([[1.0, 0.0]]), [1], gallery, [0, 1])
    assert cmc.tolist() == [0.0, 1.0]  # tied, insertion order ranks 0 first


def test_cmc_missing_class_rejected():
    with pytest.raises(ProtocolError):
        cmc_map(np.eye(2), [0, 1], np.eye(2)[:1], [0])


def test_cmc_matches_oracle_on_random_galleries(rng):
    for _ in range(60):
        d = int(rng.integers(2, 6))
        n_classes = int(rng.integers(2, 6))
        n_gallery = int(rng.integers(n_classes, 40))
        n_query = int(rng.integers(1, 30))
        gallery_labels = np.concatenate([
            np.arange(n_classes),
            rng.integers(0, n_classes, size=n_gallery - n_classes),
        ])
        query_labels = rng.integers(0, n_classes, size=n_query)
        # Continuous draws: exact similarity ties have probability zero, so
        # the oracle and the implementation rank identically despite their
        # different cosine round-off. Exact-duplicate ties get their own test.
        gallery = rng.normal(size=(n_gallery, d))
        query = rng.normal(size=(n_query, d))
        cmc, mean_ap = cmc_map(query, query_labels, gallery, gallery_labels)
        ref_cmc, ref_map = oracle_cmc_map(
            query.tolist(), query_labels.tolist(),
            gallery.tolist(), gallery_labels.tolist(),
        )
        assert np.max(np.abs(cmc - ref_cmc)) < 1e-12
        assert abs(mean_ap - ref_map) < 1e-12
        assert np.all(np.diff(cmc) >= 0)
        assert cmc[-1] == 1.0


# -- protocols ---------------------------------------------------------------------


def test_protocol_from_labels_structure():
    labels = {"a0": 0, "a1": 0, "b0": 1, "b1": 1}
    protocol = protocol_from_labels(labels, far_levels=(0.1,))
    assert len(protocol.pairs) == 6
    same = [p for p in protocol.pairs if p[2]]
    assert sorted(same) == [("a0", "a1", True), ("b0", "b1", True)]
    assert protocol.gallery_ids == ("a0", "b0")
    assert protocol.query_ids == ("a1", "b1")


def test_protocol_requires_two_groups():
    with pytest.raises(ProtocolError):
        protocol_from_labels({"only": 0})


def test_protocol_validation():
    with pytest.raises(ProtocolError):
        EvalProtocol(pairs=())
    with pytest.raises(ProtocolError):
        EvalProtocol(pairs=(("a", "b", True),), gallery_ids=("a",),
                     query_ids=("b",), group_labels=None)


def test_pair_scores_unknown_group():
    feats = {"a": np.array([1.0, 0.0]), "b": np.array([0.0, 1.0])}
    with pytest.raises(ProtocolError, match="ghost"):
        pair_scores(feats, [("a", "ghost", True)])


def test_pair_scores_zero_norm_feature():
    feats = {"a": np.array([0.0, 0.0]), "b": np.array([0.0, 1.0])}
    with pytest.raises(ValidationError):
        pair_scores(feats, [("a", "b", True)])


def test_pair_similarity_matches_cosine():
    a = np.array([1.0, 1.0])
    b = np.array([1.0, 0.0])
    assert abs(pair_similarity(a, b) - math.sqrt(0.5)) < 1e-15


# -- end-to-end harness -----------------------------------------------------------


def test_evaluate_groups_full_report(rng):
    corpus = make_corpus(rng, k=3, size=30, d_emb=5, groups_per_class=5)
    protocol = protocol_from_labels(corpus.group_labels(), far_levels=(0.5, 0.1))
    feats = {
        gid: corpus.embeddings[rows].mean(axis=0)
        for gid, rows in corpus.groups()
    }
    report = evaluate_groups(feats, protocol)
    assert set(report.operating_points) == {0.5, 0.1}
    assert 0.0 <= report.best_accuracy <= 1.0
    assert report.cmc is not None and report.mean_ap is not None
    assert np.all(np.diff(report.cmc) >= 0)
    assert report.tar_at_far[0.5] >= report.tar_at_far[0.1] - 1e-12
    assert report.roc[0].tolist() == [0.0, 0.0]


def test_compare_strategies_rows(rng):
    corpus = make_corpus(rng, k=3, size=30, d_emb=5, groups_per_class=5)
    model = DiscriminabilityRegressor(epochs=2, seed=0).fit(
        corpus.raw_inputs, np.full(corpus.size, 0.5)
    )
    protocol = protocol_from_labels(corpus.group_labels(), far_levels=(0.5,))
    policies = [AggregationPolicy(strategy=s)
                for s in ("average", "top1", "ddl")]
    comparisons = compare_strategies(corpus, model, policies, protocol)
    rows = comparison_rows(comparisons)
    assert [r["strategy"] for r in rows] == ["average", "top1", "ddl"]
    for row in rows:
        assert row["used"] <= row["total"] == corpus.size or \
            row["strategy"] == "top1"
        assert "tar_at_far_0.5" in row
        assert "rank1" in row and "map" in row
    table = format_comparison(comparisons)
    assert len(table.splitlines()) == 4
    assert table.splitlines()[0].startswith("strategy")
