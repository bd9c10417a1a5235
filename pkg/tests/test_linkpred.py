import itertools
import math

import numpy as np
import pytest

from tawalk.ingest import Transaction, synth_temporal_graph
from tawalk.linkpred import (
    auc,
    average_precision,
    evaluate,
    hadamard_feature,
    make_split,
    precision_at_L,
    similarity_scores,
    split_hash,
    train_classifier,
)

from conftest import MONTH


def _pair_txs(pairs, start_ts=0):
    return [Transaction(u, v, 1.0 + i, start_ts + i) for i, (u, v) in enumerate(pairs)]


def _distinct_pairs(n):
    """n distinct linked pairs over a ring plus chords."""
    names = [f"m{i:02d}" for i in range(n + 1)]
    return [(names[i], names[i + 1]) for i in range(n)]


class TestMakeSplit:
    def test_hide_counts(self):
        txs = _pair_txs(_distinct_pairs(35))
        split = make_split(txs, hide_fraction=0.2, seed=0)
        assert len(split.test_pos) == 7
        assert len(split.test_neg) == 7
        assert len(split.train_pos) == 28
        assert len(split.train_neg) == 28

    def test_minimum_one_hidden(self):
        txs = _pair_txs(_distinct_pairs(4))
        split = make_split(txs, hide_fraction=0.2, seed=1)
        assert len(split.test_pos) == 1

    def test_deterministic(self):
        txs = _pair_txs(_distinct_pairs(20))
        a = make_split(txs, 0.2, seed=5)
        b = make_split(txs, 0.2, seed=5)
        assert a == b
        assert split_hash(a) == split_hash(b)

    def test_different_seeds_differ(self):
        txs = _pair_txs(_distinct_pairs(30))
        assert make_split(txs, 0.2, seed=0).test_pos != make_split(txs, 0.2, seed=3).test_pos

    def test_all_transactions_of_hidden_pair_removed(self):
        pairs = _distinct_pairs(10)
        txs = _pair_txs(pairs) + _pair_txs([(v, u) for u, v in pairs], start_ts=100)
        split = make_split(txs, 0.3, seed=2)
        hidden = set(split.test_pos)
        for t in split.train_txs:
            key = tuple(sorted((t.src, t.dst)))
            assert key not in hidden

    def test_negatives_never_linked_and_disjoint(self):
        txs = _pair_txs(_distinct_pairs(25))
        split = make_split(txs, 0.2, seed=7)
        linked = {tuple(sorted((t.src, t.dst))) for t in txs}
        negs = list(split.test_neg) + list(split.train_neg)
        assert len(set(negs)) == len(negs)
        for u, v in negs:
            assert u < v
            assert (u, v) not in linked

    def test_too_small_graph_rejected(self):
        txs = _pair_txs([("a", "b"), ("b", "c"), ("a", "c")])
        # 3 accounts, all pairs linked: no negatives available
        with pytest.raises(ValueError, match="too small"):
            make_split(txs, 0.4, seed=0)

    def test_bad_fraction_rejected(self):
        txs = _pair_txs(_distinct_pairs(5))
        with pytest.raises(ValueError):
            make_split(txs, 0.0, seed=0)
        with pytest.raises(ValueError):
            make_split(txs, 1.0, seed=0)


class TestHadamard:
    def test_elementwise_product(self):
        assert hadamard_feature(np.array([1.0, 2.0]), np.array([3.0, -1.0])).tolist() == [3.0, -2.0]

    def test_zero_absorbing(self):
        f = np.array([4.0, 5.0, 6.0])
        assert hadamard_feature(f, np.zeros(3)).tolist() == [0.0, 0.0, 0.0]

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            u, v = rng.normal(size=8), rng.normal(size=8)
            np.testing.assert_array_equal(hadamard_feature(u, v), hadamard_feature(v, u))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            hadamard_feature(np.ones(3), np.ones(4))


class TestClassifier:
    def test_separable_toy_set(self):
        rng = np.random.default_rng(1)
        X = np.vstack([rng.normal(-2.0, 0.3, size=(40, 2)), rng.normal(2.0, 0.3, size=(40, 2))])
        y = np.concatenate([np.zeros(40), np.ones(40)])
        model = train_classifier(X, y, l2_strength=1e-6)
        assert ((model.predict_proba(X) >= 0.5) == y).all()

    def test_uninformative_features_give_half(self):
        X = np.ones((30, 3))
        y = np.array([0, 1] * 15)
        model = train_classifier(X, y, l2_strength=1e-4)
        np.testing.assert_allclose(model.predict_proba(X), 0.5, atol=0.01)

    def test_loss_non_increasing(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(60, 5))
        y = (rng.random(60) < 0.5).astype(float)
        model = train_classifier(X, y, l2_strength=1e-3)
        diffs = np.diff(model.loss_history)
        assert (diffs <= 1e-12).all()

    def test_single_class_rejected(self):
        with pytest.raises(ValueError, match="both classes"):
            train_classifier(np.ones((5, 2)), np.ones(5))

    def test_scores_in_open_interval(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(50, 4))
        y = (X[:, 0] > 0).astype(float)
        p = train_classifier(X, y).predict_proba(X)
        assert ((p > 0) & (p < 1)).all()


class TestSimilarity:
    def test_worked_example(self):
        txs = _pair_txs([("1", "2"), ("1", "3"), ("2", "3"), ("3", "4")])
        pair = [("2", "4")]
        assert similarity_scores(txs, pair, "cn")[0] == 1.0
        assert similarity_scores(txs, pair, "ra")[0] == pytest.approx(1 / 3)
        assert similarity_scores(txs, pair, "aa")[0] == pytest.approx(1 / math.log(3))

    def test_no_common_neighbors(self):
        txs = _pair_txs([("a", "b"), ("c", "d")])
        for index in ("cn", "aa", "ra", "jaccard"):
            assert similarity_scores(txs, [("a", "c")], index)[0] == 0.0

    def test_jaccard_identical_neighborhoods(self):
        txs = _pair_txs([("u", "z1"), ("u", "z2"), ("w", "z1"), ("w", "z2")])
        assert similarity_scores(txs, [("u", "w")], "jaccard")[0] == 1.0

    def test_absent_account_scores_zero(self):
        txs = _pair_txs([("a", "b")])
        assert similarity_scores(txs, [("a", "ghost")], "cn")[0] == 0.0

    def test_matches_matrix_oracle_on_random_graphs(self):
        rng = np.random.default_rng(11)
        for _ in range(40):
            n = int(rng.integers(3, 30))
            names = [f"g{i:02d}" for i in range(n)]
            density = rng.uniform(0.05, 0.4)
            adj = np.triu(rng.random((n, n)) < density, k=1)
            adj = adj | adj.T
            txs = [
                Transaction(names[i], names[j], 1.0, 0)
                for i in range(n)
                for j in range(i + 1, n)
                if adj[i, j]
            ]
            if not txs:
                continue
            deg = adj.sum(axis=1)
            pairs = [(names[i], names[j]) for i in range(n) for j in range(i + 1, n)]
            a_float = adj.astype(float)
            cn_m = a_float @ a_float
            with np.errstate(divide="ignore"):
                inv_log = np.where(deg > 1, 1.0 / np.log(np.maximum(deg, 2)), 0.0)
                inv_deg = np.where(deg > 0, 1.0 / np.maximum(deg, 1), 0.0)
            aa_m = a_float @ np.diag(inv_log) @ a_float
            ra_m = a_float @ np.diag(inv_deg) @ a_float
            got = {
                idx: similarity_scores(txs, pairs, idx) for idx in ("cn", "aa", "ra", "jaccard")
            }
            for k, (i, j) in enumerate(
                (names.index(u), names.index(v)) for u, v in pairs
            ):
                assert got["cn"][k] == cn_m[i, j]
                assert got["aa"][k] == pytest.approx(aa_m[i, j], abs=1e-12)
                assert got["ra"][k] == pytest.approx(ra_m[i, j], abs=1e-12)
                union = deg[i] + deg[j] - cn_m[i, j]
                expected_j = cn_m[i, j] / union if union else 0.0
                assert got["jaccard"][k] == pytest.approx(expected_j, abs=1e-12)


class TestAuc:
    def test_worked_arithmetic(self):
        # 10 comparisons: 7 wins, 2 ties, 1 loss
        assert auc([5.0, 4.0], [1.0, 2.0, 3.0, 4.0, 5.0]) == pytest.approx(0.8)

    def test_constant_scores(self):
        assert auc([1.0] * 5, [1.0] * 7) == pytest.approx(0.5)

    def test_perfect_separation(self):
        assert auc([2.0, 3.0], [0.0, 1.0]) == 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            auc([], [1.0])

    def test_matches_rank_statistic(self):
        scipy_stats = pytest.importorskip("scipy.stats")
        rng = np.random.default_rng(4)
        for _ in range(25):
            pos = rng.integers(0, 12, size=int(rng.integers(2, 60))).astype(float)
            neg = rng.integers(0, 12, size=int(rng.integers(2, 60))).astype(float)
            u_stat = scipy_stats.mannwhitneyu(pos, neg, alternative="two-sided").statistic
            assert auc(pos, neg) == pytest.approx(u_stat / (pos.size * neg.size), abs=1e-12)

    def test_sampled_mode_close_to_exhaustive(self):
        rng = np.random.default_rng(5)
        pos = rng.normal(1.0, 1.0, size=300)
        neg = rng.normal(0.0, 1.0, size=300)
        exact = auc(pos, neg)
        sampled = auc(pos, neg, n_comparisons=200_000, seed=1)
        assert abs(exact - sampled) < 0.01

    def test_permuted_scores_are_chance(self):
        rng = np.random.default_rng(6)
        n = 4000
        scores = rng.normal(size=n)
        labels = np.array([1] * (n // 2) + [0] * (n // 2))
        perm = rng.permutation(n)
        scores, labels = scores[perm], labels[perm]
        value = auc(scores[labels == 1], scores[labels == 0], n_comparisons=10_000, seed=2)
        assert abs(value - 0.5) < 0.02


class TestPrecisionAtL:
    def test_seven_of_ten(self):
        truth = {(f"t{i}", f"u{i}") for i in range(7)}
        ranked = [((f"t{i}", f"u{i}"), 1.0 - 0.01 * i) for i in range(7)]
        ranked += [((f"f{i}", f"g{i}"), 0.5 - 0.01 * i) for i in range(13)]
        assert precision_at_L(ranked, truth, 10) == pytest.approx(0.7)

    def test_all_true(self):
        ranked = [((f"t{i}", f"u{i}"), float(10 - i)) for i in range(5)]
        assert precision_at_L(ranked, {p for p, _ in ranked}, 5) == 1.0

    def test_cutoff_equals_candidates(self):
        ranked = [(("a", "b"), 1.0), (("c", "d"), 0.5)]
        assert precision_at_L(ranked, {("a", "b")}, 2) == 0.5

    def test_l_too_large_rejected(self):
        with pytest.raises(ValueError, match="exceeds"):
            precision_at_L([(("a", "b"), 1.0)], set(), 2)

    def test_deterministic_tie_break(self):
        ranked = [(("b", "x"), 1.0), (("a", "x"), 1.0), (("c", "x"), 1.0)]
        assert precision_at_L(ranked, {("a", "x")}, 1) == 1.0  # pair order breaks the tie


class TestAveragePrecision:
    def test_worked_example(self):
        assert average_precision([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0]) == pytest.approx(
            (1.0 + 2 / 3) / 2
        )

    def test_perfect_ranking(self):
        assert average_precision([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0

    def test_all_positive(self):
        assert average_precision([0.5, 0.4, 0.3], [1, 1, 1]) == 1.0

    def test_no_positives_rejected(self):
        with pytest.raises(ValueError):
            average_precision([0.5], [0])

    def test_equals_one_iff_positives_on_top(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            n = int(rng.integers(3, 30))
            labels = (rng.random(n) < 0.4).astype(int)
            if labels.sum() == 0:
                labels[0] = 1
            scores = rng.random(n)
            ap = average_precision(scores, labels)
            pos_min = scores[labels == 1].min()
            neg_max = scores[labels == 0].max() if (labels == 0).any() else -np.inf
            assert (ap == 1.0) == bool(pos_min > neg_max)


class TestRankInvariance:
    def test_positive_rescaling_preserves_ranking_metrics(self):
        rng = np.random.default_rng(8)
        pos = rng.random(40)
        neg = rng.random(40)
        for scale in (2.0, 17.5, 0.001):
            assert auc(pos * scale, neg * scale) == pytest.approx(auc(pos, neg), abs=1e-12)
        ranked = [((f"p{i}", f"q{i}"), float(s)) for i, s in enumerate(np.concatenate([pos, neg]))]
        truth = {p for p, _ in ranked[:40]}
        base = precision_at_L(ranked, truth, 20)
        scaled = [(p, s * 3.5) for p, s in ranked]
        assert precision_at_L(scaled, truth, 20) == base


@pytest.fixture(scope="module")
def small_txs():
    return synth_temporal_graph(60, 3, 3, 500, 0.85, seed=4)


class TestEvaluate:

    def test_random_method_is_chance(self, small_txs):
        report = evaluate("random", small_txs, seeds=[0, 1, 2, 3, 4])
        assert abs(report.mean["auc"] - 0.5) < 0.05

    def test_similarity_method_report_shape(self, small_txs):
        report = evaluate("cn", small_txs, seeds=[0, 1], L=10)
        assert report.method == "cn"
        assert len(report.per_seed) == 2
        for row in report.per_seed:
            assert 0.0 <= row["auc"] <= 1.0
            assert 0.0 <= row["ap"] <= 1.0
            assert 0.0 <= row["precision_at_L"] <= 1.0
        for metric in ("auc", "ap", "precision_at_L"):
            assert report.std[metric] >= 0.0

    def test_embedding_method_beats_chance_on_community_graph(self, small_txs):
        from tawalk.embed import SgnsConfig
        from tawalk.walker import WalkConfig

        report = evaluate(
            "taw",
            small_txs,
            seeds=[0, 1],
            walk_cfg=WalkConfig(walks_per_node=6, walk_length=20),
            sgns_cfg=SgnsConfig(dim=32, epochs=3),
            epsilon=MONTH,
        )
        assert report.mean["auc"] > 0.6

    def test_split_never_leaks(self, small_txs):
        report = evaluate("jaccard", small_txs, seeds=list(range(4)))
        assert len({r["split_hash"] for r in report.per_seed}) == 4

    def test_unknown_method_rejected(self, small_txs):
        with pytest.raises(ValueError, match="method"):
            evaluate("gcn", small_txs, seeds=[0])

    def test_l_clamped_to_candidates(self, small_txs):
        report = evaluate("ra", small_txs, seeds=[0], L=10_000)
        row = report.per_seed[0]
        assert row["L"] == 2 * row["n_test_pos"]
