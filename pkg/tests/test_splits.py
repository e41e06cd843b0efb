import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from scipy import stats

from dmrf.errors import ConfigError
from dmrf.splits import (Criterion, SplitPoint, SplitStrategyConfig, best_split, brf_split,
                         candidate_thresholds, choose_split, denil14_split, dmrf_split, gini,
                         gini_reduction, mrf_split, mse, mse_reduction, normalize, reduction_table,
                         node_subspace, sample_categorical, softmax_temp, subspace_size)


# -- independent oracle: pure Python enumeration of every (feature, threshold) ---------

def oracle_reduction(X, y, idx, f, v, n_classes, weighted=False):
    rows = list(idx)
    left = [i for i in rows if X[i][f] <= v]
    right = [i for i in rows if X[i][f] > v]
    if n_classes:
        def g(members):
            counts = [sum(1 for i in members if y[i] == k) for k in range(n_classes)]
            return 1.0 - sum((c / len(members)) ** 2 for c in counts)
        n = len(rows)
        return g(rows) - len(left) / n * g(left) - len(right) / n * g(right)

    def m(members):
        mu = sum(y[i] for i in members) / len(members)
        return sum((y[i] - mu) ** 2 for i in members) / len(members)
    if weighted:
        n = len(rows)
        return m(rows) - len(left) / n * m(left) - len(right) / n * m(right)
    return m(rows) - m(left) - m(right)


def oracle_best(X, y, idx, features, n_classes, min_leaf=1):
    best, best_key = None, None
    for f in sorted(features):
        values = sorted({X[i][f] for i in idx})
        for v in values[:-1]:
            n_left = sum(1 for i in idx if X[i][f] <= v)
            if n_left < min_leaf or len(idx) - n_left < min_leaf:
                continue
            r = oracle_reduction(X, y, idx, f, v, n_classes)
            if best is None or r > best + 1e-9:
                best, best_key = r, (f, v)
    return best_key, best


def random_node(rng, classification=True):
    n = int(rng.integers(2, 21))
    d = int(rng.integers(1, 4))
    X = rng.integers(0, 5, size=(n + 5, d)).astype(float)
    if classification:
        c = int(rng.integers(2, 4))
        y = rng.integers(0, c, size=n + 5)
    else:
        c = 0
        y = np.round(rng.normal(size=n + 5), 1)
    idx = np.sort(rng.choice(n + 5, n, replace=False))
    return X, y, idx, c


class TestImpurity:
    def test_gini_values(self):
        assert gini([2, 2]) == 0.5
        assert gini([5, 0]) == 0.0
        assert gini([1, 1, 1]) == pytest.approx(2 / 3)

    def test_mse_frozen(self):
        # {0, 0, 10}: mean 10/3, squared deviations 100/9 + 100/9 + 400/9, divided by 3
        assert mse([0, 0, 10]) == pytest.approx(200 / 9, rel=1e-15)

    def test_unweighted_mse_reduction_can_be_negative(self):
        # 200/9 - 0 - 25
        assert mse_reduction([0, 0, 10], [0], [0, 10]) == pytest.approx(-25 / 9, rel=1e-14)
        # weighted: 200/9 - 1/3 * 0 - 2/3 * 25
        assert mse_reduction([0, 0, 10], [0], [0, 10], weighted=True) == pytest.approx(50 / 9, rel=1e-14)

    def test_reduction_input_checks(self):
        with pytest.raises(ValueError):
            gini_reduction([2, 2], [2, 2], [0, 0])
        with pytest.raises(ValueError):
            gini_reduction([2, 2], [1, 0], [0, 1])
        with pytest.raises(ValueError):
            mse_reduction([1, 2], [], [1, 2])

    @given(st.lists(st.integers(0, 30), min_size=2, max_size=5), st.data())
    def test_gini_reduction_nonnegative(self, parent, data):
        parent = np.array(parent)
        if parent.sum() < 2:
            return
        left = np.array([data.draw(st.integers(0, int(c))) for c in parent])
        right = parent - left
        if left.sum() == 0 or right.sum() == 0:
            return
        assert gini_reduction(parent, left, right) >= -1e-12
        assert 0.0 <= gini(parent) <= 1 - 1 / parent.size + 1e-12

    def test_candidate_thresholds(self):
        assert candidate_thresholds([3, 1, 2, 3, 1]).tolist() == [1, 2]
        assert candidate_thresholds([4, 4]).size == 0


class TestSoftmax:
    def test_frozen_value(self):
        # 1 / (1 + e^-5) computed independently
        p = softmax_temp([1.0, 0.0], 5.0)
        np.testing.assert_allclose(p, [0.9933071490757153, 0.0066928509242848554], rtol=1e-14)

    def test_zero_temperature_uniform(self):
        np.testing.assert_allclose(softmax_temp([0.3, 0.9, 0.1], 0.0), [1 / 3] * 3)

    def test_large_inputs_stable(self):
        p = softmax_temp([1000.0, 999.0], 1.0)
        assert np.all(np.isfinite(p)) and p[0] > p[1]

    @pytest.mark.parametrize("b", [-1.0, math.inf, math.nan])
    def test_invalid_temperature(self, b):
        with pytest.raises(ValueError):
            softmax_temp([0.0, 1.0], b)

    @given(hnp.arrays(np.float64, st.integers(1, 12), elements=st.floats(0, 1)), st.floats(0, 50))
    def test_sums_to_one_and_lower_bound(self, v, b):
        p = softmax_temp(v, b)
        assert abs(p.sum() - 1.0) <= 1e-12
        assert np.all(p > 0)
        bound = 1.0 / (1.0 + (v.size - 1) * math.exp(b))
        assert np.all(p >= bound * (1 - 1e-12))


class TestNormalize:
    @given(hnp.arrays(np.float64, st.integers(1, 20), elements=st.floats(-1e6, 1e6)))
    def test_range(self, v):
        out = normalize(v)
        assert np.all((out >= 0) & (out <= 1))

    @given(hnp.arrays(np.float64, st.integers(2, 20), elements=st.floats(-100, 100)),
           st.floats(0.01, 100), st.floats(-100, 100))
    def test_affine_invariance(self, v, a, b):
        if v.max() - v.min() < 1e-6:
            return
        np.testing.assert_allclose(normalize(a * v + b), normalize(v), atol=1e-6)

    def test_constant_maps_to_zero(self):
        assert normalize([2.0, 2.0, 2.0]).tolist() == [0.0, 0.0, 0.0]

    def test_extremes(self):
        assert normalize([3.0, 1.0, 2.0]).tolist() == [1.0, 0.0, 0.5]


class TestSampleCategorical:
    def test_degenerate(self):
        rng = np.random.default_rng(0)
        assert all(sample_categorical([1.0, 0.0, 0.0], rng) == 0 for _ in range(200))

    def test_half_half(self):
        rng = np.random.default_rng(1)
        draws = np.array([sample_categorical([0.5, 0.5], rng) for _ in range(100_000)])
        assert abs(np.mean(draws == 0) - 0.5) <= 0.01

    def test_softmax_example_frequency(self):
        rng = np.random.default_rng(2)
        draws = np.array([sample_categorical([0.993307, 0.006693], rng) for _ in range(100_000)])
        assert abs(np.mean(draws == 1) - 0.0067) <= 0.002

    @pytest.mark.parametrize("probs", [[0.5, 0.4], [-0.1, 1.1], [], [math.nan, 1.0]])
    def test_malformed(self, probs):
        with pytest.raises(ValueError):
            sample_categorical(probs, np.random.default_rng(0))


class TestSubspace:
    @pytest.mark.parametrize("d,size", [(1, 1), (3, 1), (4, 2), (9, 3), (20, 4), (99, 9)])
    def test_size(self, d, size):
        assert subspace_size(d) == size

    def test_uniform_without_replacement(self):
        rng = np.random.default_rng(5)
        X = rng.random((10, 6))
        counts = np.zeros(6)
        for _ in range(6000):
            s = node_subspace(X, np.arange(10), 2, rng)
            assert len(set(s.tolist())) == 2
            counts[s] += 1
        assert stats.chisquare(counts).pvalue > 0.01

    def test_constant_features_skipped(self):
        rng = np.random.default_rng(6)
        X = np.column_stack([np.ones(8), np.arange(8.0), np.zeros(8), np.arange(8.0) % 2])
        idx = np.arange(8)
        for _ in range(200):
            assert node_subspace(X, idx, 2, rng).tolist() == [1, 3]
        assert node_subspace(X, idx, 1, rng).tolist() in ([1], [3])
        # constancy is judged on the node, not the whole matrix
        assert node_subspace(X, np.array([0, 2]), 4, rng).tolist() == [1]
        assert node_subspace(X, np.array([3]), 4, rng).size == 0


class TestKernelsAgainstOracle:
    @pytest.mark.parametrize("classification", [True, False])
    @pytest.mark.parametrize("min_leaf", [1, 3])
    def test_reduction_table(self, classification, min_leaf):
        rng = np.random.default_rng(10 + min_leaf)
        for _ in range(50):
            X, y, idx, c = random_node(rng, classification)
            crit = Criterion(c, min_leaf)
            table = reduction_table(X, y, idx, range(X.shape[1]), crit)
            for j, f in enumerate(table.features):
                values = np.unique(X[idx, f])[:-1]
                expected = [v for v in values
                            if min(np.sum(X[idx, f] <= v), np.sum(X[idx, f] > v)) >= min_leaf]
                np.testing.assert_array_equal(table.thresholds[j], expected)
                for v, r in zip(table.thresholds[j], table.reductions[j]):
                    assert r == pytest.approx(oracle_reduction(X, y, idx, f, v, c), abs=1e-9)

    def test_weighted_mse_matches_oracle(self):
        rng = np.random.default_rng(3)
        X, y, idx, _ = random_node(rng, classification=False)
        while np.unique(X[idx, 0]).size < 2:
            X, y, idx, _ = random_node(rng, classification=False)
        table = reduction_table(X, y, idx, [0], Criterion(0, 1, weighted_mse=True))
        for v, r in zip(table.thresholds[0], table.reductions[0]):
            assert r == pytest.approx(oracle_reduction(X, y, idx, 0, v, 0, weighted=True), abs=1e-9)


class TestBestSplit:
    def test_separable_one_dimensional(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([0, 0, 1, 1])
        assert best_split(X, y, np.arange(4), [0], Criterion(2)) == SplitPoint(0, 1.0)

    def test_constant_features_give_none(self):
        X = np.ones((5, 2))
        assert best_split(X, np.array([0, 1, 0, 1, 0]), np.arange(5), [0, 1], Criterion(2)) is None

    def test_picks_pure_separating_feature(self):
        X = np.array([[0, 3], [1, 1], [2, 2], [3, 0]], dtype=float)
        y = np.array([0, 1, 0, 1])
        assert best_split(X, y, np.arange(4), [0, 1], Criterion(2)) == SplitPoint(1, 1.0)

    def test_ties_go_to_lowest_feature_then_threshold(self):
        X = np.array([[0, 0], [1, 1], [2, 2], [3, 3]], dtype=float)
        y = np.array([0, 1, 1, 0])
        # thresholds 0 and 2 tie on both features
        assert best_split(X, y, np.arange(4), [1, 0], Criterion(2)) == SplitPoint(0, 0.0)

    @pytest.mark.parametrize("classification", [True, False])
    def test_matches_oracle(self, classification):
        rng = np.random.default_rng(42 if classification else 43)
        for _ in range(200):
            X, y, idx, c = random_node(rng, classification)
            features = list(range(X.shape[1]))
            got = best_split(X, y, idx, features, Criterion(c))
            key, _ = oracle_best(X.tolist(), y.tolist(), idx.tolist(), features, c)
            if key is None:
                assert got is None
            else:
                assert (got.feature, got.threshold) == key


class TestDmrfSplit:
    def test_p_one_equals_best(self):
        rng = np.random.default_rng(7)
        cfg = SplitStrategyConfig("dmrf", p=1.0)
        for _ in range(100):
            X, y, idx, c = random_node(rng)
            features = list(range(X.shape[1]))
            assert dmrf_split(X, y, idx, features, cfg, Criterion(c), rng) == \
                best_split(X, y, idx, features, Criterion(c))

    def test_high_temperature_concentrates(self):
        rng = np.random.default_rng(8)
        X = rng.random((40, 3))
        y = (X[:, 1] > 0.4).astype(np.int64)
        idx = np.arange(40)
        best = best_split(X, y, idx, [0, 1, 2], Criterion(2))
        cfg = SplitStrategyConfig("dmrf", p=0.0, b1=100.0, b2=100.0)
        hits = sum(dmrf_split(X, y, idx, [0, 1, 2], cfg, Criterion(2), rng) == best for _ in range(1000))
        assert hits >= 990

    def test_zero_temperature_uniform_features(self):
        rng = np.random.default_rng(9)
        X = rng.random((30, 3))
        y = rng.integers(0, 2, 30)
        cfg = SplitStrategyConfig("dmrf", p=0.0, b1=0.0, b2=0.0)
        counts = np.zeros(3)
        for _ in range(3000):
            counts[dmrf_split(X, y, np.arange(30), [0, 1, 2], cfg, Criterion(2), rng).feature] += 1
        assert stats.chisquare(counts).pvalue > 0.01

    def test_unsplittable_features_excluded(self):
        rng = np.random.default_rng(0)
        X = np.column_stack([np.ones(10), np.arange(10.0)])
        y = np.array([0, 1] * 5)
        cfg = SplitStrategyConfig("dmrf", p=0.0, b1=0.0, b2=0.0)
        assert all(dmrf_split(X, y, np.arange(10), [0, 1], cfg, Criterion(2), rng).feature == 1
                   for _ in range(50))


class TestOtherStrategies:
    def test_mrf_high_temperature_is_argmax(self):
        rng = np.random.default_rng(11)
        X = rng.random((40, 4))
        y = (X[:, 2] > 0.6).astype(np.int64)
        best = best_split(X, y, np.arange(40), range(4), Criterion(2))
        cfg = SplitStrategyConfig("mrf", b1=100.0, b2=100.0)
        hits = sum(mrf_split(X, y, np.arange(40), cfg, Criterion(2), rng) == best for _ in range(300))
        assert hits >= 295

    def test_mrf_single_feature(self):
        rng = np.random.default_rng(0)
        X = np.arange(10.0).reshape(-1, 1)
        y = np.array([0] * 5 + [1] * 5)
        cfg = SplitStrategyConfig("mrf")
        seen = {mrf_split(X, y, np.arange(10), cfg, Criterion(2), rng).threshold for _ in range(400)}
        assert 4.0 in seen and len(seen) > 1

    def test_brf_gates_off_equals_best_over_subspace(self):
        cfg = SplitStrategyConfig("brf", p1=0.0, p2=0.0)
        data_rng = np.random.default_rng(12)
        X = data_rng.random((30, 9))
        y = data_rng.integers(0, 2, 30)
        for seed in range(30):
            got = brf_split(X, y, np.arange(30), cfg, Criterion(2), np.random.default_rng(seed))
            rng = np.random.default_rng(seed)
            rng.random()
            features = node_subspace(X, np.arange(30), 3, rng)
            assert got == best_split(X, y, np.arange(30), features, Criterion(2))

    def test_brf_gates_on_random_feature_and_threshold(self):
        rng = np.random.default_rng(13)
        X = rng.random((30, 3))
        y = (X[:, 0] > 0.5).astype(np.int64)
        cfg = SplitStrategyConfig("brf", p1=1.0, p2=1.0)
        splits = [brf_split(X, y, np.arange(30), cfg, Criterion(2), rng) for _ in range(3000)]
        counts = np.bincount([s.feature for s in splits], minlength=3)
        assert stats.chisquare(counts).pvalue > 0.01
        assert len({s.threshold for s in splits if s.feature == 0}) > 20

    def test_denil14_large_m_equals_best_over_subspace(self):
        data_rng = np.random.default_rng(14)
        X = data_rng.random((25, 5))
        y = data_rng.integers(0, 3, 25)
        cfg = SplitStrategyConfig("denil14", poisson_mean=1.0, preselect=100)
        for seed in range(30):
            got = denil14_split(X, y, np.arange(25), cfg, Criterion(3), np.random.default_rng(seed))
            rng = np.random.default_rng(seed)
            size = min(1 + int(rng.poisson(1.0)), 5)
            features = node_subspace(X, np.arange(25), size, rng)
            assert got == best_split(X, y, np.arange(25), features, Criterion(3))

    def test_denil14_threshold_from_preselected_points(self):
        data_rng = np.random.default_rng(15)
        X = data_rng.random((60, 2))
        y = data_rng.integers(0, 2, 60)
        cfg = SplitStrategyConfig("denil14", poisson_mean=50.0, preselect=5)
        for seed in range(30):
            rng = np.random.default_rng(seed)
            split = denil14_split(X, y, np.arange(60), cfg, Criterion(2), rng)
            rng = np.random.default_rng(seed)
            rng.poisson(50.0)
            node_subspace(X, np.arange(60), 2, rng)
            chosen = rng.choice(np.arange(60), 5, replace=False)
            assert split.threshold in X[chosen, split.feature]

    @pytest.mark.parametrize("variant", ["dmrf", "best", "brf", "mrf", "denil14"])
    def test_none_iff_nothing_splittable(self, variant):
        rng = np.random.default_rng(16)
        X = np.ones((8, 4))
        y = np.array([0, 1] * 4)
        cfg = SplitStrategyConfig(variant)
        assert choose_split(X, y, np.arange(8), cfg, Criterion(2), rng) is None

    @pytest.mark.parametrize("variant", ["dmrf", "best", "brf", "mrf", "denil14"])
    @pytest.mark.parametrize("min_leaf", [1, 4])
    def test_returned_split_is_admissible(self, variant, min_leaf):
        rng = np.random.default_rng(17)
        X = rng.integers(0, 6, size=(30, 4)).astype(float)
        y = rng.normal(size=30)
        crit = Criterion(0, min_leaf)
        for _ in range(50):
            split = choose_split(X, y, np.arange(30), SplitStrategyConfig(variant), crit, rng)
            if split is None:
                continue
            n_left = int(np.sum(X[:, split.feature] <= split.threshold))
            assert min_leaf <= n_left <= 30 - min_leaf
            assert split.threshold in X[:, split.feature]


class TestStrategyConfig:
    @pytest.mark.parametrize("kwargs", [
        {"variant": "nope"}, {"p": 1.5}, {"p1": -0.1}, {"b1": -1.0}, {"b2": math.inf},
        {"poisson_mean": 0.0}, {"preselect": 0},
    ])
    def test_rejects(self, kwargs):
        with pytest.raises(ConfigError):
            SplitStrategyConfig(**kwargs)
