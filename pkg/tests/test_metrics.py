import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from depict_lab.metrics import (
    auroc,
    bootstrap_ci,
    importance_auroc_sweep,
    importance_prediction_auroc,
    pearson,
    standardized_coefficients,
    top_k,
    topk_agreement,
)


def brute_auroc(s, y):
    pos = [a for a, l in zip(s, y) if l]
    neg = [a for a, l in zip(s, y) if not l]
    total = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
    return total / (len(pos) * len(neg))


class TestAuroc:
    def test_reversed_ranking(self):
        assert auroc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]).value == 0.0

    def test_perfect_and_ties(self):
        assert auroc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]).value == 1.0
        assert auroc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]).value == 0.5

    def test_matches_pair_count(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(2, 40))
            s = rng.integers(0, 6, size=n).astype(float)
            y = rng.random(n) < 0.5
            y[0], y[1] = True, False
            assert abs(auroc(s, y).value - brute_auroc(s, y)) <= 1e-12

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.integers(-100, 100), min_size=4, max_size=30), st.randoms(use_true_random=False))
    def test_monotone_invariance_and_symmetry(self, scores, rnd):
        s = np.array(scores, dtype=float)
        y = np.array([rnd.random() < 0.5 for _ in s])
        y[0], y[1] = True, False
        a = auroc(s, y).value
        assert auroc(np.exp(s / 50.0) * 3 + 1, y).value == pytest.approx(a, abs=1e-12)
        assert a + auroc(-s, y).value == pytest.approx(1.0, abs=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError):
            auroc([1, 2], [1, 1])
        with pytest.raises(ValueError):
            auroc([1, 2, 3], [0, 1])


class TestPearson:
    def test_derived_value(self):
        assert pearson([1, 2, 3], [1, 3, 2]).value == pytest.approx(0.5)

    def test_bounds(self):
        assert pearson([1, 2, 3], [2, 4, 6]).value == pytest.approx(1.0)
        assert pearson([1, 2, 3], [3, 2, 1]).value == pytest.approx(-1.0)

    def test_constant_rejected(self):
        with pytest.raises(ValueError):
            pearson([1, 1, 1], [1, 2, 3])


class TestRanking:
    def test_topk(self):
        assert topk_agreement([5, 4, 3, 2, 1, 0], [0.9, 0.8, 0.7, 0, 0, 0], 3) == 1.0
        assert topk_agreement([5, 4, 3, 2, 1, 0], [0.9, 0, 0, 0.8, 0, 0], 2) == 0.5
        assert top_k([1, 3, 3, 0], 2).tolist() == [1, 2]

    def test_topk_bad_k(self):
        with pytest.raises(ValueError):
            topk_agreement([1, 2], [1, 2], 3)

    def test_standardized_coefficients(self):
        preds = np.array([[0, 0], [1, 0], [0, 1], [1, 1]])
        assert np.allclose(standardized_coefficients([0.2, 0.8], preds), [0.1, 0.4])

    def test_importance_auroc(self):
        assert importance_prediction_auroc([3, 2, 1], [0.5, 0.4, 0.0], 0.3).value == 1.0
        assert importance_prediction_auroc([3, 2, 1], [0.5, 0.4, 0.3], 0.6) is None
        sweep = importance_auroc_sweep([3, 2, 1], [0.5, 0.4, 0.0])
        assert [t for t, _ in sweep] == [0.0, 0.4]
        assert all(v == 1.0 for _, v in sweep)


class TestBootstrap:
    def test_contains_mean_and_determinism(self):
        x = np.random.default_rng(0).normal(size=100)
        ci = bootstrap_ci(x, 0.95, 1000, np.random.default_rng(1))
        assert ci.lo <= x.mean() <= ci.hi
        assert ci == bootstrap_ci(x, 0.95, 1000, np.random.default_rng(1))
        assert ci.replicates == 1000 and ci.level == 0.95

    def test_wider_at_higher_level(self):
        x = np.random.default_rng(0).normal(size=100)
        a = bootstrap_ci(x, 0.8, 2000, np.random.default_rng(1))
        b = bootstrap_ci(x, 0.99, 2000, np.random.default_rng(1))
        assert b.hi - b.lo > a.hi - a.lo

    def test_constant_sample(self):
        ci = bootstrap_ci(np.full(30, 0.25), 0.95, 500, np.random.default_rng(0))
        assert ci.lo == ci.hi == 0.25

    def test_coverage(self):
        rng = np.random.default_rng(3)
        hits = sum(bootstrap_ci(rng.normal(size=80), 0.9, 400, rng).contains(0.0) for _ in range(200))
        assert 0.82 <= hits / 200 <= 0.97

    def test_custom_statistic(self):
        x = np.column_stack([np.arange(50.0), np.arange(50.0) * 2])
        ci = bootstrap_ci(x, 0.95, 200, np.random.default_rng(0),
                          statistic=lambda r: pearson(r[:, 0], r[:, 1]).value)
        assert ci.lo == pytest.approx(1.0) and ci.hi == pytest.approx(1.0)

    def test_errors(self):
        with pytest.raises(ValueError):
            bootstrap_ci([], 0.95, 10)
        with pytest.raises(ValueError):
            bootstrap_ci([1.0], 1.5, 10)
