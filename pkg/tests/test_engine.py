import math

import numpy as np
import pytest

from depict_lab.engine import (
    DepictError,
    EffectiveGeneration,
    ExperimentConfig,
    ImportanceReport,
    IndependentPermutation,
    Thresholds,
    bottleneck_oracle,
    depict_run,
    effective_generation_check,
    independent_permutation_check,
    independent_permutation_matrix,
    rank_concepts,
    reference_performance,
    resolve_workers,
    tabular_permutation_importance,
)
from depict_lab.generators import GeneratorSpec, generate_dataset
from depict_lab.metrics import pearson
from depict_lab.models import ConceptClassifier, make_task

H = ConceptClassifier()


def _matrix(n, seed, p=0.5):
    return (np.random.default_rng(seed).random((n, 6)) < p).astype(np.uint8)


def _task(m, seed=0, weights=None):
    return make_task(np.random.default_rng(seed), H, m, weights)


class TestReference:
    def test_perfect(self, oracle, concept_matrix):
        t = _task(concept_matrix)
        assert reference_performance(t, generate_dataset(oracle, concept_matrix, 0), t.labels).value == 1.0

    def test_null(self, oracle):
        m = _matrix(5000, 1)
        t = _task(m)
        labels = np.random.default_rng(2).permutation(t.labels)
        a = reference_performance(t, generate_dataset(oracle, m, 0), labels).value
        assert abs(a - 0.5) <= 0.03

    def test_empty(self, concept_matrix):
        with pytest.raises(ValueError):
            reference_performance(_task(concept_matrix), np.zeros((0, 64, 64, 3), np.uint8), [])


class TestTabular:
    def test_ignored_column(self):
        m = _matrix(400, 0)
        w = np.array([0.0, 0.6, 0.2, 0.9, 0.4, 0.3])
        labels = (m @ w > np.median(m @ w)).astype(int)
        dist = tabular_permutation_importance(lambda x: x @ w, m, labels, 0, 30, np.random.default_rng(0))
        assert np.all(dist.drops == 0)
        assert dist.ci.contains(0.0)

    def test_four_row_enumeration(self):
        # Over all 24 orderings of [1,1,0,0] the AUROC against [1,1,0,0] is 1, 0.5 or 0
        # with weights 1/6, 4/6, 1/6, so the drop is 0, 0.5 or 1 with the same weights.
        m = np.array([[1], [1], [0], [0]])
        labels = np.array([1, 1, 0, 0])
        dist = tabular_permutation_importance(lambda x: x[:, 0].astype(float), m, labels, 0, 3000,
                                              np.random.default_rng(1))
        values, counts = np.unique(dist.drops, return_counts=True)
        assert values.tolist() == [0.0, 0.5, 1.0]
        assert np.allclose(counts / 3000, [1 / 6, 4 / 6, 1 / 6], atol=0.03)
        assert abs(dist.mean - 0.5) < 0.03

    def test_duplicated_columns(self):
        base = _matrix(500, 3)
        m = np.column_stack([base, base[:, 0]])
        w = np.array([1.0, 0.3, 0.2, 0.1, 0.4, 0.5, 0.0])
        labels = (m @ w > np.median(m @ w)).astype(int)
        rng = np.random.default_rng(2)
        used = tabular_permutation_importance(lambda x: x @ w, m, labels, 0, 50, rng)
        twin = tabular_permutation_importance(lambda x: x @ w, m, labels, 6, 50, rng)
        assert used.mean > 0.1
        assert twin.mean == 0.0

    def test_p_validation(self):
        with pytest.raises(ValueError):
            tabular_permutation_importance(lambda x: x[:, 0], np.eye(2), [0, 1], 0, 0, np.random.default_rng())


class TestDepictRun:
    def test_identity_permuter(self, concept_matrix):
        t = _task(concept_matrix)
        cfg = ExperimentConfig(P=3, N=300, seed=1, bootstrap_B=100)
        report = depict_run(t, cfg, concept_matrix, t.labels, permuter=lambda m, j, rng: m.copy())
        assert all((d.drops == 0).all() for d in report.distributions)

    def test_zero_weight_concept(self, concept_matrix):
        w = np.array([0.0, 0.7, 0.3, 0.9, 0.5, 0.2])
        t = _task(concept_matrix, weights=w)
        cfg = ExperimentConfig(P=20, N=300, seed=2, bootstrap_B=200)
        report = depict_run(t, cfg, concept_matrix, t.labels)
        assert report.distributions[0].ci.contains(0.0)
        assert report.ranking[-1] == 0

    def test_unit_weight_closed_form(self):
        m = _matrix(1000, 5, p=0.4)
        t = _task(m, weights=np.eye(6)[0])
        cfg = ExperimentConfig(P=50, N=1000, seed=3, bootstrap_B=200)
        report = depict_run(t, cfg, m, t.labels, concepts=[0, 1])
        assert report.reference_generated == 1.0
        assert abs(report.distributions[0].mean - 0.5) <= 0.05
        assert report.distributions[1].mean == 0.0

    def test_drop_bounds(self, concept_matrix):
        t = _task(concept_matrix)
        report = depict_run(t, ExperimentConfig(P=10, N=300, bootstrap_B=100), concept_matrix, t.labels)
        for dist in report.distributions:
            assert (dist.drops <= report.reference_generated).all()
            assert (dist.drops >= report.reference_generated - 1).all()

    def test_matches_bottleneck_oracle(self):
        m = _matrix(1000, 6)
        t = _task(m, seed=4)
        cfg = ExperimentConfig(P=50, N=1000, seed=9, bootstrap_B=200)
        a = depict_run(t, cfg, m, t.labels)
        b = bottleneck_oracle(t, m, t.labels, 50, 9, 200)
        assert pearson(a.means, b.means).value >= 0.99
        # shared permutation streams make the paired runs identical
        assert np.array_equal(a.means, b.means)

    def test_worker_count_does_not_matter(self, concept_matrix):
        t = _task(concept_matrix)
        one = depict_run(t, ExperimentConfig(P=8, N=300, seed=5, bootstrap_B=100, workers=1), concept_matrix, t.labels)
        many = depict_run(t, ExperimentConfig(P=8, N=300, seed=5, bootstrap_B=100, workers=8), concept_matrix, t.labels)
        assert one.to_json() == many.to_json()

    def test_generation_error_has_context(self, concept_matrix):
        t = _task(concept_matrix)

        def broken(m, j, rng):
            if j == 2:
                raise RuntimeError("boom")
            return m.copy()

        with pytest.raises(DepictError, match="concept 2, repetition 0"):
            depict_run(t, ExperimentConfig(P=2, N=300, bootstrap_B=10, workers=1), concept_matrix, t.labels,
                       permuter=broken)

    def test_single_class_repetition_is_skipped(self, concept_matrix):
        t = _task(concept_matrix)

        def metric(scores, labels):
            if np.ptp(scores) == 0:
                raise ValueError("degenerate")
            from depict_lab.metrics import auroc
            return auroc(scores, labels)

        def blank(m, j, rng):
            return np.zeros_like(m) if j == 0 else m.copy()

        report = depict_run(t, ExperimentConfig(P=2, N=300, bootstrap_B=10), concept_matrix, t.labels,
                            permuter=blank, metric=metric)
        assert report.distributions[0].skipped == 2
        assert report.distributions[0].ci is None
        assert report.to_json()["concepts"][0]["mean"] is None
        assert report.ranking[-1] == 0


class TestRanking:
    def test_rank(self):
        assert rank_concepts([0.1, 0.5, 0.3]) == [1, 2, 0]
        assert rank_concepts([0.2] * 4) == [0, 1, 2, 3]
        assert rank_concepts(np.array([0.1, 0.5, 0.3]) + 7) == [1, 2, 0]
        assert rank_concepts([math.nan, 0.1, 0.1]) == [1, 2, 0]


class TestEffectiveGeneration:
    def test_boundary_is_not_flagged(self):
        eg = EffectiveGeneration(0.75, 0.6875, [0.75], [0.6875], 0.0625)
        assert not eg.target_flag and eg.concept_flags == [False]
        eg = EffectiveGeneration(0.75, 0.6875, [0.75, None], [0.625, 0.5], 0.0625)
        assert eg.concept_flags == [True, False]

    def test_oracle_has_no_flags(self, oracle, concept_matrix):
        t = _task(concept_matrix)
        real = generate_dataset(oracle, concept_matrix, 0)
        gen = generate_dataset(oracle, concept_matrix, 1)
        eg = effective_generation_check(t, H, real, gen, t.labels, concept_matrix)
        assert eg.target_diff == 0 and eg.concept_diff == [0.0] * 6
        assert not eg.target_flag and not any(eg.concept_flags)

    def test_half_flip_is_flagged(self, oracle):
        m = _matrix(2000, 8)
        t = _task(m)
        spec = GeneratorSpec(kind="corrupted", flip_rate=(0, 0, 0, 0.5, 0, 0))
        eg = effective_generation_check(t, H, generate_dataset(oracle, m, 0), generate_dataset(spec, m, 1),
                                        t.labels, m)
        assert abs(eg.concept_generated[3] - 0.5) < 0.05
        assert eg.concept_flags == [False, False, False, True, False, False]

    def test_length_mismatch(self, oracle, concept_matrix):
        t = _task(concept_matrix)
        imgs = generate_dataset(oracle, concept_matrix, 0)
        with pytest.raises(ValueError):
            effective_generation_check(t, H, imgs, imgs[:10], t.labels, concept_matrix)


class TestIndependentPermutation:
    def test_oracle_structure(self):
        m = _matrix(1000, 10)
        result = independent_permutation_matrix(H, ExperimentConfig(N=1000, seed=1), m)
        diag = np.diag(result.matrix)
        off = result.matrix[~np.eye(6, dtype=bool)]
        assert (diag >= 0.4).all()
        assert (off == 0).all()
        assert not result.flags.any()

    def test_coupled_generator_is_flagged(self):
        # concepts 0 and 4 co-occur in the data; the generator draws 4 from 0's text,
        # so permuting 0 also scrambles concept 4 in the images
        m = _matrix(1000, 11)
        agree = np.random.default_rng(0).random(1000) < 0.9
        m[agree, 4] = m[agree, 0]
        spec = GeneratorSpec(kind="corrupted", couplings=((0, 4, 1.0),))
        cfg = ExperimentConfig(N=1000, seed=2, generator=spec)
        row = independent_permutation_check(H, cfg, m, 0)
        assert row[4] > 0.05
        result = IndependentPermutation(np.vstack([row] + [np.zeros(6)] * 5), Thresholds())
        assert result.flags[0, 4]
        # the faithful generator on the same data leaves concept 4 alone
        assert independent_permutation_check(H, ExperimentConfig(N=1000, seed=2), m, 0)[4] == 0

    def test_nan_entries_are_not_flagged(self):
        mat = np.full((2, 2), math.nan)
        assert not IndependentPermutation(mat, Thresholds()).flags.any()

    def test_bad_index(self, concept_matrix):
        with pytest.raises(IndexError):
            independent_permutation_check(H, ExperimentConfig(N=300), concept_matrix, 6)


def test_config_validation(monkeypatch):
    with pytest.raises(ValueError):
        ExperimentConfig(P=0)
    with pytest.raises(ValueError):
        Thresholds(effective_generation=2)
    monkeypatch.setenv("DEPICT_LAB_THREADS", "2")
    assert resolve_workers(16) == 2
