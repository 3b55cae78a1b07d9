"""Permutation importance on concept rows and, through a generator, on images.

Performance is higher-is-better (AUROC by default), so an importance is a
drop: reference minus permuted performance.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .concepts import as_concept_matrix, permute_column
from .generators import GeneratorSpec, generate_dataset
from .metrics import ConfidenceInterval, MetricValue, auroc, bootstrap_ci
from .models import ConceptClassifier, TargetTask, target_scores
from .rng import derive_key, stream

Metric = Callable[[np.ndarray, np.ndarray], MetricValue]
Permuter = Callable[[np.ndarray, int, np.random.Generator], np.ndarray]


class DepictError(RuntimeError):
    pass


def resolve_workers(requested: int | None = None) -> int:
    """Worker count, capped by the ``DEPICT_LAB_THREADS`` environment variable."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get("DEPICT_LAB_THREADS")
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


@dataclass(frozen=True)
class Thresholds:
    effective_generation: float = 0.05
    diagonal_min_drop: float = 0.25
    off_diagonal_max: float = 0.05

    def __post_init__(self):
        for name in ("effective_generation", "diagonal_min_drop", "off_diagonal_max"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"threshold {name} must lie in [0, 1]")


@dataclass(frozen=True)
class ExperimentConfig:
    P: int = 100
    N: int = 1000
    seed: int = 0
    generator: GeneratorSpec = field(default_factory=GeneratorSpec)
    thresholds: Thresholds = field(default_factory=Thresholds)
    bootstrap_B: int = 1000
    level: float = 0.95
    workers: int | None = None

    def __post_init__(self):
        if self.P < 1:
            raise ValueError("P must be at least 1")
        if self.N < 10:
            raise ValueError("N must be at least 10")


@dataclass
class ImportanceDistribution:
    concept: int
    drops: np.ndarray  # NaN marks a skipped repetition
    ci: ConfidenceInterval | None

    @property
    def valid(self) -> np.ndarray:
        return self.drops[~np.isnan(self.drops)]

    @property
    def mean(self) -> float:
        v = self.valid
        return float(v.mean()) if len(v) else math.nan

    @property
    def skipped(self) -> int:
        return int(np.isnan(self.drops).sum())

    def to_json(self) -> dict:
        return {
            "concept": self.concept,
            "mean": None if math.isnan(self.mean) else self.mean,
            "ci": self.ci.to_json() if self.ci else None,
            "skipped": self.skipped,
            "drops": [None if math.isnan(v) else float(v) for v in self.drops],
        }


@dataclass
class ImportanceReport:
    reference_generated: float
    distributions: list[ImportanceDistribution]
    reference_real: float | None = None
    ranking: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.ranking:
            self.ranking = rank_concepts(self)

    @property
    def means(self) -> np.ndarray:
        return np.array([dist.mean for dist in self.distributions])

    def to_json(self) -> dict:
        return {
            "reference_real": self.reference_real,
            "reference_generated": self.reference_generated,
            "ranking": list(self.ranking),
            "concepts": [dist.to_json() for dist in self.distributions],
        }


def rank_concepts(report: ImportanceReport | Sequence[float]) -> list[int]:
    """Concept indices by descending mean drop; ties and NaNs keep index order, NaNs last."""
    means = report.means if isinstance(report, ImportanceReport) else np.asarray(report, dtype=float)
    key = np.where(np.isnan(means), -np.inf, means)
    return [int(i) for i in np.argsort(-key, kind="stable")]


def _auroc_metric(scores, labels) -> MetricValue:
    return auroc(scores, labels)


def _summarize(j: int, drops: np.ndarray, B: int, level: float, rng: np.random.Generator) -> ImportanceDistribution:
    valid = drops[~np.isnan(drops)]
    ci = bootstrap_ci(valid, level, B, rng) if len(valid) else None
    return ImportanceDistribution(j, drops, ci)


def _parallel_map(fn, items: list, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def reference_performance(f: TargetTask, images, labels, metric: Metric = _auroc_metric) -> MetricValue:
    if len(images) == 0:
        raise ValueError("reference performance needs at least one image")
    return metric(target_scores(f, np.asarray(images)), np.asarray(labels))


def tabular_permutation_importance(predictor: Callable[[np.ndarray], np.ndarray], m, labels, j: int, P: int,
                                   rng: np.random.Generator, metric: Metric = _auroc_metric,
                                   B: int = 1000, level: float = 0.95) -> ImportanceDistribution:
    """Permutation importance of column ``j`` for a model over concept rows."""
    if P < 1:
        raise ValueError("P must be at least 1")
    m = np.asarray(m)
    labels = np.asarray(labels)
    reference = metric(predictor(m), labels).value
    drops = np.empty(P)
    for p in range(P):
        drops[p] = reference - metric(predictor(permute_column(m, j, rng)), labels).value
    return _summarize(j, drops, B, level, rng)


def depict_run(f: TargetTask, cfg: ExperimentConfig, m, labels, concepts: Sequence[int] | None = None,
               permuter: Permuter = permute_column, metric: Metric = _auroc_metric) -> ImportanceReport:
    """Permute each concept in text space, regenerate, and record the performance drop.

    Repetition ``(j, p)`` draws its permutation from ``stream(seed, "permute", j, p)``
    and its images from ``derive_key(seed, "generate", j, p)``, so the report
    is identical for any worker count.
    """
    m = as_concept_matrix(m, cfg.generator.space)
    labels = np.asarray(labels)
    d = m.shape[1]
    concepts = list(range(d)) if concepts is None else list(concepts)
    reference_images = generate_dataset(cfg.generator, m, derive_key(cfg.seed, "generate", "reference"))
    a_ref = metric(target_scores(f, reference_images), labels).value
    del reference_images

    def cell(jp: tuple[int, int]) -> float:
        j, p = jp
        try:
            permuted = permuter(m, j, stream(cfg.seed, "permute", j, p))
            images = generate_dataset(cfg.generator, permuted, derive_key(cfg.seed, "generate", j, p))
            scores = target_scores(f, images)
        except Exception as exc:
            raise DepictError(f"concept {j}, repetition {p}: {exc}") from exc
        try:
            return a_ref - metric(scores, labels).value
        except ValueError:
            return math.nan

    cells = [(j, p) for j in concepts for p in range(cfg.P)]
    drops = np.array(_parallel_map(cell, cells, resolve_workers(cfg.workers)), dtype=float).reshape(len(concepts), cfg.P)
    dists = [_summarize(j, drops[i], cfg.bootstrap_B, cfg.level, stream(cfg.seed, "bootstrap", j))
             for i, j in enumerate(concepts)]
    return ImportanceReport(a_ref, dists)


def bottleneck_oracle(f: TargetTask, concept_preds, labels, P: int, seed: int, B: int = 1000,
                      level: float = 0.95, metric: Metric = _auroc_metric) -> ImportanceReport:
    """Permute predicted concepts directly at the bottleneck and rescore ``w . c``.

    Uses the same permutation streams as :func:`depict_run` under the same seed.
    """
    preds = np.asarray(concept_preds, dtype=float)
    labels = np.asarray(labels)
    a_ref = metric(preds @ f.w, labels).value
    dists = []
    for j in range(preds.shape[1]):
        drops = np.empty(P)
        for p in range(P):
            permuted = permute_column(preds, j, stream(seed, "permute", j, p))
            try:
                drops[p] = a_ref - metric(permuted @ f.w, labels).value
            except ValueError:
                drops[p] = math.nan
        dists.append(_summarize(j, drops, B, level, stream(seed, "bootstrap", j)))
    return ImportanceReport(a_ref, dists)


# ------------------------------------------------------------ assumption checks

@dataclass
class EffectiveGeneration:
    target_real: float
    target_generated: float
    concept_real: list[float | None]
    concept_generated: list[float | None]
    threshold: float

    @property
    def target_diff(self) -> float:
        return self.target_real - self.target_generated

    @property
    def concept_diff(self) -> list[float | None]:
        return [None if r is None or g is None else r - g
                for r, g in zip(self.concept_real, self.concept_generated)]

    @property
    def target_flag(self) -> bool:
        return self.target_diff > self.threshold

    @property
    def concept_flags(self) -> list[bool]:
        return [d is not None and d > self.threshold for d in self.concept_diff]

    def to_json(self) -> dict:
        return {
            "target_real": self.target_real,
            "target_generated": self.target_generated,
            "target_diff": self.target_diff,
            "target_flag": self.target_flag,
            "concept_real": self.concept_real,
            "concept_generated": self.concept_generated,
            "concept_diff": self.concept_diff,
            "concept_flags": self.concept_flags,
            "threshold": self.threshold,
        }


def _concept_aurocs(probs: np.ndarray, truth: np.ndarray) -> list[float | None]:
    out: list[float | None] = []
    for k in range(truth.shape[1]):
        try:
            out.append(auroc(probs[:, k], truth[:, k]).value)
        except ValueError:
            out.append(None)
    return out


def effective_generation_check(f: TargetTask, h: ConceptClassifier, real_images, generated_images, labels,
                               true_concepts, thresholds: Thresholds = Thresholds()) -> EffectiveGeneration:
    """Target AUROC and per-concept classifier AUROC on real versus generated images."""
    real_images = np.asarray(real_images)
    generated_images = np.asarray(generated_images)
    truth = np.asarray(true_concepts)
    if not len(real_images) == len(generated_images) == len(labels) == len(truth):
        raise ValueError("real images, generated images, labels and concepts must align")
    return EffectiveGeneration(
        reference_performance(f, real_images, labels).value,
        reference_performance(f, generated_images, labels).value,
        _concept_aurocs(h.predict_batch(real_images), truth),
        _concept_aurocs(h.predict_batch(generated_images), truth),
        thresholds.effective_generation,
    )


def independent_permutation_check(h: ConceptClassifier, cfg: ExperimentConfig, m, j: int,
                                  rng: np.random.Generator | None = None, repeats: int = 1) -> np.ndarray:
    """Change in concept-classifier AUROC (before minus after permuting ``j``), per concept.

    Both image sets are scored against the unpermuted concepts; NaN marks a
    concept with a single class.
    """
    m = as_concept_matrix(m, cfg.generator.space)
    if not 0 <= j < m.shape[1]:
        raise IndexError(f"concept index {j} out of range")
    before_images = generate_dataset(cfg.generator, m, derive_key(cfg.seed, "generate", "reference"))
    before = _concept_aurocs(h.predict_batch(before_images), m)
    changes = np.zeros((repeats, m.shape[1]))
    for r in range(repeats):
        perm_rng = rng if rng is not None else stream(cfg.seed, "independence", j, r)
        permuted = permute_column(m, j, perm_rng)
        after_images = generate_dataset(cfg.generator, permuted, derive_key(cfg.seed, "independence-gen", j, r))
        after = _concept_aurocs(h.predict_batch(after_images), m)
        changes[r] = [math.nan if b is None or a is None else b - a for b, a in zip(before, after)]
    return changes.mean(axis=0)


@dataclass
class IndependentPermutation:
    matrix: np.ndarray  # row = permuted concept
    thresholds: Thresholds

    @property
    def flags(self) -> np.ndarray:
        d = self.matrix.shape[0]
        diag = np.eye(d, dtype=bool)
        # NaN (skipped) entries compare false and stay unflagged
        low_diag = diag & (self.matrix < self.thresholds.diagonal_min_drop)
        off = ~diag & (np.abs(self.matrix) > self.thresholds.off_diagonal_max)
        return low_diag | off

    def to_json(self) -> dict:
        return {
            "matrix": [[None if math.isnan(v) else float(v) for v in row] for row in self.matrix],
            "flags": self.flags.tolist(),
        }


def independent_permutation_matrix(h: ConceptClassifier, cfg: ExperimentConfig, m, repeats: int = 1) -> IndependentPermutation:
    rows = [independent_permutation_check(h, cfg, m, j, repeats=repeats) for j in range(np.asarray(m).shape[1])]
    return IndependentPermutation(np.vstack(rows), cfg.thresholds)


@dataclass
class ValidationReport:
    effective_generation: EffectiveGeneration
    independent_permutation: IndependentPermutation

    def to_json(self) -> dict:
        return {
            "effective_generation": self.effective_generation.to_json(),
            "independent_permutation": self.independent_permutation.to_json(),
        }
