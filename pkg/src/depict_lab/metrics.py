"""AUROC, correlation, bootstrap intervals and ranking agreement."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class MetricValue:
    value: float
    n: int

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class ConfidenceInterval:
    lo: float
    hi: float
    level: float
    replicates: int

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def to_json(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "level": self.level, "replicates": self.replicates}


def auroc(scores, labels) -> MetricValue:
    """Mann-Whitney AUROC; tied positive/negative pairs count one half."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be equal-length vectors")
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs both classes present")
    ranks = rankdata(s)  # midranks handle ties
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return MetricValue(float(u / (n_pos * n_neg)), len(y))


def pearson(x, y) -> MetricValue:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("pearson needs two equal-length vectors of length >= 2")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = dx @ dx
    syy = dy @ dy
    if sxx == 0 or syy == 0:
        raise ValueError("pearson is undefined for a constant vector")
    r = (dx @ dy) / np.sqrt(sxx * syy)
    return MetricValue(float(np.clip(r, -1.0, 1.0)), len(x))


def bootstrap_ci(samples, level: float = 0.95, B: int = 1000, rng: np.random.Generator | None = None,
                 statistic: Callable[[np.ndarray], float] | None = None) -> ConfidenceInterval:
    """Percentile bootstrap; rows of ``samples`` are resampled with replacement.

    The statistic defaults to the mean.  Replicates on which ``statistic``
    raises ``ValueError`` are dropped.
    """
    data = np.asarray(samples, dtype=float)
    if len(data) == 0:
        raise ValueError("bootstrap needs at least one sample")
    if B < 1 or not 0 < level < 1:
        raise ValueError("need B >= 1 and level in (0, 1)")
    rng = rng if rng is not None else np.random.default_rng(0)
    idx = rng.integers(0, len(data), size=(B, len(data)))
    if statistic is None:
        stats = data[idx].mean(axis=1)
    else:
        vals = []
        for row in idx:
            try:
                vals.append(statistic(data[row]))
            except ValueError:
                continue
        if not vals:
            raise ValueError("statistic failed on every bootstrap replicate")
        stats = np.array(vals)
    alpha = 1.0 - level
    lo, hi = np.quantile(stats, [alpha / 2, 1 - alpha / 2])
    if statistic is None:
        # interpolation can stray by an ulp past the sample range
        lo = max(float(lo), float(data.min()))
        hi = min(float(hi), float(data.max()))
    return ConfidenceInterval(float(lo), float(hi), level, B)


def top_k(values, k: int) -> np.ndarray:
    """Indices of the ``k`` largest values; ties go to the lower index."""
    return np.argsort(-np.asarray(values, dtype=float), kind="stable")[:k]


def topk_agreement(a, b, k: int) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("importance vectors must have equal length")
    if not 1 <= k <= len(a):
        raise ValueError(f"k must lie in [1, {len(a)}], got {k}")
    return len(set(top_k(a, k).tolist()) & set(top_k(b, k).tolist())) / k


def standardized_coefficients(w, concept_preds) -> np.ndarray:
    """Weight times the population standard deviation of each concept column."""
    preds = np.asarray(concept_preds, dtype=float)
    if preds.ndim != 2 or len(preds) == 0:
        raise ValueError("concept predictions must be a non-empty matrix")
    return np.asarray(w, dtype=float) * preds.std(axis=0, ddof=0)


def importance_prediction_auroc(importance, oracle, threshold: float) -> MetricValue | None:
    """AUROC of ``importance`` against ``oracle > threshold``; None when one class is empty."""
    target = np.asarray(oracle, dtype=float) > threshold
    if target.all() or not target.any():
        return None
    return auroc(importance, target)


def importance_auroc_sweep(importance, oracle) -> list[tuple[float, float]]:
    """(threshold, AUROC) at every oracle value that leaves both classes non-empty."""
    out = []
    for thr in np.unique(np.asarray(oracle, dtype=float)):
        val = importance_prediction_auroc(importance, oracle, thr)
        if val is not None:
            out.append((float(thr), val.value))
    return out
