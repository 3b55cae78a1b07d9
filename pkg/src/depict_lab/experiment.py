"""End-to-end synthetic experiment: many random bottleneck tasks, each explained
by DEPICT, the bottleneck-permutation oracle, standardized coefficients and the
occlusion-IOU baseline, followed by pooled evaluation."""
from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .concepts import ConceptSpace, sample_concept_matrix
from .engine import (
    ExperimentConfig,
    Thresholds,
    ValidationReport,
    bottleneck_oracle,
    depict_run,
    effective_generation_check,
    independent_permutation_matrix,
    reference_performance,
)
from .generators import GeneratorSpec, generate_batch, generate_dataset
from .metrics import bootstrap_ci, importance_auroc_sweep, pearson, standardized_coefficients, topk_agreement
from .models import ConceptClassifier, make_task
from .render import CanvasSpec
from .rng import derive_key, stream
from .saliency import iou_ranking

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class RunConfig:
    seed: int
    tasks: int = 20
    N: int = 1000
    P: int = 100
    space: ConceptSpace = field(default_factory=ConceptSpace)
    canvas: CanvasSpec = field(default_factory=CanvasSpec)
    generator: GeneratorSpec | None = None
    concept_p: float = 0.5
    bootstrap_B: int = 1000
    level: float = 0.95
    thresholds: Thresholds = field(default_factory=Thresholds)
    bottleneck_noise: float = 0.0
    zero_weights: int = 0
    independence_repeats: int = 1
    baseline: bool = True
    baseline_n: int | None = None
    patch: int = 8
    stride: int = 4
    workers: int | None = None

    def __post_init__(self):
        if self.generator is None:
            object.__setattr__(self, "generator", GeneratorSpec(canvas=self.canvas, space=self.space))
        if self.generator.canvas != self.canvas or self.generator.space != self.space:
            raise ValueError("generator canvas/space must match the run's")
        if self.tasks < 1 or self.N < 10 or self.P < 1:
            raise ValueError("need tasks >= 1, N >= 10, P >= 1")
        if not 0 <= self.zero_weights < self.space.d:
            raise ValueError("zero_weights must leave at least one active concept")

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "tasks": self.tasks,
            "N": self.N,
            "P": self.P,
            "space": self.space.to_json(),
            "canvas": self.canvas.to_json(),
            "generator": self.generator.to_json(),
            "concept_p": self.concept_p,
            "bootstrap_B": self.bootstrap_B,
            "level": self.level,
            "thresholds": {
                "effective_generation": self.thresholds.effective_generation,
                "diagonal_min_drop": self.thresholds.diagonal_min_drop,
                "off_diagonal_max": self.thresholds.off_diagonal_max,
            },
            "bottleneck_noise": self.bottleneck_noise,
            "zero_weights": self.zero_weights,
            "independence_repeats": self.independence_repeats,
            "baseline": self.baseline,
            "baseline_n": self.baseline_n,
            "patch": self.patch,
            "stride": self.stride,
        }

    @classmethod
    def from_json(cls, data: dict, workers: int | None = None) -> "RunConfig":
        space = ConceptSpace.from_json(data["space"])
        canvas = CanvasSpec.from_json(data["canvas"])
        return cls(
            seed=data["seed"], tasks=data["tasks"], N=data["N"], P=data["P"], space=space, canvas=canvas,
            generator=GeneratorSpec.from_json(data["generator"]), concept_p=data["concept_p"],
            bootstrap_B=data["bootstrap_B"], level=data["level"], thresholds=Thresholds(**data["thresholds"]),
            bottleneck_noise=data["bottleneck_noise"], zero_weights=data["zero_weights"],
            independence_repeats=data["independence_repeats"], baseline=data["baseline"],
            baseline_n=data["baseline_n"], patch=data["patch"], stride=data["stride"], workers=workers,
        )

    def config_hash(self) -> str:
        """Hash of everything that affects results (worker count excluded)."""
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass
class ExperimentArtifacts:
    config: dict
    config_hash: str
    tasks: list[dict]
    pooled: dict

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "config_hash": self.config_hash,
            "tasks": self.tasks,
            "pooled": self.pooled,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ExperimentArtifacts":
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {data.get('schema_version')!r}")
        return cls(data["config"], data["config_hash"], data["tasks"], data["pooled"])

    def ok_tasks(self) -> list[dict]:
        return [t for t in self.tasks if t["status"] == "ok"]


def _finite(x: float) -> float | None:
    return None if x is None or not math.isfinite(x) else float(x)


def run_task(cfg: RunConfig, t: int, config_hash: str) -> dict:
    task_seed = derive_key(cfg.seed, "task", t)
    space, d = cfg.space, cfg.space.d
    m = sample_concept_matrix(stream(task_seed, "concepts"), space, cfg.N, cfg.concept_p)
    oracle_spec = GeneratorSpec(canvas=cfg.canvas, space=space)
    real = generate_batch(oracle_spec, m, derive_key(task_seed, "real"))

    bottleneck = ConceptClassifier("analytic", noise_rate=cfg.bottleneck_noise, noise_seed=task_seed,
                                   space=space, canvas=cfg.canvas)
    checker = ConceptClassifier("analytic", space=space, canvas=cfg.canvas)
    wrng = stream(task_seed, "weights")
    w = wrng.random(d)
    if cfg.zero_weights:
        w[wrng.choice(d, cfg.zero_weights, replace=False)] = 0.0
    task = make_task(wrng, bottleneck, m, weights=w)
    labels = task.labels

    ecfg = ExperimentConfig(P=cfg.P, N=cfg.N, seed=task_seed, generator=cfg.generator,
                            thresholds=cfg.thresholds, bootstrap_B=cfg.bootstrap_B, level=cfg.level,
                            workers=cfg.workers)
    report = depict_run(task, ecfg, m, labels)
    report.reference_real = reference_performance(task, real.images, labels).value

    generated = generate_dataset(cfg.generator, m, derive_key(task_seed, "generate", "reference"))
    validation = ValidationReport(
        effective_generation_check(task, checker, real.images, generated, labels, m, cfg.thresholds),
        independent_permutation_matrix(checker, ecfg, m, cfg.independence_repeats),
    )
    del generated

    preds_real = bottleneck.predict_batch(real.images)
    oracle = bottleneck_oracle(task, preds_real, labels, cfg.P, task_seed, cfg.bootstrap_B, cfg.level)
    std = standardized_coefficients(task.w, preds_real)

    record = {
        "task": t,
        "seed": task_seed,
        "config_hash": config_hash,
        "status": "ok",
        "weights": [float(v) for v in task.w],
        "threshold": task.threshold,
        "positives": int(labels.sum()),
        "importance": report.to_json(),
        "bottleneck_oracle": oracle.to_json(),
        "standardized_coefficients": [float(v) for v in std],
        "validation": validation.to_json(),
        "baseline": None,
    }
    if cfg.baseline:
        n = cfg.N if cfg.baseline_n is None else min(cfg.baseline_n, cfg.N)
        scenes = [real.scene(i, oracle_spec) for i in range(n)]
        record["baseline"] = iou_ranking(task, real.images[:n], scenes, cfg.patch, cfg.stride, cfg.workers).to_json()
    return record


def _pooled_pearson(x: list[float], y: list[float], cfg: RunConfig, name: str) -> dict | None:
    try:
        r = pearson(x, y).value
    except ValueError:
        return None
    pts = np.column_stack([x, y])
    ci = bootstrap_ci(pts, cfg.level, cfg.bootstrap_B, stream(cfg.seed, "pooled", name),
                      statistic=lambda s: pearson(s[:, 0], s[:, 1]).value)
    return {"r": r, "ci": ci.to_json(), "n": len(x)}


def _per_task_pearson(xs: list[np.ndarray], ys: list[np.ndarray]) -> list[float | None]:
    out = []
    for x, y in zip(xs, ys):
        try:
            out.append(pearson(x, y).value)
        except ValueError:
            out.append(None)
    return out


def pool_metrics(cfg: RunConfig, records: list[dict]) -> dict:
    ok = [r for r in records if r["status"] == "ok"]
    pooled: dict = {"tasks_ok": len(ok), "tasks_excluded": len(records) - len(ok)}
    if not ok:
        return pooled
    d = cfg.space.d
    methods = {"depict": [np.array([c["mean"] for c in r["importance"]["concepts"]], dtype=float) for r in ok]}
    if all(r["baseline"] is not None for r in ok):
        methods["baseline_iou"] = [np.array([0.0 if v is None else v for v in r["baseline"]["mean_iou"]])
                                   for r in ok]
    oracles = {
        "standardized": [np.array(r["standardized_coefficients"]) for r in ok],
        "bottleneck": [np.array([c["mean"] for c in r["bottleneck_oracle"]["concepts"]], dtype=float) for r in ok],
    }
    for mname, vals in methods.items():
        x = np.concatenate(vals).tolist()
        entry: dict = {}
        for oname, ovals in oracles.items():
            y = np.concatenate(ovals).tolist()
            entry[f"pearson_vs_{oname}"] = _pooled_pearson(x, y, cfg, f"{mname}-{oname}")
            entry[f"per_task_pearson_vs_{oname}"] = _per_task_pearson(vals, ovals)
        std = oracles["standardized"]
        entry["topk_vs_standardized"] = [float(np.mean([topk_agreement(v, o, k) for v, o in zip(vals, std)]))
                                         for k in range(1, d + 1)]
        entry["importance_auroc_sweep"] = [
            {"threshold": thr, "auroc": a}
            for thr, a in importance_auroc_sweep(x, np.concatenate(std))
        ]
        pooled[mname] = entry
    return pooled


def run_experiment(cfg: RunConfig) -> ExperimentArtifacts:
    config_hash = cfg.config_hash()
    records = []
    for t in range(cfg.tasks):
        start = time.perf_counter()
        try:
            records.append(run_task(cfg, t, config_hash))
            log.info("task %d done in %.1fs", t, time.perf_counter() - start)
        except Exception as exc:  # isolate the failure, keep the run going
            log.warning("task %d failed: %s", t, exc)
            records.append({"task": t, "seed": derive_key(cfg.seed, "task", t), "config_hash": config_hash,
                            "status": "failed", "error": f"{type(exc).__name__}: {exc}"})
    return ExperimentArtifacts(cfg.to_json(), config_hash, records, pool_metrics(cfg, records))
