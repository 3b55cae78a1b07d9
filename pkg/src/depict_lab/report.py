"""Artifact emission: JSON bundle, per-concept CSV and SVG boxplots."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .experiment import ExperimentArtifacts

FORMATS = ("json", "csv", "svg")

CSV_FIELDS = [
    "task", "seed", "status", "concept_index", "concept", "weight", "mean_drop", "ci_lo", "ci_hi",
    "standardized_coefficient", "bottleneck_drop", "baseline_iou",
]


def artifacts_json(artifacts: ExperimentArtifacts) -> str:
    return json.dumps(artifacts.to_json(), sort_keys=True, indent=1, allow_nan=False) + "\n"


def load_artifacts(path) -> ExperimentArtifacts:
    return ExperimentArtifacts.from_json(json.loads(Path(path).read_text()))


def _csv_rows(artifacts: ExperimentArtifacts):
    names = artifacts.config["space"]["names"]
    for rec in artifacts.tasks:
        ok = rec["status"] == "ok"
        for j, name in enumerate(names):
            row = {"task": rec["task"], "seed": rec["seed"], "status": rec["status"],
                   "concept_index": j, "concept": name}
            if ok:
                dist = rec["importance"]["concepts"][j]
                ci = dist["ci"] or {}
                baseline = rec["baseline"]["mean_iou"][j] if rec["baseline"] else None
                row.update(
                    weight=rec["weights"][j], mean_drop=dist["mean"], ci_lo=ci.get("lo"), ci_hi=ci.get("hi"),
                    standardized_coefficient=rec["standardized_coefficients"][j],
                    bottleneck_drop=rec["bottleneck_oracle"]["concepts"][j]["mean"], baseline_iou=baseline,
                )
            yield row


def boxplot_svg(drops: list[list[float]], names: list[str], title: str, oracle: list[float] | None = None) -> str:
    """One ``<g class="concept-box">`` per concept; whiskers span min to max."""
    width, height, margin = 80 + 90 * len(names), 320, 50
    finite = [v for ds in drops for v in ds] + (list(oracle) if oracle else []) + [0.0]
    lo, hi = min(finite), max(finite)
    if hi - lo < 1e-9:
        hi = lo + 1e-3
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad

    def ypos(v: float) -> float:
        return round(height - margin - (v - lo) / (hi - lo) * (height - 2 * margin), 2)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{margin}" y1="{ypos(0.0)}" x2="{width - 10}" y2="{ypos(0.0)}" stroke="#999" '
        'stroke-dasharray="4 3"/>',
    ]
    for j, (name, ds) in enumerate(zip(names, drops)):
        cx = margin + 40 + 90 * j
        out.append(f'<g class="concept-box" data-concept="{escape(name)}">')
        if ds:
            q1, med, q3 = np.percentile(ds, [25, 50, 75])
            out += [
                f'<line x1="{cx}" y1="{ypos(min(ds))}" x2="{cx}" y2="{ypos(max(ds))}" stroke="black"/>',
                f'<rect x="{cx - 20}" y="{ypos(q3)}" width="40" height="{max(ypos(q1) - ypos(q3), 0.5)}" '
                'fill="#9ecae1" stroke="black"/>',
                f'<line x1="{cx - 20}" y1="{ypos(med)}" x2="{cx + 20}" y2="{ypos(med)}" stroke="black" '
                'stroke-width="2"/>',
            ]
        if oracle is not None:
            out.append(f'<circle cx="{cx}" cy="{ypos(oracle[j])}" r="4" fill="#d62728"/>')
        out.append(f'<text x="{cx}" y="{height - 20}" text-anchor="middle" font-size="11">{escape(name)}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(artifacts: ExperimentArtifacts, out_dir, formats=FORMATS) -> list[Path]:
    unknown = set(formats) - set(FORMATS)
    if unknown:
        raise ValueError(f"unknown report formats {sorted(unknown)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "json" in formats:
        path = out / "artifacts.json"
        path.write_text(artifacts_json(artifacts))
        written.append(path)
    if "csv" in formats:
        path = out / "importance.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
            writer.writeheader()
            writer.writerows(_csv_rows(artifacts))
        written.append(path)
    if "svg" in formats:
        names = artifacts.config["space"]["names"]
        for rec in artifacts.ok_tasks():
            drops = [[v for v in c["drops"] if v is not None] for c in rec["importance"]["concepts"]]
            # oracle dots are scaled onto the drop axis for shape comparison only
            std = np.array(rec["standardized_coefficients"])
            means = np.array([c["mean"] or 0.0 for c in rec["importance"]["concepts"]])
            scale = means.max() / std.max() if std.max() > 0 and means.max() > 0 else 1.0
            svg = boxplot_svg(drops, names, f"task {rec['task']}: AUROC drop per concept",
                              list(std * scale))
            path = out / f"boxplot_task{rec['task']:03d}.svg"
            path.write_text(svg)
            written.append(path)
    return written
