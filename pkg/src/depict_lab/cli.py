"""Command line entry point: ``depict-lab {gen-dataset,run,validate,baseline,report}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .captions import render_caption
from .concepts import ConceptSpace, sample_concept_matrix
from .datasets import write_dataset
from .engine import ExperimentConfig, ValidationReport, effective_generation_check, independent_permutation_matrix
from .experiment import RunConfig, run_experiment
from .generators import GeneratorSpec, generate_batch, generate_dataset
from .models import ConceptClassifier, make_task
from .render import CanvasSpec, write_pgm
from .report import FORMATS, emit_report, load_artifacts
from .rng import derive_key, stream
from .saliency import iou_ranking, occlusion_saliency


def _flip_rate(text: str):
    parts = [float(v) for v in text.split(",")]
    return parts[0] if len(parts) == 1 else tuple(parts)


def _generator(args, canvas: CanvasSpec, space: ConceptSpace) -> GeneratorSpec:
    return GeneratorSpec(kind=args.generator, flip_rate=args.flip_rate, pixel_noise=args.pixel_noise,
                         canvas=canvas, space=space)


def _add_common(p: argparse.ArgumentParser, seed_required: bool = False) -> None:
    p.add_argument("--n", type=int, default=1000, help="test-set size")
    p.add_argument("--seed", type=int, required=seed_required, default=None if seed_required else 0)
    p.add_argument("--generator", choices=("oracle", "corrupted"), default="oracle")
    p.add_argument("--flip-rate", type=_flip_rate, default=0.0,
                   help="presence flip probability, one value or one per concept (comma separated)")
    p.add_argument("--pixel-noise", type=float, default=0.0)
    p.add_argument("--out", type=Path, required=True)


def _task_setup(args):
    space, canvas = ConceptSpace(), CanvasSpec()
    seed = derive_key(args.seed, "task", 0)
    m = sample_concept_matrix(stream(seed, "concepts"), space, args.n)
    real = generate_batch(GeneratorSpec(canvas=canvas, space=space), m, derive_key(seed, "real"))
    h = ConceptClassifier(space=space, canvas=canvas)
    task = make_task(stream(seed, "weights"), h, m)
    return space, canvas, seed, m, real, h, task


def cmd_gen_dataset(args) -> int:
    space, canvas = ConceptSpace(), CanvasSpec()
    spec = _generator(args, canvas, space)
    m = sample_concept_matrix(stream(args.seed, "concepts"), space, args.n)
    batch = generate_batch(spec, m, derive_key(args.seed, "images"))
    task = make_task(stream(args.seed, "weights"), ConceptClassifier(space=space, canvas=canvas), m)
    captions = [render_caption(batch.scene(i, spec)) for i in range(args.n)]
    write_dataset(batch.images, m, task.labels, args.out, captions)
    print(f"wrote {args.n} images to {args.out}")
    return 0


def cmd_run(args) -> int:
    space, canvas = ConceptSpace(), CanvasSpec()
    cfg = RunConfig(seed=args.seed, tasks=args.tasks, N=args.n, P=args.p, space=space, canvas=canvas,
                    generator=_generator(args, canvas, space), bootstrap_B=args.bootstrap,
                    zero_weights=args.zero_weights, baseline=args.baseline, baseline_n=args.baseline_n,
                    workers=args.workers)
    artifacts = run_experiment(cfg)
    paths = emit_report(artifacts, args.out, args.formats)
    pooled = artifacts.pooled.get("depict", {}).get("pearson_vs_standardized")
    if pooled:
        print(f"pooled Pearson(DEPICT, standardized coefficients) = {pooled['r']:.3f}")
    print(f"wrote {len(paths)} files to {args.out}")
    return 0


def cmd_validate(args) -> int:
    space, canvas, seed, m, real, h, task = _task_setup(args)
    spec = _generator(args, canvas, space)
    ecfg = ExperimentConfig(N=args.n, seed=seed, generator=spec)
    generated = generate_dataset(spec, m, derive_key(seed, "generate", "reference"))
    report = ValidationReport(
        effective_generation_check(task, h, real.images, generated, task.labels, m),
        independent_permutation_matrix(h, ecfg, m),
    )
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "validation.json").write_text(json.dumps(report.to_json(), indent=1, sort_keys=True))
    print(json.dumps(report.effective_generation.to_json()["concept_flags"]))
    return 0


def cmd_baseline(args) -> int:
    space, canvas, seed, m, real, h, task = _task_setup(args)
    spec = GeneratorSpec(canvas=canvas, space=space)
    ranking = iou_ranking(task, real.images, [real.scene(i, spec) for i in range(args.n)])
    args.out.mkdir(parents=True, exist_ok=True)
    doc = {"weights": list(task.w), **ranking.to_json()}
    (args.out / "baseline.json").write_text(json.dumps(doc, indent=1))
    for i in range(min(args.dump_saliency, args.n)):
        write_pgm(args.out / f"saliency_{i:05d}.pgm", occlusion_saliency(task, real.images[i]).raw)
    print(json.dumps(ranking.ranking))
    return 0


def cmd_report(args) -> int:
    paths = emit_report(load_artifacts(args.artifacts), args.out, args.formats)
    print(f"wrote {len(paths)} files to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="depict-lab", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-dataset", help="sample concepts and write a captioned image dataset")
    _add_common(p)
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("run", help="full synthetic experiment")
    _add_common(p, seed_required=True)
    p.add_argument("--tasks", type=int, default=20)
    p.add_argument("--p", type=int, default=100, help="permutation repetitions per concept")
    p.add_argument("--bootstrap", type=int, default=1000)
    p.add_argument("--zero-weights", type=int, default=0, help="concepts per task forced to weight 0")
    p.add_argument("--baseline", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--baseline-n", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--formats", type=lambda s: tuple(s.split(",")), default=FORMATS)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="effective-generation and independent-permutation checks")
    _add_common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("baseline", help="occlusion-IOU concept ranking for one task")
    _add_common(p)
    p.add_argument("--dump-saliency", type=int, default=0, metavar="K",
                   help="write the raw saliency maps of the first K images as PGM")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("report", help="re-emit reports from an artifacts.json")
    p.add_argument("artifacts", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--formats", type=lambda s: tuple(s.split(",")), default=FORMATS)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
