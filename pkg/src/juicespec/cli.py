"""Command-line entry point: ``juicespec <command> [flags]``.

Exit status: 0 success, 1 data/validation error, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__
from .dataset import group_by_juice, parse_dataset_csv, write_dataset_csv
from .errors import JuicespecError
from .evaluate import (
    CV_SCHEMES,
    METRIC_CONVENTIONS,
    atomic_write,
    format_report,
    load_result,
    run_experiment,
    write_result,
)
from .featurize import TARGETS, FeatureSpec, is_classification
from .forest import ForestParams
from .importance import ImportanceSettings, importance_csv, rank_wavelengths, topk_csv
from .models import MODEL_NAMES, load_overrides, spec_with_overrides
from .synth import SynthConfig, generate_synthetic_dataset


class UsageError(Exception):
    pass


def _window(text: str):
    try:
        lo, hi = (int(part) for part in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI in nm, got {text!r}") from None
    if not 200 <= lo <= hi <= 600 or lo % 2 or hi % 2:
        raise argparse.ArgumentTypeError(f"window {text} must be even nm within 200:600")
    return (lo, hi)


def _u64(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an unsigned 64-bit integer, got {text!r}") from None
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed {value} outside [0, 2^64)")
    return value


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="juicespec", description="UV-Vis grape juice chemometrics toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a Beer-Lambert synthetic dataset")
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--juices", type=_positive, default=31)
    p.add_argument("--replicates", type=_positive, default=3)
    p.add_argument("--regions", type=_positive, default=2)
    p.add_argument("--vineyards", type=_positive, default=4)
    p.add_argument("--noise", type=float, default=SynthConfig.noise_sd, help="absorbance noise sd (AU)")
    p.add_argument("--out", type=Path, help="output CSV (default: stdout)")

    p = sub.add_parser("validate", help="parse and summarize a dataset CSV")
    p.add_argument("--data", type=Path, required=True)

    p = sub.add_parser("evaluate", help="cross-validate models on one target")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--task", choices=TARGETS, required=True)
    p.add_argument("--model", choices=MODEL_NAMES + ("all",), default="svm")
    p.add_argument("--cv", choices=CV_SCHEMES, default="loso")
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--window", type=_window)
    p.add_argument("--config", type=Path)
    p.add_argument("--jobs", type=_positive, default=1, help="folds trained concurrently")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("rank", help="wavelength importance (RF and SVM)")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--task", choices=TARGETS + ("all",), required=True)
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--top", type=_positive, default=5)
    p.add_argument("--window", type=_window)
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("report", help="tabulate stored evaluate results")
    p.add_argument("--data", type=Path, required=True, help="directory searched for metrics.json")
    p.add_argument("--format", choices=("md", "csv"), default="md")
    p.add_argument("--out", type=Path, help="output file (default: stdout)")
    return parser


def _read_input(path: Path):
    raw = path.read_bytes()
    return parse_dataset_csv(raw), hashlib.sha256(raw).hexdigest()


def _without_jobs(argv: Sequence[str]) -> List[str]:
    # Thread count never changes results, so it stays out of the manifest.
    out, skip = [], False
    for arg in argv:
        if skip:
            skip = False
        elif arg == "--jobs":
            skip = True
        elif not arg.startswith("--jobs="):
            out.append(arg)
    return out


def _manifest(argv: Sequence[str], args, input_hash: Optional[str], **extra) -> dict:
    record = {
        "command_line": ["juicespec", *_without_jobs(argv)],
        "seed": getattr(args, "seed", None),
        "toolkit_version": __version__,
        "input_sha256": input_hash,
        "metric_conventions": METRIC_CONVENTIONS,
    }
    record.update(extra)
    return record


def _overrides(args):
    if not args.config:
        return {}
    try:
        overrides = load_overrides(args.config)
        for name in MODEL_NAMES:
            spec_with_overrides(name, overrides)
    except (ValueError, OSError) as exc:
        raise UsageError(f"--config {args.config}: {exc}") from None
    return overrides


def cmd_synth(args, argv) -> int:
    config = SynthConfig(
        n_juices=args.juices,
        replicates_per_juice=args.replicates,
        n_regions=args.regions,
        n_vineyards=args.vineyards,
        seed=args.seed,
        noise_sd=args.noise,
    )
    data = write_dataset_csv(generate_synthetic_dataset(config))
    if args.out is None:
        sys.stdout.buffer.write(data)
    else:
        atomic_write(args.out, data)
    return 0


def cmd_validate(args, argv) -> int:
    dataset, digest = _read_input(args.data)
    groups = group_by_juice(dataset)
    regions = sorted({s.metadata.region for s in dataset.samples if s.metadata.region})
    vineyards = sorted({s.metadata.vineyard for s in dataset.samples if s.metadata.vineyard})
    labelled = {
        name: sum(s.labels.get(name) is not None for s in dataset.samples)
        for name in ("astringency", "bitterness", "herbaceous")
    }
    print(f"{args.data}: OK")
    print(f"  samples: {len(dataset)}  juices: {len(groups)}  grid: "
          f"{dataset.grid.start_nm}-{dataset.grid.end_nm} nm step {dataset.grid.step_nm}")
    print(f"  regions: {len(regions)}  vineyards: {len(vineyards)}")
    print("  labelled: " + ", ".join(f"{k}={v}" for k, v in labelled.items()))
    print(f"  sha256: {digest}")
    return 0


def cmd_evaluate(args, argv) -> int:
    dataset, digest = _read_input(args.data)
    overrides = _overrides(args)
    feature_spec = FeatureSpec.for_task(args.task, args.window or "all")
    names = MODEL_NAMES if args.model == "all" else (args.model,)
    for name in names:
        spec = spec_with_overrides(name, overrides)
        table = run_experiment(dataset, feature_spec, spec, args.cv, seed=args.seed, workers=args.jobs)
        out_dir = args.out / name if args.model == "all" else args.out
        write_result(table, out_dir, _manifest(argv, args, digest))
        shown = "  ".join(f"{k}={v:.3f}" for k, v in table.metrics.items())
        print(f"{args.task} {name} {args.cv}: {shown}")
    return 0


def cmd_rank(args, argv) -> int:
    dataset, digest = _read_input(args.data)
    overrides = _overrides(args)
    svm = spec_with_overrides("svm", overrides).params
    rf = spec_with_overrides("rf", overrides).params
    settings = ImportanceSettings(ForestParams(**rf), svm["C"], svm["epsilon"], svm["tol"], svm["max_iter"])
    if args.task == "all":
        targets = [t for t in TARGETS if _has_target(dataset, t)]
    else:
        targets = [args.task]
    curves = []
    for target in targets:
        spec = FeatureSpec.for_task(target, args.window or "all")
        ranked = rank_wavelengths(dataset, spec, seed=args.seed, settings=settings)
        curves.extend(ranked[m] for m in ("rf", "svm"))
    atomic_write(args.out / "importance.csv", importance_csv(curves))
    atomic_write(args.out / "topk.csv", topk_csv(curves, args.top))
    manifest = _manifest(
        argv, args, digest,
        targets=targets,
        window=list(args.window) if args.window else "all",
        convention="models fit once on the full standardized dataset; per-(target, method) min-max normalization",
        svm=svm,
        rf=rf,
    )
    atomic_write(args.out / "manifest.json", (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode())
    for curve in curves:
        print(f"{curve.target} {curve.method}: wrote {len(curve.column_names)} scores")
    return 0


def _has_target(dataset, target: str) -> bool:
    if is_classification(target):
        return all(getattr(s.metadata, target) for s in dataset.samples)
    return all(s.labels.get(target) is not None for s in dataset.samples)


def cmd_report(args, argv) -> int:
    dirs = sorted({p.parent for p in args.data.rglob("metrics.json")})
    if not dirs:
        raise UsageError(f"--data {args.data}: no metrics.json found")
    tables = [load_result(d) for d in dirs]
    text = format_report(tables, args.format)
    if args.out is None:
        sys.stdout.write(text)
    else:
        atomic_write(args.out, text.encode("utf-8"))
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "validate": cmd_validate,
    "evaluate": cmd_evaluate,
    "rank": cmd_rank,
    "report": cmd_report,
}


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args, argv)
    except UsageError as exc:
        print(f"juicespec: usage error: {exc}", file=sys.stderr)
        return 2
    except (JuicespecError, ValueError, OSError) as exc:
        print(f"juicespec: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
