"""Command-line interface.

Machine-readable results go to stdout; human diagnostics go to stderr.
Exit codes: 0 success, 2 usage or validation failure, 3 I/O failure,
4 experiment regeneration budget exhausted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .datagen import generate_dataset, load_dataset, load_dataset_spec, random_dataset_spec, save_dataset, save_dataset_spec
from .errors import (
    DatasetFormatError,
    OodProfileError,
    RepetitionBudgetExceeded,
    SpecGenerationFailed,
)
from .experiment import (
    FORMAT_VERSION,
    ExperimentConfig,
    headline_stats,
    run_profile_grid,
    run_sweep_complexity,
    run_sweep_dimensions,
    run_sweep_portion,
    run_sweep_size,
    write_manifest,
    write_result_csv,
)
from .profile import OodProfiler

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_BUDGET = 4


class _UsageError(Exception):
    pass


def _err(message: str) -> None:
    print(f"oodprofile: error: {message}", file=sys.stderr)


def _ints(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise _UsageError(f"expected comma-separated integers, got {text!r}") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise _UsageError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oodprofile",
        description="Synthetic datasets with interpolatory gaps, per-feature "
                    "OOD profiling, and robustness experiments.",
    )
    parser.add_argument(
        "--version", action="version",
        version=f"oodprofile {__version__} (format version {FORMAT_VERSION})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a synthetic dataset")
    gen.add_argument("--random", action="store_true",
                     help="draw a random dataset spec")
    gen.add_argument("--spec-file", help="generate from an existing spec JSON")
    gen.add_argument("--n", type=int, help="number of source features")
    gen.add_argument("--k", type=int, help="number of samples")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output directory")
    gen.set_defaults(func=cmd_generate)

    prof = sub.add_parser("profile", help="profile one sample against a dataset")
    prof.add_argument("--dataset", required=True, help="dataset CSV path")
    prof.add_argument("--sample", required=True,
                      help="comma-separated sample coordinates")
    prof.add_argument("--mode", choices=["simple", "robust"], default="simple")
    prof.add_argument("--detector", choices=["knn"], default="knn")
    prof.add_argument("--seed", type=int, default=0)
    prof.set_defaults(func=cmd_profile)

    exp = sub.add_parser("experiment", help="run an experiment")
    exp.add_argument("kind", choices=["profile", "sens-dim", "sens-z",
                                      "sens-portion", "sens-size"])
    exp.add_argument("--config", help="JSON config file (flags override it)")
    exp.add_argument("--out", required=True, help="output directory")
    exp.add_argument("--seed", type=int, default=None)
    exp.add_argument("--repetitions", type=int, default=None)
    exp.add_argument("--eval-samples", type=int, default=None)
    exp.add_argument("--mode", choices=["simple", "robust"], default=None)
    exp.add_argument("--n", type=int, default=None)
    exp.add_argument("--k", type=int, default=None)
    exp.add_argument("--n-values", default=None,
                     help="comma-separated n grid (sens-dim, sens-size)")
    exp.add_argument("--z-values", default=None,
                     help="comma-separated z grid (sens-z)")
    exp.add_argument("--k-values", default=None,
                     help="comma-separated k grid (sens-size)")
    exp.add_argument("--fracs", default=None,
                     help="comma-separated fractions (sens-portion)")
    exp.add_argument("--jobs", type=int, default=None,
                     help="parallel workers (default: machine parallelism)")
    exp.set_defaults(func=cmd_experiment)
    return parser


def cmd_generate(args) -> int:
    out_dir = Path(args.out)
    if args.spec_file:
        spec = load_dataset_spec(args.spec_file)
    else:
        if not args.random:
            raise _UsageError("pass --random or --spec-file")
        if args.n is None or args.k is None:
            raise _UsageError("--random requires --n and --k")
        if args.n < 1:
            raise _UsageError("n must be >= 1")
        if args.k < 1:
            raise _UsageError("k must be >= 1")
        if args.seed < 0:
            raise _UsageError("seed must be >= 0")
        spec = random_dataset_spec(args.seed, args.n, args.k)
    dataset = generate_dataset(spec)

    out_dir.mkdir(parents=True, exist_ok=True)
    dataset_path = out_dir / "dataset.csv"
    spec_path = out_dir / "spec.json"
    save_dataset(dataset, dataset_path)
    save_dataset_spec(spec, spec_path)

    print(f"dataset: n={spec.n} k={spec.k} seed={spec.seed}", file=sys.stderr)
    for i, fs in enumerate(spec.feature_specs):
        print(
            f"  f_{i}: z={len(fs.mixture.components)} "
            f"window={fs.window.as_list()} noise_sigma={fs.noise_sigma:.3f}",
            file=sys.stderr,
        )
    print(json.dumps({"dataset": str(dataset_path), "spec": str(spec_path),
                      "n": spec.n, "k": spec.k}))
    return EXIT_OK


def cmd_profile(args) -> int:
    dataset = load_dataset(args.dataset)
    try:
        sample = np.asarray([float(v) for v in args.sample.split(",")])
    except ValueError:
        raise _UsageError(f"bad --sample value {args.sample!r}") from None
    if sample.size != dataset.n:
        raise _UsageError(
            f"sample has {sample.size} coordinates, dataset has {dataset.n} features"
        )
    profiler = OodProfiler(mode=args.mode, random_state=args.seed).fit(dataset.features)
    profile = profiler.profile_one(sample)
    payload = profile.to_dict()
    payload["features"] = [
        {
            "index": i,
            "score": float(det.score_samples([sample[i]])[0]),
            "threshold": det.threshold_,
            "min": det.train_min_,
            "max": det.train_max_,
        }
        for i, det in enumerate(profiler.detectors_)
    ]
    print(json.dumps(payload))
    return EXIT_OK


def _experiment_config(args) -> ExperimentConfig:
    data: dict = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise _UsageError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise _UsageError("config file must hold a JSON object")
    overrides = {
        "master_seed": args.seed,
        "repetitions": args.repetitions,
        "eval_samples_per_config": args.eval_samples,
        "mode": args.mode,
        "n": args.n,
        "k": args.k,
    }
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    try:
        return ExperimentConfig.from_dict(data)
    except (ValueError, TypeError) as exc:
        raise _UsageError(str(exc)) from None


def cmd_experiment(args) -> int:
    cfg = _experiment_config(args)
    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
    if jobs < 1:
        raise _UsageError("--jobs must be >= 1")

    def progress(event: dict) -> None:
        print(f"progress: {event}", file=sys.stderr)

    started = time.monotonic()
    if args.kind == "profile":
        result = run_profile_grid(cfg, jobs=jobs, progress=progress)
    elif args.kind == "sens-dim":
        n_values = _ints(args.n_values) if args.n_values else [1, 2, 3, 4, 5]
        result = run_sweep_dimensions(cfg, n_values, jobs=jobs, progress=progress)
    elif args.kind == "sens-z":
        z_values = _ints(args.z_values) if args.z_values else [1, 5, 10, 15, 20]
        result = run_sweep_complexity(cfg, z_values, jobs=jobs, progress=progress)
    elif args.kind == "sens-portion":
        fracs = _floats(args.fracs) if args.fracs else [0.0, 0.5, 1.0]
        result = run_sweep_portion(cfg, fracs, fracs, jobs=jobs, progress=progress)
    else:
        n_values = _ints(args.n_values) if args.n_values else [2, 5]
        k_values = _ints(args.k_values) if args.k_values else [200, 1000]
        result = run_sweep_size(cfg, n_values, k_values, jobs=jobs,
                                progress=progress)
    wall = time.monotonic() - started

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_result_csv(result, out_dir / "results.csv")
    write_manifest(result, out_dir / "manifest.json", wall)
    print(json.dumps(headline_stats(result)))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help/--version.
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _UsageError as exc:
        _err(str(exc))
        print(f"run 'oodprofile {args.command} --help' for usage", file=sys.stderr)
        return EXIT_USAGE
    except (RepetitionBudgetExceeded, SpecGenerationFailed) as exc:
        _err(str(exc))
        return EXIT_BUDGET
    except DatasetFormatError as exc:
        _err(str(exc))
        return EXIT_IO
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    except (OodProfileError, ValueError) as exc:
        _err(str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
