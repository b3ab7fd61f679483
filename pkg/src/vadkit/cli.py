"""Command-line entry point.

One subcommand per pipeline stage plus `pipeline` (every stage in
order) and `make-fixture` (writes the bundled synthetic corpus).
Settings merge from config file, VADKIT_* environment variables, and
flags, in that order of increasing precedence.

Exit codes: 0 success, 2 configuration or input-format error, 3 missing
stage dependency, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
import traceback
from pathlib import Path

from .config import ConfigError, load_config
from .data import ManifestError, TrackLogError
from .features import CacheFormatError
from .model.params import CheckpointFormatError
from .stages import STAGE_ORDER, MissingInputError, run_pipeline, run_stage
from .synthetic import write_fixture
from .tracking.kalman import NumericsError as KalmanNumericsError
from .training import NumericsError as TrainingNumericsError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_NUMERIC = 4

_STAGE_FLAGS: dict[str, list[tuple[str, str, type]]] = {
    # flag name, config key, value type
    "track": [("--detections", "detections_root", str),
              ("--separator", "log_separator", str)],
    "suppress": [("--margin", "margin", int),
                 ("--kernel-size", "kernel_size", int),
                 ("--sigma", "sigma", float)],
    "sample": [("--clip-length", "clip_length", int),
               ("--height", "target_height", int),
               ("--width", "target_width", int)],
    "extract": [("--adapter", "adapter", str),
                ("--feature-dim", "feature_dim", int)],
    "split": [("--test-fraction", "test_fraction", float)],
    "train": [("--epochs", "epochs", int),
              ("--batch-size", "batch_size", int),
              ("--learning-rate", "learning_rate", float),
              ("--val-fraction", "val_fraction", float),
              ("--preset", "arch_preset", str)],
    "trials": [("--trials", "num_trials", int),
               ("--seeds", "trial_seeds", str)],
    "evaluate": [("--checkpoint", "eval_checkpoint", str),
                 ("--test-manifest", "eval_manifest", str)],
    "report": [],
    "pipeline": [],
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vadkit",
        description="Human-centric video anomaly classification pipeline.")
    parser.add_argument("--config", help="path to a key = value config file")
    parser.add_argument("--seed", type=int, help="global random seed")
    parser.add_argument("--jobs", type=int, help="parallel workers for per-video stages")
    parser.add_argument("--dry-run", action="store_true",
                        help="report what would run without writing anything")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in STAGE_ORDER + ("pipeline",):
        p = sub.add_parser(name, help=f"run the {name} stage"
                           if name != "pipeline" else "run every stage in order")
        p.add_argument("--manifest", help="dataset manifest CSV")
        p.add_argument("--out", help="output root directory")
        p.add_argument("--force", action="store_true",
                       help="run even when outputs are up to date")
        for flag, key, value_type in _STAGE_FLAGS.get(name, []):
            p.add_argument(flag, dest=f"cfg_{key}", type=value_type)
        if name == "pipeline":
            p.add_argument("--stages", help="comma-separated subset of stages")

    fx = sub.add_parser("make-fixture", help="write the bundled synthetic dataset")
    fx.add_argument("root", help="directory to create the fixture in")
    fx.add_argument("--clips-per-class", type=int, default=6)
    fx.add_argument("--frames-per-clip", type=int, default=40)
    fx.add_argument("--fixture-seed", type=int, default=7)
    return parser


def _collect_overrides(args: argparse.Namespace) -> dict:
    overrides: dict[str, object] = {}
    if getattr(args, "manifest", None):
        overrides["manifest"] = args.manifest
    if getattr(args, "out", None):
        overrides["out_root"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    for key, value in vars(args).items():
        if key.startswith("cfg_") and value is not None:
            overrides[key[4:]] = value if not isinstance(value, (int, float)) \
                else value
    return overrides


def _print_result(result) -> None:
    if result.status == "ran":
        print(f"[{result.name}] ran: {len(result.outputs)} output file(s)")
    elif result.status == "up-to-date":
        print(f"[{result.name}] up to date")
    else:
        print(f"[{result.name}] would run")


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "make-fixture":
        manifest = write_fixture(Path(args.root),
                                 clips_per_class=args.clips_per_class,
                                 frames_per_clip=args.frames_per_clip,
                                 seed=args.fixture_seed)
        print(f"fixture written; manifest at {manifest}")
        print(f"pipeline config at {Path(args.root) / 'pipeline.cfg'}")
        return EXIT_OK

    overrides = _collect_overrides(args)
    cfg = load_config(args.config, overrides=overrides)
    force = getattr(args, "force", False)

    if args.command == "pipeline":
        stages = STAGE_ORDER
        if getattr(args, "stages", None):
            stages = tuple(s.strip() for s in args.stages.split(",") if s.strip())
        results = run_pipeline(cfg, force=force, dry_run=args.dry_run,
                               stages=stages)
        for result in results:
            _print_result(result)
        return EXIT_OK

    result = run_stage(args.command, cfg, force=force, dry_run=args.dry_run)
    _print_result(result)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ManifestError, TrackLogError, CacheFormatError,
            CheckpointFormatError) as exc:
        print(f"input format error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingInputError as exc:
        print(f"missing dependency: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (KalmanNumericsError, TrainingNumericsError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception:  # pragma: no cover - last-resort diagnostics
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
