"""Command-line entry point: ``cocoacl {theory,simulate,mnist,verify}``."""

from __future__ import annotations

import argparse
import os
import sys
from typing import List, Optional

from .experiments import ConfigError, build_config, load_config, run_experiment
from .mnist import MnistError
from .output import to_csv, to_json

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cocoacl", description="Distributed continual regression experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    def run_flags(p):
        p.add_argument("--config", help="flat YAML config file")
        p.add_argument("--experiment", help="preset id (overrides the config's experiment key)")
        p.add_argument("--seed", type=_u64)
        p.add_argument("--out", help="output path; stdout when omitted")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--trials", type=int)
        p.add_argument("--parallel", type=_positive)
        p.add_argument("--scale", type=float, help="dimension scale factor in (0, 1]")

    run_flags(sub.add_parser("theory", help="closed-form sweep, no sampling"))
    run_flags(sub.add_parser("simulate", help="Monte-Carlo sweep with theory alongside where valid"))
    mn = sub.add_parser("mnist", help="odd/even MNIST experiment")
    run_flags(mn)
    mn.add_argument("--data-dir", help="directory holding the IDX files")
    mn.add_argument("--reshuffle", action="store_true", help="redraw training samples every repetition")

    ver = sub.add_parser("verify", help="run the acceptance checks")
    ver.add_argument("--only", type=int, nargs="+", metavar="N", help="criterion numbers to run")
    ver.add_argument("--data-dir", help="MNIST directory for criterion 10")
    ver.add_argument("--mnist-p", type=_positive, default=3000)
    ver.add_argument("--trials", type=int, help="Monte-Carlo trials for criterion 2")
    ver.add_argument("--seed", type=_u64)
    return parser


def _overrides(args) -> dict:
    ov = load_config(args.config) if args.config else {}
    if args.experiment:
        ov["experiment"] = args.experiment
    for key in ("seed", "trials", "parallel", "scale", "format"):
        val = getattr(args, key, None)
        if val is not None:
            ov[key] = val
    if args.command == "theory":
        ov["mode"] = "theory"
        ov.setdefault("trials", 0)
    elif args.command == "simulate" and ov.get("mode", "both") == "theory":
        ov["mode"] = "both"
    elif args.command == "mnist":
        ov["experiment"] = "mnist"
        if args.data_dir:
            ov["mnist_dir"] = args.data_dir
        if args.reshuffle:
            ov["reshuffle"] = True
    return ov


def _run(args) -> int:
    cfg = build_config(_overrides(args))
    if args.command != "mnist" and cfg.kind == "mnist":
        raise ConfigError("experiment: use the mnist subcommand for the MNIST preset")
    if args.command == "mnist" and cfg.mnist_dir is None:
        cfg.mnist_dir = os.environ.get("COCOACL_MNIST_DIR")
    rows, meta = run_experiment(cfg, out=args.out, fmt=args.format)
    if not (args.out or cfg.output):
        fmt = args.format or cfg.format
        sys.stdout.write(to_json(rows, meta) if fmt == "json" else to_csv(rows))
    return EXIT_OK


def _verify(args) -> int:
    from .verify import CHECKS, run_all

    only = args.only or sorted(CHECKS)
    bad = [n for n in only if n not in CHECKS]
    if bad:
        raise ConfigError(f"--only: unknown criterion {bad[0]}")
    options = {10: {"p": args.mnist_p, "data_dir": args.data_dir}}
    if args.trials is not None:
        options[2] = {"trials": args.trials}
    if args.seed is not None:
        options.setdefault(2, {})["seed"] = args.seed
    results = run_all(only, echo=lambda s: print(s, flush=True), options=options)
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    return EXIT_OK if passed == len(results) else EXIT_FAILED


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _verify(args) if args.command == "verify" else _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MnistError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
