"""Command line entry point.

    gaugepec run CONFIG.json [--out DIR] [--seed N] [--exact] [--tasks a,b,c]

Exit codes: 0 success, 2 invalid configuration, 3 infeasible optimization.
Worker count for sample-heavy steps honors the GAUGEPEC_WORKERS environment
variable (numpy's own threading applies below that).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig
from .gaugeopt import InfeasibleEpsilonError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaugepec")
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run a configured synthetic experiment")
    runp.add_argument("config", type=Path)
    runp.add_argument("--out", type=Path, default=None,
                      help="output directory (default: <config stem>-out)")
    runp.add_argument("--seed", type=int, default=None, help="override config seed")
    runp.add_argument("--exact", action="store_true",
                      help="force exact (infinite-statistics) harvesting")
    runp.add_argument("--tasks", type=str, default=None,
                      help="comma-separated task subset override")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _run(args)
    return EXIT_CONFIG  # pragma: no cover


def _run(args) -> int:
    try:
        text = args.config.read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = ExperimentConfig.from_json(text)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.exact:
            overrides["exact"] = True
        if args.tasks is not None:
            overrides["tasks"] = tuple(t.strip() for t in args.tasks.split(",") if t.strip())
        if overrides:
            cfg = dataclasses.replace(cfg, **overrides)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    os.environ.setdefault("GAUGEPEC_WORKERS", "1")
    from .pipeline import emit_report, run

    try:
        bundle = run(cfg)
    except InfeasibleEpsilonError as exc:
        print(f"error: infeasible optimization: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE

    out_dir = args.out or args.config.with_suffix("").name + "-out"
    written = emit_report(bundle, out_dir)
    for path in written:
        print(path)
    if bundle.gauge_opt:
        go = bundle.gauge_opt
        print(
            f"gamma: pseudo-inverse {go['gamma_pseudo_inverse']:.4g} -> "
            f"two-step {go['gamma_two_step']:.4g} -> "
            f"one-step {go['gamma_one_step']:.4g}"
        )
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
