"""Command line: ``intersection-edge <subcommand> [--config PATH] [--seed N] ...``"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import config as config_mod
from .report import report
from .stages import STAGES, Context, MissingLog, StageError, assertions, run, run_stage

OUT_ENV = "INTERSECTION_EDGE_OUT"


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML run config (default: bundled paper-default)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--sink", choices=("udp", "file"), help="radar datagram sink")
    common.add_argument("--out", metavar="DIR", help=f"output directory (fallback: ${OUT_ENV}, then ./run)")
    common.add_argument("--assert", dest="check", action="store_true",
                        help="exit non-zero when a run-level acceptance check fails")
    p = argparse.ArgumentParser(prog="intersection-edge", description="Intersection edge analytics pipeline.")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "generate": "simulate the scene and write the ground-truth log",
        "detect": "emulate the detector over the ground truth",
        "track": "track detections",
        "analyze": "counting, distancing, anonymization audit and accuracy metrics",
        "broadcast": "real-time replay through the radar broadcast with latency accounting",
        "run": "all stages in order, then the run manifest",
        "report": "CSV/SVG report bundle from a run directory",
        "verify": "run the acceptance criteria and print one line per criterion",
    }
    for name, h in helps.items():
        sp = sub.add_parser(name, parents=[common], help=h)
        if name == "verify":
            sp.add_argument("--only", type=int, nargs="*", help="criterion numbers to run")
            sp.add_argument("--quick", action="store_true", help="shorter runs (not the stated protocol)")
    return p


def _load(args) -> config_mod.RunConfig:
    cfg = config_mod.load(args.config) if args.config else config_mod.bundled()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.sink:
        cfg = replace(cfg, radar=replace(cfg.radar, sink=args.sink))
    return cfg


def _out(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or "run")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "report":
            path = report(_out(args))
            print(f"report written to {path}")
            return 0
        if args.command == "verify":
            from ..acceptance import run_criteria

            results = run_criteria(args.only, quick=args.quick, out=sys.stdout)
            return 0 if all(r.passed for r in results) else 1
        cfg = _load(args)
        out = _out(args)
        if args.command == "run":
            manifest, checks = run(cfg, out, check=args.check)
            for name, ok, detail in checks:
                print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
            print(f"run complete: {out / 'manifest.json'}")
            return 1 if args.check and not all(ok for _, ok, _ in checks) else 0
        out.mkdir(parents=True, exist_ok=True)
        ctx = Context(cfg, out)
        run_stage(args.command, ctx)
        if args.check:
            checks = assertions(ctx)
            for name, ok, detail in checks:
                print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
            if not all(ok for _, ok, _ in checks):
                return 1
        print(f"{args.command} complete: {out}")
        return 0
    except StageError as e:
        print(f"error {e}", file=sys.stderr)
        return 2
    except (config_mod.ConfigError, MissingLog) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
