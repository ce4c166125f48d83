"""Command-line entry point: run experiments described by a config file."""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .experiments import run_experiment


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="nslab",
        description="Half-space Navier-Stokes laboratory (boundary-vorticity formulation).",
    )
    ap.add_argument("--config", required=True, help="path to a key=value config file")
    ap.add_argument("--out", default=None, help="output directory (overrides out_dir)")
    ap.add_argument("--seed", type=int, default=None, help="seed for randomized sample sets")
    ap.add_argument("--modes", type=int, default=None, help="mode truncation K")
    ap.add_argument("--grid", type=int, default=None, help="number of z-grid nodes")
    ap.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                    help="override any config key (repeatable)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides: dict = {}
    for item in args.override:
        if "=" not in item:
            raise SystemExit(f"--override expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.modes is not None:
        overrides["modes"] = args.modes
    if args.grid is not None:
        overrides["grid_nodes"] = args.grid
    cfg = load_config(args.config, overrides)
    summary = run_experiment(cfg)
    for key in sorted(summary):
        print(f"{key}: {summary[key]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
