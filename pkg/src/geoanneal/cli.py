"""Command-line entry point: ``geoanneal <stage> --config FILE [--out DIR] [--threads N]``.

``--config`` accepts a TOML file or the name of a shipped preset.  The output
directory and thread count may also come from GEOANNEAL_OUT and
GEOANNEAL_THREADS; command-line flags win over the environment.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import load_config
from .errors import GeoAnnealError

STAGE_HELP = {
    "spectrum": "low-lying spectra, persistent currents and profiles A(s), B(s)",
    "frame": "effective frame: gaps, geometric term, Pauli coefficients, gap ratios",
    "dynamics": "populations and fidelity with and without the geometric term",
    "sweep": "end-of-anneal fidelity versus t_f for the preset systems",
    "verify": "machine-readable pass/fail report of the numerical invariants",
    "run": "whatever the config's experiment selector asks for",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geoanneal", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="stage", required=True)
    for name, text in STAGE_HELP.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", required=True, help="TOML config file or preset name")
        p.add_argument("--out", help="output directory (default: the config's output_dir)")
        p.add_argument("--threads", type=int, help="worker threads for per-s spectral work")
    return parser


def _threads(value):
    if value is None:
        return None
    n = int(value)
    if n < 1:
        raise ValueError("thread count must be at least 1")
    return n


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .experiments import run_stage

    try:
        cfg = load_config(args.config)
        out = args.out or os.environ.get("GEOANNEAL_OUT")
        if out:
            cfg = cfg.with_output_dir(out)
        try:
            threads = _threads(args.threads if args.threads is not None
                               else os.environ.get("GEOANNEAL_THREADS"))
        except ValueError as exc:
            print(f"geoanneal: [config] threads: {exc}", file=sys.stderr)
            return 2
        if threads:
            cfg = cfg.with_workers(threads)
        stage = "experiment" if args.stage == "run" else args.stage
        summary = run_stage(stage, cfg)
    except GeoAnnealError as exc:
        tag = "" if exc.stage else "[config] "
        print(f"geoanneal: {tag}{exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"geoanneal: [io] {exc}", file=sys.stderr)
        return 3
    for key, value in summary.items():
        print(f"{key}: {value}")
    print(f"outputs written to {cfg.output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
