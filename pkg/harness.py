#!/usr/bin/env python3
"""
Command-line entry point for the neighbor-discovery experiments.

Usage:
    python harness.py codec 5 --n 3 --k 1 --d 7 [--offset 1] [--corrupt 0:-,2:4]
    python harness.py sweep-snr [--config FILE] [--seed N] [--out snr_sweep.csv]
    python harness.py density-sweep [--config FILE] [--seed N] [--out density.csv]
    python harness.py baseline-curve [--config FILE] [--out curve.csv]

Exit codes: 0 success, 1 validation error (or failed codec round trip),
2 runtime failure.
"""

import argparse
import logging
import os
import sys
from typing import Dict, List, Optional

import pandas as pd
from dotenv import load_dotenv

import experiments
from config import ExperimentConfig, load_config
from errors import ConfigError, DiscoveryError
from gfield import field_new

logger = logging.getLogger("harness")

BASE_DIR = os.path.dirname(os.path.abspath(__file__))
ENV_FILE = os.path.join(BASE_DIR, ".env")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

DEFAULT_OUTPUTS = {
    "sweep-snr": "snr_sweep.csv",
    "density-sweep": "density.csv",
}


class HarnessParser(argparse.ArgumentParser):
    """Usage errors are validation errors (exit 1), not argparse's default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = HarnessParser(prog="harness", description="Coded single-tone neighbor discovery experiments")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("--seed", type=int, help="master seed (overrides sim.seed)")
        p.add_argument("--trials", type=int, help="trials per sweep point (overrides sim.trials)")
        p.add_argument("--out", help="CSV output path")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any configuration key (repeatable)")

    codec = sub.add_parser("codec", help="encode/decode round trip of one TNID")
    codec.add_argument("tnid", type=int)
    codec.add_argument("--n", type=int, default=None, help="codeword length N")
    codec.add_argument("--k", type=int, default=None, help="information symbols K")
    codec.add_argument("--d", type=int, default=None, help="prime field size D")
    codec.add_argument("--offset", type=int, default=0, help="frequency offset applied to every tone")
    codec.add_argument("--corrupt", help="comma list of idx:value (replace) or idx:- (erase)")
    codec.add_argument("--tau", type=int, help="acceptance threshold")
    codec.add_argument("--delta-max", type=int, help="offset search half-width (default |offset|)")
    codec.add_argument("--config", help="flat key = value configuration file")

    for name, text in (("sweep-snr", "erasure/error rates versus SNR"),
                       ("density-sweep", "median discovery delay versus density"),
                       ("baseline-curve", "closed-form discovery probability table")):
        experiment_flags(sub.add_parser(name, help=text))
    return parser


def parse_overrides(items: List[str]) -> Dict[str, str]:
    overrides = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    return overrides


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    overrides = parse_overrides(getattr(args, "set", []) or [])
    if getattr(args, "seed", None) is not None:
        overrides["sim.seed"] = str(args.seed)
    if getattr(args, "trials", None) is not None:
        overrides["sim.trials"] = str(args.trials)
    return load_config(args.config, overrides).validate()


def write_csv(df: pd.DataFrame, cfg: ExperimentConfig, out: Optional[str]) -> None:
    """Header comment with the resolved config, then the table with 6 significant digits."""
    body = df.to_csv(index=False, float_format="%.6g", lineterminator="\n")
    text = cfg.header() + "\n" + body
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w", newline="") as f:
        f.write(text)
    logger.info("wrote %d row(s) to %s", len(df), out)


def cmd_codec(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    d = args.d if args.d is not None else cfg.get_int("field.d")
    n = args.n if args.n is not None else cfg.get_int("code.n")
    k = args.k if args.k is not None else cfg.k
    params = field_new(d, n)
    report = experiments.codec_roundtrip(args.tnid, params, k, offset=args.offset, corrupt=args.corrupt,
                                         tau=args.tau, delta_max=args.delta_max)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.success else EXIT_VALIDATION


def cmd_sweep_snr(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    write_csv(experiments.run_snr_sweep(cfg), cfg, args.out or DEFAULT_OUTPUTS["sweep-snr"])
    return EXIT_OK


def cmd_density_sweep(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    write_csv(experiments.run_density_sweep(cfg), cfg, args.out or DEFAULT_OUTPUTS["density-sweep"])
    return EXIT_OK


def cmd_baseline_curve(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    write_csv(experiments.run_baseline_curve(cfg), cfg, args.out)
    return EXIT_OK


COMMANDS = {
    "codec": cmd_codec,
    "sweep-snr": cmd_sweep_snr,
    "density-sweep": cmd_density_sweep,
    "baseline-curve": cmd_baseline_curve,
}


def main(argv: Optional[List[str]] = None) -> int:
    if os.path.exists(ENV_FILE):
        load_dotenv(ENV_FILE)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="[%(name)s] %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except DiscoveryError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception:
        logger.exception("%s failed", args.command)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
