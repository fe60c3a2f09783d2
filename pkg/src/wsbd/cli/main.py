"""Command-line entry point: ``wsbd run|ablate|grid|report``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from ..errors import ConfigError
from . import runner
from .config import ExperimentConfig, load_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_TARGET = 3


def _seeds(text: str) -> tuple:
    try:
        seeds = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise ConfigError("--seeds", f"expected comma-separated integers, got {text!r}") from None
    if not seeds:
        raise ConfigError("--seeds", "must name at least one seed")
    return seeds


def _floats(text: str, key: str, cast=float) -> list:
    try:
        return [cast(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(key, f"expected a comma-separated list, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wsbd", description="Block-descent training experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "ablate", "grid"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML file with dotted keys")
        p.add_argument("--out", help="output directory (overrides run.out)")
        p.add_argument("--seeds", help='e.g. "1,2,3" (overrides run.seeds)')
        p.add_argument("--parallel", type=int, default=1, help="worker processes")
        p.add_argument("--exact", action="store_true", help="infinite shots: exact expectations")
        p.add_argument("--seconds-per-fp", type=float, help="wall-clock seconds per forward pass")
        if name == "grid":
            p.add_argument("--lambdas", help="comma-separated freeze thresholds")
            p.add_argument("--taus", help="comma-separated window lengths")
    p = sub.add_parser("report")
    p.add_argument("directory")
    p.add_argument("--out", help="CSV path (default DIR/report.csv)")
    return parser


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    changes = {}
    if args.seeds:
        changes["seeds"] = _seeds(args.seeds)
    if args.exact:
        changes["shots"] = None
    if args.seconds_per_fp is not None:
        changes["seconds_per_fp"] = args.seconds_per_fp
    if args.out:
        changes["out"] = args.out
    if args.parallel < 1:
        raise ConfigError("--parallel", "must be >= 1")
    return cfg.with_(**changes) if changes else cfg


def _missed(records) -> bool:
    return any(r.summary["budget_exhausted"] and not r.summary["target_reached"] for r in records)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "report":
            rows = runner.report(args.directory, args.out)
            print(f"{len(rows)} record(s) merged")
            return EXIT_OK
        cfg = _config(args)
        if args.command == "run":
            res = runner.run(cfg, args.parallel)
            print(json.dumps(res["summary"], indent=2, sort_keys=True))
            return EXIT_NO_TARGET if _missed(res["records"]) else EXIT_OK
        if args.command == "ablate":
            res = runner.ablate(cfg, args.parallel)
            for agg in res["table"]:
                print(f"{agg['variant']:>10}  median_fp={agg['median_fp_to_target']}  "
                      f"reached={agg['n_reached']}/{agg['n_seeds']}")
            records = [r for rs in res["records"].values() for r in rs]
            return EXIT_NO_TARGET if _missed(records) else EXIT_OK
        lambdas = _floats(args.lambdas, "--lambdas") if args.lambdas else None
        taus = _floats(args.taus, "--taus", int) if args.taus else None
        for row in runner.grid(cfg, lambdas, taus, args.parallel):
            print(row)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
