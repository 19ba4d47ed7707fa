"""Command line entry point: ``rrmimo run <preset|config.json>`` and ``rrmimo list``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

from ..errors import ConfigError
from .config import PRESETS, load_config
from .experiments import run_experiment

OUT_ENV = "RRMIMO_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 1, 2

log = logging.getLogger("rrmimo")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rrmimo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset or a JSON config")
    run.add_argument("target", help="preset name or path to a JSON config")
    run.add_argument("--seed", type=int, help="master seed (overrides the config)")
    run.add_argument("--trials", type=int, help="Monte Carlo trials (overrides the config)")
    run.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./results)")
    run.add_argument("--threads", type=int, default=1, help="worker threads")
    run.add_argument("--check", action="store_true",
                     help="evaluate the preset's assertions; exit 2 if any fails")
    run.add_argument("-v", "--verbose", action="store_true")

    sub.add_parser("list", help="list the built-in presets")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for name, p in PRESETS.items():
            labels = ", ".join(s["label"] for s in p["scenarios"])
            print(f"{name:10s} {p['experiment']:18s} {labels}")
        return EXIT_OK

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.target).replace(seed=args.seed, trials=args.trials)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.out or os.environ.get(OUT_ENV) or "results")
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = run_experiment(cfg, threads=args.threads, check=args.check)
    path = out_dir / f"{cfg.name}.csv"
    result.table.write_csv(path)
    log.info("%s: %d rows in %.1f s", cfg.name, len(result.table), time.perf_counter() - t0)
    print(f"wrote {path} ({len(result.table)} rows, config {cfg.config_hash()}, seed {cfg.seed})")

    if args.check:
        for c in result.checks:
            print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
        if not result.ok:
            return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
