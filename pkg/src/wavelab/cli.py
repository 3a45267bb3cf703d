"""``wavelab`` command line: run, validate, train and shape experiments from TOML."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import load_config, resolve_jobs, resolve_seed
from .errors import WavelabError
from .experiments import run_experiment


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wavelab", description=__doc__)
    p.add_argument("command", choices=("run", "validate", "train", "shape"))
    p.add_argument("config", type=Path, help="experiment TOML file")
    p.add_argument("--seed", type=int, default=None, help="override the config seed (env WAVELAB_SEED)")
    p.add_argument("--out", type=Path, default=None, help="output directory (default: config output_dir)")
    p.add_argument("--jobs", type=int, default=None, help="parallel workers (env WAVELAB_JOBS)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, problems = load_config(args.config, check_files=args.command != "train")
    except OSError as exc:
        print(f"error: cannot read {args.config}: {exc}", file=sys.stderr)
        return 2
    if args.command == "validate":
        for line in problems:
            print(line)
        return 0 if not problems else 1
    if problems:
        print(f"error: invalid config {args.config}:", file=sys.stderr)
        for line in problems:
            print(f"  {line}", file=sys.stderr)
        return 1

    seed = resolve_seed(cfg.seed, args.seed)
    jobs = resolve_jobs(args.jobs)
    experiment = {"run": None, "train": "train", "shape": "shape"}[args.command]
    try:
        summary = run_experiment(cfg, seed=seed, out=args.out, jobs=jobs, experiment=experiment)
    except WavelabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(summary, indent=2, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
