"""Run one or more experiment configs and print their summaries.

    python3 scripts/run_experiments.py configs/awgn_m76.toml configs/awgn_m150.toml --jobs 4
"""
import argparse
import json

from wavelab.experiments import run_file


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("configs", nargs="+")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    for path in args.configs:
        summary = run_file(path, seed=args.seed, out=args.out, jobs=args.jobs)
        print(path)
        print(json.dumps(summary, indent=2, default=str))


if __name__ == "__main__":
    main()
