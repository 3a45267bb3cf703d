"""Train a compressed transform pair for one (M, Q, N) and save it.

    python3 scripts/train_transform.py 76 64 128 transforms/m76.wlxp
"""
import argparse

from wavelab.trainer import TrainConfig, train_pair
from wavelab.transforms import save_pair


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("M", type=int)
    ap.add_argument("Q", type=int)
    ap.add_argument("N", type=int)
    ap.add_argument("output")
    ap.add_argument("--iterations", type=int, default=TrainConfig.iterations)
    ap.add_argument("--seed", type=int, default=TrainConfig.seed)
    ap.add_argument("--prune", type=float, default=0.0, help="magnitude threshold for pruning")
    ap.add_argument("--report-dir", help="write the loss curve and run metadata here")
    args = ap.parse_args()

    cfg = TrainConfig(iterations=args.iterations, seed=args.seed, prune_threshold=args.prune)
    pair, report = train_pair(args.M, args.Q, args.N, cfg)
    path = save_pair(pair, args.output, {"train_digest": cfg.digest()})
    print(f"saved {path} (alpha={pair.alpha:.4f}, best iteration {report.best_iteration}, "
          f"prune ratio {report.prune_ratio:.3f})")
    if args.report_dir:
        report.write(args.report_dir)


if __name__ == "__main__":
    main()
