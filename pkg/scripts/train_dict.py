"""Train patch dictionaries of several sizes and report their mean frequency.

    python scripts/train_dict.py --corpus data/train --atoms 100,200,400 --out dicts
"""

import argparse
import time
from pathlib import Path

from softjpeg.cli import _corpus
from softjpeg.sparse_dict import ksvd_train, mean_frequency, sample_training_patches, save_dict


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--corpus", type=Path, required=True)
    ap.add_argument("--atoms", default="400", help="comma-separated atom counts")
    ap.add_argument("--sparsity", type=int, default=8)
    ap.add_argument("--iters", type=int, default=30)
    ap.add_argument("--patches", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("dicts"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    patches = sample_training_patches(list(_corpus(args.corpus).values()), 10, args.patches, seed=args.seed)
    for m in (int(a) for a in args.atoms.split(",")):
        t0 = time.perf_counter()
        d = ksvd_train(patches, m, args.sparsity, args.iters, seed=args.seed, source=str(args.corpus))
        path = args.out / f"d{m}.sjdc"
        save_dict(d, path)
        print(f"{path}: {m} atoms, final error {d.objective_trace[-1]:.4g}, "
              f"mean frequency {mean_frequency(d):.4f}, {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
