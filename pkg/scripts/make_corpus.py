"""Write the bundled training pictures and structured test crops as PGM corpora.

    python scripts/make_corpus.py --out data
    # -> data/train/*.pgm (five full pictures), data/test/*.pgm (seven 128x128 crops)
"""

import argparse
from pathlib import Path

from softjpeg.datasets import TRAINING_NAMES, structured_test_set, training_images, write_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, default=Path("data"))
    args = ap.parse_args()
    train = write_corpus(args.out / "train", dict(zip(TRAINING_NAMES, training_images())))
    test = write_corpus(args.out / "test", structured_test_set())
    print(f"wrote {len(train)} training images and {len(test)} test crops under {args.out}")


if __name__ == "__main__":
    main()
