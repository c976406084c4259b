"""Sweep the smoothness weight for each graph prior and the number of outer iterations.

Prints mean PSNR over the structured test crops so defaults can be chosen
from data. The dictionary is trained on the bundled training pictures
unless one is given.

    python scripts/calibrate.py --qf 5 --lambdas 0.01,0.03,0.1,0.3,1,3 --iters 1,2,4,8
"""

import argparse
import time
from dataclasses import replace

import numpy as np

from softjpeg.datasets import structured_test_set, training_images
from softjpeg.jpeg_codec import hard_decode, quantize_image
from softjpeg.metrics import psnr
from softjpeg.soft_decoder import SolverConfig, soft_decode
from softjpeg.sparse_dict import ksvd_train, load_dict, sample_training_patches


def mean_psnr(images, qimgs, d, cfg):
    return float(np.mean([psnr(images[n], soft_decode(q, d, cfg)[0]) for n, q in qimgs.items()]))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--dict", default=None)
    ap.add_argument("--qf", type=int, default=5)
    ap.add_argument("--lambdas", default="0.01,0.03,0.1,0.3,1,3")
    ap.add_argument("--kinds", default="lerag,combinatorial,normalized")
    ap.add_argument("--iters", default="1,2,4,8")
    args = ap.parse_args()
    if args.dict:
        d = load_dict(args.dict)
    else:
        t0 = time.perf_counter()
        d = ksvd_train(sample_training_patches(training_images(), 10, 10_000, seed=0), 400, 8, 30, seed=0)
        print(f"trained 400 atoms in {time.perf_counter() - t0:.0f} s")
    images = structured_test_set()
    qimgs = {n: quantize_image(img, args.qf) for n, img in images.items()}
    hard = np.mean([psnr(images[n], hard_decode(q)) for n, q in qimgs.items()])
    print(f"QF {args.qf}, hard decoding mean PSNR {hard:.3f} dB")
    base = SolverConfig()
    for kind in args.kinds.split(","):
        for lam in (float(v) for v in args.lambdas.split(",")):
            cfg = replace(base, regularizer=kind, lambda2_base=lam, max_outer_iters=1)
            print(f"single iteration  {kind:<14} lambda2 {lam:<6g} {mean_psnr(images, qimgs, d, cfg):.3f} dB")
    for iters in (int(v) for v in args.iters.split(",")):
        print(f"default prior     outer iterations {iters:<3} "
              f"{mean_psnr(images, qimgs, d, replace(base, max_outer_iters=iters)):.3f} dB")


if __name__ == "__main__":
    main()
