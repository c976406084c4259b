"""Brute-force reference for small box-constrained quadratic programs."""

import itertools

import numpy as np

from softjpeg.graph_prior import batch_kernels, line_coords, spatial_kernel
from softjpeg.qp import objective


def exhaustive_box_qp(t, K, lam, B, lo, hi, shift):
    """Global minimizer of ``||x-t||^2 + lam x^T K x`` s.t. ``lo <= Bx - shift <= hi``.

    Every constraint is either free, at its lower or at its upper bound. For
    each pattern the equality-constrained minimizer comes from the KKT
    system; the best feasible one is the optimum because the objective is
    strictly convex.
    """
    n, m = len(t), len(lo)
    H = 2 * (np.eye(n) + lam * K)
    best, best_x = np.inf, None
    for pattern in itertools.product((0, 1, 2), repeat=m):
        rows = [i for i in range(m) if pattern[i]]
        rhs = np.array([(lo[i] if pattern[i] == 1 else hi[i]) + shift[i] for i in rows])
        A = B[rows]
        kkt = np.zeros((n + len(rows), n + len(rows)))
        kkt[:n, :n] = H
        kkt[:n, n:] = A.T
        kkt[n:, :n] = A
        sol = np.linalg.solve(kkt, np.concatenate([2 * t, rhs]))
        x = sol[:n]
        c = B @ x - shift
        if np.all(c >= lo - 1e-9) and np.all(c <= hi + 1e-9):
            f = objective(x[None], t[None], K[None], np.array([lam]))[0]
            if f < best:
                best, best_x = f, x
    return best_x, best


def random_instance(rng):
    n = int(rng.integers(1, 11))
    m = int(rng.integers(1, min(n, 6) + 1))
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    B = q[:m]
    if n > 1 and rng.random() < 0.5:
        # a smoothness kernel built the way the decoder builds it (weight floor, sigma1 >= 5)
        x = rng.uniform(0, 255, n)
        kind = rng.choice(["lerag", "combinatorial", "normalized"])
        K = batch_kernels(x[None], spatial_kernel(line_coords(n), 3.0), np.array([max(5.0, x.std())]), kind,
                          weight_floor=1e-3)[0][0]
    else:
        A = rng.normal(size=(n, n))
        K = A @ A.T / n
    lam = float(rng.uniform(0, 3))
    t = rng.normal(0, 5, n)
    center = rng.normal(0, 5, m)
    width = rng.uniform(0.1, 4, m)
    shift = rng.normal(size=m)
    return t, K, lam, B, center - width / 2, center + width / 2, shift
