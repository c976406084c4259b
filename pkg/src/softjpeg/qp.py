"""Projected gradient for ``min ||x - t||^2 + lam x^T K x`` s.t. ``lo <= B x - s <= hi``.

``B`` must have orthonormal rows (here: the DCT of the enclosed code block),
which makes the Euclidean projection exact and cheap:
``x + B^T (clip(Bx - s) - (Bx - s))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DIVERGENCE_PATIENCE = 5
ROUNDING = 1e-12


@dataclass
class QpConfig:
    max_iters: int = 300
    tolerance: float = 1e-3  # gradient-map norm, pixel units
    bin_margin: float = 1e-9  # upper bin edge is open: clamp to b - margin * Q


@dataclass
class QpResult:
    x: np.ndarray
    iterations: np.ndarray
    objective: np.ndarray
    diverged: np.ndarray


def gershgorin_bound(K: np.ndarray) -> np.ndarray:
    """Upper bound on the spectral norm of each symmetric matrix in a batch."""
    return np.abs(K).sum(axis=-1).max(axis=-1)


def project(x: np.ndarray, B: np.ndarray, lo: np.ndarray, hi: np.ndarray, shift: np.ndarray) -> np.ndarray:
    c = np.einsum("pmn,pn->pm", B, x) - shift
    return x + np.einsum("pmn,pm->pn", B, np.clip(c, lo, hi) - c)


def objective(x, t, K, lam):
    r = x - t
    kx = np.einsum("pij,pj->pi", K, x)
    return np.sum(r * r, axis=1) + lam * np.sum(x * kx, axis=1)


def solve_box_qp(t: np.ndarray, K: np.ndarray, lam: np.ndarray, B: np.ndarray, lo: np.ndarray,
                 hi: np.ndarray, shift: np.ndarray, x0: np.ndarray | None = None,
                 cfg: QpConfig | None = None) -> QpResult:
    """Batched accelerated projected gradient; every array has a leading batch axis ``P``.

    Starts from the projection of ``x0`` (or of ``t``) and takes steps of
    ``1 / (2 (1 + lam ||K||))`` with the norm bounded by Gershgorin. The
    momentum sequence is the monotone variant: an iterate is only accepted
    when it does not raise the objective, so the reported objective never
    increases. A batch member is flagged ``diverged`` when its proposals keep
    rising (beyond rounding) for several consecutive steps or turn non-finite.
    """
    cfg = cfg or QpConfig()
    t = np.asarray(t, dtype=np.float64)
    P = t.shape[0]
    lam = np.broadcast_to(np.asarray(lam, dtype=np.float64), (P,))
    bound = gershgorin_bound(K)
    step = 1.0 / (2.0 * (1.0 + lam * bound))
    x = project(t if x0 is None else np.asarray(x0, dtype=np.float64), B, lo, hi, shift)
    f = objective(x, t, K, lam)
    y = x.copy()
    mom = np.ones(P)
    iters = np.zeros(P, dtype=np.int64)
    rising = np.zeros(P, dtype=np.int64)
    diverged = ~np.isfinite(f)
    active = ~diverged
    for _ in range(cfg.max_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        whole = idx.size == P
        take = (lambda a: a) if whole else (lambda a: a[idx])
        xa, ya, Ka, ta, la = take(x), take(y), take(K), take(t), lam[idx]
        grad = 2.0 * (ya - ta) + 2.0 * la[:, None] * np.einsum("pij,pj->pi", Ka, ya)
        s = step[idx, None]
        z = project(ya - s * grad, take(B), take(lo), take(hi), take(shift))
        fz = objective(z, ta, Ka, la)
        better = fz <= f[idx]
        # a rejection within rounding of f after a plain (restarted) step means x is stationary;
        # rounding is relative to the size of the summands, not of f
        scale = np.abs(f[idx]) + la * bound[idx] * np.sum(xa * xa, axis=1) + 1.0
        stall = ~better & (fz - f[idx] <= ROUNDING * scale)
        stationary = stall & (mom[idx] == 1.0)
        xn = np.where(better[:, None], z, xa)
        fn = np.where(better, fz, f[idx])
        m_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * mom[idx] ** 2))
        yn = xn + (mom[idx] / m_next)[:, None] * (z - xn) + ((mom[idx] - 1.0) / m_next)[:, None] * (xn - xa)
        gmap = np.linalg.norm(xa - xn, axis=1) / step[idx]
        # restart momentum where the proposal was rejected
        m_next = np.where(better, m_next, 1.0)
        yn = np.where(better[:, None], yn, xn)
        rising[idx] = np.where(better | stall, 0, rising[idx] + 1)
        x[idx], y[idx], f[idx], mom[idx] = xn, yn, fn, m_next
        iters[idx] += 1
        bad = (rising[idx] >= DIVERGENCE_PATIENCE) | ~np.isfinite(fz)
        diverged[idx[bad]] = True
        done = (better & (gmap < cfg.tolerance)) | stationary
        active[idx[done | bad]] = False
    return QpResult(x, iters, f, diverged)
