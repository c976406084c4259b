"""Graph construction on patches, graph Laplacians and the LERaG smoothness prior.

LERaG (left-eigenvector random-walk graph Laplacian regularizer) is
``x^T L D^{-1} L x / d_min``. It equals a weighted sum of squared left
eigen-basis coefficients of the random-walk Laplacian, vanishes on constant
signals and on ideal two-piece constant signals.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import BadSigma, ConvergenceFailure

DEGREE_FLOOR = 1e-8
KINDS = ("combinatorial", "normalized", "lerag")


def grid_coords(patch_size: int) -> np.ndarray:
    """(row, col) location of every pixel of a square patch in row-major order."""
    r, c = np.meshgrid(np.arange(patch_size), np.arange(patch_size), indexing="ij")
    return np.stack([r.ravel(), c.ravel()], axis=1).astype(np.float64)


def line_coords(n: int) -> np.ndarray:
    return np.arange(n, dtype=np.float64)[:, None]


def _check_sigma(sigma):
    s = np.asarray(sigma, dtype=np.float64)
    if np.any(np.isnan(s)) or np.any(s <= 0):
        raise BadSigma(f"kernel widths must be positive, got {sigma}")


def spatial_kernel(coords: np.ndarray, sigma2: float) -> np.ndarray:
    _check_sigma(sigma2)
    coords = np.asarray(coords, dtype=np.float64)
    if np.isinf(sigma2):
        return np.ones((len(coords), len(coords)))
    d2 = np.sum((coords[:, None, :] - coords[None, :, :]) ** 2, axis=-1)
    return np.exp(-d2 / sigma2**2)


def adjacency(x: np.ndarray, coords: np.ndarray, sigma1, sigma2: float,
              spatial: np.ndarray | None = None) -> np.ndarray:
    """Gaussian-kernel weights for one signal ``(n,)`` or a batch ``(P, n)``."""
    _check_sigma(sigma1)
    x = np.asarray(x, dtype=np.float64)
    if spatial is None:
        spatial = spatial_kernel(coords, sigma2)
    s1 = np.asarray(sigma1, dtype=np.float64)
    if x.ndim == 2:
        s1 = np.broadcast_to(s1, x.shape[:1])[:, None, None]
    diff = x[..., :, None] - x[..., None, :]
    w = np.exp(-(diff**2) / s1**2) * spatial
    n = x.shape[-1]
    w[..., np.arange(n), np.arange(n)] = 0.0
    return w


@dataclass(frozen=True, eq=False)
class PatchGraph:
    """Fully connected weighted graph over the samples of one signal."""

    W: np.ndarray

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.maximum(self.W.sum(axis=1), DEGREE_FLOOR)

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @property
    def D(self) -> np.ndarray:
        return np.diag(self.degrees)

    @property
    def d_min(self) -> float:
        return float(self.degrees.min())

    @property
    def d_max(self) -> float:
        return float(self.degrees.max())

    @cached_property
    def L(self) -> np.ndarray:
        return np.diag(self.degrees) - self.W

    @cached_property
    def normalized(self) -> np.ndarray:
        s = 1.0 / np.sqrt(self.degrees)
        return s[:, None] * self.L * s[None, :]

    @cached_property
    def random_walk(self) -> np.ndarray:
        return self.L / self.degrees[:, None]

    @cached_property
    def lerag_kernel(self) -> np.ndarray:
        """``L D^{-1} L / d_min`` (symmetric PSD)."""
        return self.L @ self.random_walk / self.d_min

    def kernel(self, kind: str) -> np.ndarray:
        if kind == "combinatorial":
            return self.L
        if kind == "normalized":
            return self.normalized
        if kind == "lerag":
            return self.lerag_kernel
        raise ValueError(f"unknown regularizer kind {kind!r}; expected one of {KINDS}")


def build_graph(x: np.ndarray, coords: np.ndarray | None = None, sigma1: float = 5.0,
                sigma2: float = np.inf) -> PatchGraph:
    """Graph with ``W_ij = exp(-(x_i-x_j)^2/s1^2) exp(-|l_i-l_j|^2/s2^2)``, ``W_ii = 0``.

    ``coords`` defaults to sample positions along a line.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if coords is None:
        coords = line_coords(x.size)
    return PatchGraph(adjacency(x, coords, sigma1, sigma2))


def lerag_value(x: np.ndarray, g: PatchGraph) -> float:
    """``x^T L D^{-1} L x / d_min`` from one matrix-vector product and a diagonal scaling."""
    lx = g.L @ np.asarray(x, dtype=np.float64)
    return float(lx @ (lx / g.degrees)) / g.d_min


def regularizer_value(x: np.ndarray, g: PatchGraph, kind: str = "lerag") -> float:
    x = np.asarray(x, dtype=np.float64)
    if kind == "lerag":
        return lerag_value(x, g)
    return float(x @ g.kernel(kind) @ x)


# ---------------------------------------------------------------- batched kernels for the solver

def batch_kernels(X: np.ndarray, spatial: np.ndarray, sigma1: np.ndarray, kind: str = "lerag",
                  weight_floor: float = 0.0):
    """Regularizer matrices for a batch of patches.

    Returns ``(K, d_min)`` with ``K`` of shape ``(P, n, n)``. For ``lerag``
    the ``1/d_min`` factor is already folded into ``K``. A positive
    ``weight_floor`` adds ``weight_floor * max(W)`` to every edge of a patch
    graph so isolated pixels cannot drive ``d_min`` towards zero.
    """
    W = adjacency(X, None, sigma1, np.inf, spatial=spatial)
    n = X.shape[1]
    if weight_floor > 0:
        W += weight_floor * W.max(axis=(1, 2))[:, None, None]
        W[:, np.arange(n), np.arange(n)] = 0.0
    deg = np.maximum(W.sum(axis=2), DEGREE_FLOOR)
    L = -W
    L[:, np.arange(n), np.arange(n)] += deg
    d_min = deg.min(axis=1)
    if kind == "combinatorial":
        K = L
    elif kind == "normalized":
        s = 1.0 / np.sqrt(deg)
        K = s[:, :, None] * L * s[:, None, :]
    elif kind == "lerag":
        K = L @ (L / deg[:, :, None]) / d_min[:, None, None]
    else:
        raise ValueError(f"unknown regularizer kind {kind!r}; expected one of {KINDS}")
    return K, d_min


# ---------------------------------------------------------------- spectra

@dataclass(frozen=True, eq=False)
class SpectralDecomp:
    """Eigenpairs of a symmetric Laplacian; ``U`` has orthonormal columns."""

    eigenvalues: np.ndarray
    U: np.ndarray
    kind: str

    def gft(self, x: np.ndarray) -> np.ndarray:
        return self.U.T @ np.asarray(x, dtype=np.float64)

    def igft(self, alpha: np.ndarray) -> np.ndarray:
        return self.U @ np.asarray(alpha, dtype=np.float64)

    @property
    def fiedler_number(self) -> float:
        return float(self.eigenvalues[1]) if len(self.eigenvalues) > 1 else 0.0


def _eigh(a: np.ndarray):
    try:
        w, v = np.linalg.eigh((a + a.T) / 2.0)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return w, v


def spectral_decompose(g: PatchGraph, kind: str = "normalized") -> SpectralDecomp:
    """Full eigendecomposition of ``L`` (combinatorial), ``L_n`` (normalized) or ``G`` (lerag).

    For diagnostics and tests only.
    """
    w, v = _eigh(g.kernel(kind))
    return SpectralDecomp(w, v, kind)


def random_walk_eigenvectors(g: PatchGraph):
    """Eigenvalues of ``L_r`` with its right (``D^-1/2 V``) and left (``V^T D^1/2``) eigenvectors."""
    w, v = _eigh(g.normalized)
    sq = np.sqrt(g.degrees)
    right = v / sq[:, None]
    left = v.T * sq[None, :]
    return w, right, left


def left_coefficients(x: np.ndarray, g: PatchGraph) -> tuple[np.ndarray, np.ndarray]:
    """``(eigenvalues, beta)`` with ``beta = V^T D^{1/2} x`` over eigenpairs of ``L_n``."""
    w, _, left = random_walk_eigenvectors(g)
    return w, left @ np.asarray(x, dtype=np.float64)


# ---------------------------------------------------------------- spectral clustering demo

def pws_signal(n: int = 16, delta: float = 0.2, Delta: float = 4.0, split: int | None = None) -> np.ndarray:
    """Two ramps: samples within a piece differ by at most ``delta``, across pieces by more than ``Delta``."""
    split = n // 2 if split is None else split
    first = np.linspace(0.0, delta, split)
    second = np.linspace(0.0, delta, n - split) + Delta + 2.0 * delta + 1e-3
    return np.concatenate([first, second])


def ideal_pwc_vector(x: np.ndarray, g: PatchGraph, split: int) -> np.ndarray:
    """``D^{1/2} x`` for the two-piece form ``1/vol(A)`` on A and ``-1/vol(B)`` on B."""
    deg = g.degrees
    f = np.empty_like(deg)
    f[:split] = 1.0 / deg[:split].sum()
    f[split:] = -1.0 / deg[split:].sum()
    return f


@dataclass(frozen=True, eq=False)
class NcutReport:
    fiedler_number: float
    v2: np.ndarray
    f2: np.ndarray
    pwc_error: float
    degenerate: bool
    eigenvalues: np.ndarray
    eig_recon_error: float
    dct_recon_error: float
    eig_reconstruction: np.ndarray
    dct_reconstruction: np.ndarray


def _relative_projection_error(x: np.ndarray, basis: np.ndarray) -> tuple[float, np.ndarray]:
    coef = np.linalg.lstsq(basis, x, rcond=None)[0]
    rec = basis @ coef
    return float(np.linalg.norm(x - rec) / max(np.linalg.norm(x), 1e-300)), rec


def ncut_demo(signal: np.ndarray, delta: float = 0.2, Delta: float = 4.0, sigma1: float | None = None,
              sigma2: float = np.inf) -> NcutReport:
    """Spectral-clustering view of a 1-D piecewise-smooth signal.

    Reports the Fiedler number of ``L_n``, its second eigenvector ``v2``
    (chosen orthogonal to ``D^{1/2} 1``), the distance of ``D^{-1/2} v2``
    from the ideal two-level Ncut indicator, and the relative error of
    reconstructing the signal from the first two right eigenvectors of
    ``L_r`` versus the first two DCT basis vectors.
    """
    x = np.asarray(signal, dtype=np.float64).reshape(-1)
    n = x.size
    if sigma1 is None:
        sigma1 = Delta / 8.0 if Delta > 0 else 1.0
    g = build_graph(x, line_coords(n), sigma1, sigma2)
    w, v = _eigh(g.normalized)
    sq = np.sqrt(g.degrees)
    v1 = sq / np.linalg.norm(sq)
    r = v[:, :2].T @ v1
    v2 = v[:, :2] @ np.array([-r[1], r[0]])
    v2 /= np.linalg.norm(v2)
    if v2[0] < 0:
        v2 = -v2
    f2 = v2 / sq

    split = int(np.argmax(np.sign(f2) != np.sign(f2[0]))) or n
    if split == n:
        pwc_error = float("nan")
    else:
        ideal = ideal_pwc_vector(x, g, split)
        a = f2 / np.linalg.norm(f2)
        b = ideal / np.linalg.norm(ideal)
        pwc_error = float(min(np.linalg.norm(a - b), np.linalg.norm(a + b)))

    degenerate = bool(np.ptp(x) == 0 or (n > 2 and abs(w[2] - w[1]) < 1e-9 * max(1.0, abs(w[1]))))

    right = np.stack([np.ones(n) / np.sqrt(n), f2], axis=1)
    eig_err, eig_rec = _relative_projection_error(x, right)
    from .dct import dct_matrix

    dct_basis = dct_matrix(n)[:2].T
    dct_err, dct_rec = _relative_projection_error(x, dct_basis)
    return NcutReport(float(w[1]), v2, f2, pwc_error, degenerate, w, eig_err, dct_err, eig_rec, dct_rec)
