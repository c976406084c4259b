"""Sparse coding over learned dictionaries: OMP, K-SVD, mean frequency, persistence."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .dct import dct2_ortho
from .errors import (
    BadMagic,
    CorruptPayload,
    DimensionMismatch,
    InsufficientData,
    NonFiniteInput,
    VersionMismatch,
)

MAGIC = b"SJDC"
VERSION = 1
NORM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Unit-norm atoms as the columns of an ``n x M`` matrix."""

    atoms: np.ndarray
    sparsity: int = 0
    iterations: int = 0
    source: str = field(default="", compare=False)
    undercomplete: bool = field(default=False, compare=False)
    objective_trace: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=np.float64, order="F")
        if atoms.ndim != 2:
            raise DimensionMismatch("atoms must be a 2-D array")
        if not np.all(np.isfinite(atoms)):
            raise NonFiniteInput("dictionary contains NaN or inf")
        norms = np.linalg.norm(atoms, axis=0)
        if np.any(np.abs(norms - 1.0) > NORM_TOL):
            raise ValueError("dictionary atoms must have unit l2 norm")
        if atoms.shape[1] < atoms.shape[0] and not self.undercomplete:
            raise ValueError("dictionary is undercomplete; pass undercomplete=True to allow it")
        atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)

    @property
    def n(self) -> int:
        return self.atoms.shape[0]

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[1]

    @property
    def patch_size(self) -> int:
        side = int(round(np.sqrt(self.n)))
        if side * side != self.n:
            raise DimensionMismatch(f"atom length {self.n} is not a square patch")
        return side

    def __eq__(self, other):
        if not isinstance(other, Dictionary):
            return NotImplemented
        return (self.sparsity, self.iterations) == (other.sparsity, other.iterations) and \
            self.atoms.shape == other.atoms.shape and np.array_equal(self.atoms, other.atoms)

    @classmethod
    def from_matrix(cls, atoms, **kw) -> "Dictionary":
        """Normalize columns of ``atoms`` and wrap them."""
        a = np.asarray(atoms, dtype=np.float64)
        return cls(a / np.linalg.norm(a, axis=0), **kw)


@dataclass(frozen=True)
class SparseCode:
    support: tuple[int, ...]
    coefficients: np.ndarray
    residual_norm: float = 0.0

    def dense(self, n_atoms: int) -> np.ndarray:
        alpha = np.zeros(n_atoms)
        alpha[list(self.support)] = self.coefficients
        return alpha

    @property
    def l0(self) -> int:
        return len(self.support)


def _atoms_of(d) -> np.ndarray:
    return d.atoms if isinstance(d, Dictionary) else np.asarray(d, dtype=np.float64)


def omp_batch(X: np.ndarray, atoms: np.ndarray, max_atoms: int | None = None,
              residual_tol: float = 0.0, gram: np.ndarray | None = None):
    """Orthogonal matching pursuit for every row of ``X``.

    Returns ``(support, coefs, residual_norms)`` where ``support`` is an
    ``(N, K)`` integer array padded with ``-1``. Each signal stops after
    ``max_atoms`` selections, once its residual norm is ``<= residual_tol``,
    or when no atom reduces the residual any further. Ties in correlation go
    to the lowest atom index.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    atoms = np.asarray(atoms, dtype=np.float64)
    n, m = atoms.shape
    if X.shape[1] != n:
        raise DimensionMismatch(f"signal length {X.shape[1]} vs atom length {n}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("signal contains NaN or inf")
    k_max = min(n, m) if max_atoms is None else min(int(max_atoms), m)
    N = X.shape[0]
    if gram is None:
        gram = atoms.T @ atoms
    proj = X @ atoms  # (N, M) = Phi^T x per signal
    support = np.full((N, max(k_max, 0)), -1, dtype=np.intp)
    coefs = np.zeros((N, max(k_max, 0)))
    resid = X.copy()
    rnorm = np.linalg.norm(X, axis=1)
    active = rnorm > residual_tol
    taken = np.zeros((N, m), dtype=bool)
    atoms_t = atoms.T

    for k in range(k_max):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        corr = np.abs(resid[idx] @ atoms)
        corr[taken[idx]] = -1.0
        j = np.argmax(corr, axis=1)
        cmax = corr[np.arange(idx.size), j]
        ok = cmax > 1e-12 * np.maximum(rnorm[idx], 1e-300)
        active[idx[~ok]] = False
        idx, j = idx[ok], j[ok]
        if idx.size == 0:
            break
        sup = support[idx, :k + 1].copy()
        sup[:, k] = j
        g = gram[sup[:, :, None], sup[:, None, :]]
        b = np.take_along_axis(proj[idx], sup, axis=1)
        c = _solve_batch(g, b)
        new_resid = X[idx] - np.einsum("ak,akn->an", c, atoms_t[sup])
        new_norm = np.linalg.norm(new_resid, axis=1)
        improved = new_norm < rnorm[idx]
        active[idx[~improved]] = False
        idx, j, sup, c = idx[improved], j[improved], sup[improved], c[improved]
        support[idx, :k + 1] = sup
        coefs[idx, :k + 1] = c
        taken[idx, j] = True
        resid[idx] = new_resid[improved]
        rnorm[idx] = new_norm[improved]
        active[idx] &= rnorm[idx] > residual_tol
    return support, coefs, rnorm


def _solve_batch(g: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(g, b[..., None])[..., 0]
    except np.linalg.LinAlgError:
        return np.stack([np.linalg.lstsq(gi, bi, rcond=None)[0] for gi, bi in zip(g, b)])


def omp(x: np.ndarray, dictionary, max_atoms: int | None = None,
        residual_tol: float = 0.0) -> SparseCode:
    """Sparse code of a single signal; see :func:`omp_batch`."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch("omp expects a single 1-D signal")
    support, coefs, rnorm = omp_batch(x[None], _atoms_of(dictionary), max_atoms, residual_tol)
    keep = support[0] >= 0
    return SparseCode(tuple(int(s) for s in support[0][keep]), coefs[0][keep].copy(), float(rnorm[0]))


def reconstruct(atoms: np.ndarray, support: np.ndarray, coefs: np.ndarray) -> np.ndarray:
    """``Phi @ alpha`` for padded batch codes, shape ``(N, n)``."""
    safe = np.where(support >= 0, support, 0)
    c = np.where(support >= 0, coefs, 0.0)
    return np.einsum("ak,akn->an", c, atoms.T[safe])


# ---------------------------------------------------------------- K-SVD

def _top_right_singular_vector(e: np.ndarray) -> np.ndarray | None:
    """Leading right singular vector of ``e`` via the smaller Gram matrix; None if ``e == 0``."""
    r, n = e.shape
    if r >= n:
        v = scipy.linalg.eigh(e.T @ e, subset_by_index=[n - 1, n - 1])[1][:, 0]
    else:
        u = scipy.linalg.eigh(e @ e.T, subset_by_index=[r - 1, r - 1])[1][:, 0]
        v = e.T @ u
    norm = np.linalg.norm(v)
    if norm == 0.0:
        return None
    v = v / norm
    # fix the sign so the largest-magnitude entry is positive
    return v if v[np.argmax(np.abs(v))] >= 0 else -v


def ksvd_train(patches: np.ndarray, n_atoms: int = 400, sparsity: int = 8, iterations: int = 30,
               seed: int = 0, source: str = "", verbose: bool = False) -> Dictionary:
    """Learn a dictionary with K-SVD.

    ``patches`` is ``(N, n)``, one (mean-removed) training signal per row. The
    training error ``sum ||x_i - Phi a_i||^2`` never increases: a signal keeps
    its previous code when re-coding with OMP would be worse.
    """
    X = np.asarray(patches, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatch("training patches must be (N, n)")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("training patches contain NaN or inf")
    N, n = X.shape
    norms = np.linalg.norm(X, axis=1)
    usable = np.flatnonzero(norms > 1e-10)
    if N < n_atoms or usable.size < n_atoms:
        raise InsufficientData(f"need at least {n_atoms} non-zero training patches, got {usable.size}")
    rng = np.random.default_rng(seed)
    init = np.sort(rng.choice(usable, size=n_atoms, replace=False))
    atoms = (X[init] / norms[init, None]).T.copy()

    support = np.full((N, sparsity), -1, dtype=np.intp)
    coefs = np.zeros((N, sparsity))
    trace = []
    for it in range(iterations):
        new_sup, new_coef, _ = omp_batch(X, atoms, sparsity)
        if it > 0:
            old_err = np.sum((X - reconstruct(atoms, support, coefs)) ** 2, axis=1)
            new_err = np.sum((X - reconstruct(atoms, new_sup, new_coef)) ** 2, axis=1)
            keep_old = old_err < new_err
            new_sup[keep_old] = support[keep_old]
            new_coef[keep_old] = coefs[keep_old]
        support, coefs = new_sup, new_coef

        unused = []
        for k in range(n_atoms):
            rows, slots = np.nonzero(support == k)
            if rows.size == 0:
                unused.append(k)
                continue
            err = X[rows] - reconstruct(atoms, support[rows], coefs[rows])
            err += np.outer(coefs[rows, slots], atoms[:, k])
            atom = _top_right_singular_vector(err)
            if atom is None:
                continue
            atoms[:, k] = atom
            coefs[rows, slots] = err @ atom

        residual = np.sum((X - reconstruct(atoms, support, coefs)) ** 2, axis=1)
        if unused:
            # unused atoms carry no coefficients, so replacing them leaves the error unchanged
            order = np.argsort(-residual, kind="stable")
            order = order[norms[order] > 1e-10]
            for k, i in zip(unused, order):
                atoms[:, k] = X[i] / norms[i]
        atoms /= np.linalg.norm(atoms, axis=0)
        trace.append(float(residual.sum()))
        if verbose:
            print(f"ksvd iter {it + 1}/{iterations}: error {trace[-1]:.6g}, reseeded {len(unused)}")
    return Dictionary(atoms, sparsity, iterations, source, undercomplete=n_atoms < n,
                      objective_trace=tuple(trace))


def sample_training_patches(images, patch_size: int = 10, count: int = 10000, seed: int = 0,
                            min_std: float = 0.0) -> np.ndarray:
    """Random mean-removed patches drawn uniformly from a list of 2-D rasters."""
    rng = np.random.default_rng(seed)
    images = [np.asarray(im, dtype=np.float64) for im in images]
    if any(min(im.shape) < patch_size for im in images):
        raise InsufficientData("image smaller than a patch")
    sizes = np.array([(im.shape[0] - patch_size + 1) * (im.shape[1] - patch_size + 1) for im in images])
    out = []
    while sum(len(o) for o in out) < count:
        which = rng.choice(len(images), size=count, p=sizes / sizes.sum())
        batch = []
        for i in range(len(images)):
            im = images[i]
            k = int(np.sum(which == i))
            if k == 0:
                continue
            r = rng.integers(0, im.shape[0] - patch_size + 1, size=k)
            c = rng.integers(0, im.shape[1] - patch_size + 1, size=k)
            win = np.lib.stride_tricks.sliding_window_view(im, (patch_size, patch_size))
            batch.append(win[r, c].reshape(k, -1))
        batch = np.concatenate(batch)
        batch = batch - batch.mean(axis=1, keepdims=True)
        if min_std > 0:
            batch = batch[batch.std(axis=1) >= min_std]
        out.append(batch)
    return np.concatenate(out)[:count]


# ---------------------------------------------------------------- diagnostics

def mean_frequency(dictionary) -> float:
    """Energy-weighted mean DCT frequency index ``u + v`` over all atoms."""
    atoms = _atoms_of(dictionary)
    n, m = atoms.shape
    side = int(round(np.sqrt(n)))
    if side * side != n:
        raise DimensionMismatch("atoms are not square patches")
    u = np.arange(side)
    freq = (u[:, None] + u[None, :]).astype(np.float64)
    total = 0.0
    for k in range(m):
        coeffs = dct2_ortho(atoms[:, k].reshape(side, side))
        total += float(np.sum(freq * coeffs ** 2))
    return total / m


# ---------------------------------------------------------------- persistence

def dumps_dict(d: Dictionary) -> bytes:
    n, m = d.atoms.shape
    header = MAGIC + struct.pack("<III", VERSION, n, m)
    body = np.asarray(d.atoms, dtype="<f8").tobytes(order="F")
    return header + body + struct.pack("<II", d.sparsity, d.iterations)


def loads_dict(blob: bytes, source: str = "") -> Dictionary:
    if len(blob) < 4 or blob[:4] != MAGIC:
        raise BadMagic("not a dictionary file (bad magic)")
    if len(blob) < 16:
        raise CorruptPayload("truncated header")
    version, n, m = struct.unpack_from("<III", blob, 4)
    if version != VERSION:
        raise VersionMismatch(f"dictionary format version {version}, expected {VERSION}")
    need = 16 + 8 * n * m + 8
    if len(blob) != need:
        raise CorruptPayload(f"expected {need} bytes, found {len(blob)}")
    atoms = np.frombuffer(blob, dtype="<f8", count=n * m, offset=16).reshape((n, m), order="F")
    sparsity, iterations = struct.unpack_from("<II", blob, 16 + 8 * n * m)
    try:
        return Dictionary(atoms.astype(np.float64), sparsity, iterations, source, undercomplete=m < n)
    except (ValueError, NonFiniteInput) as exc:
        raise CorruptPayload(str(exc)) from exc


def save_dict(d: Dictionary, path) -> None:
    Path(path).write_bytes(dumps_dict(d))


def load_dict(path) -> Dictionary:
    return loads_dict(Path(path).read_bytes(), source=str(path))
