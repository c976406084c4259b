"""Soft decoding with Laplacian, sparsity and graph smoothness priors.

Per patch ``x`` (enclosing one code block) the decoder minimizes

    ||x - Phi a - m||^2 + lambda1 ||a||_0 + lambda2 x^T G x
    s.t. the enclosed block's DCT coefficients stay in their q-bins,

alternating an OMP step (code ``a`` of the mean-removed patch, mean ``m``)
with a box constrained QP step (``x``). The graph behind ``G`` is rebuilt
from the current estimate at the start of every outer iteration, and the
patches are re-extracted from the overlap-averaged raster so neighbouring
blocks see each other's updates.

Pixels stay in [0, 255] internally; objectives are reported on the unit
intensity scale (pixels / 255), which is the scale ``lambda1`` refers to.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .dct import T64, ZIGZAG
from .errors import DictMismatch, QpDivergence
from .graph_prior import KINDS, PatchGraph, batch_kernels, grid_coords, spatial_kernel
from .jpeg_codec import QuantizedImage, coefficients_to_raster, hard_decode, to_uint8
from .laplacian_prior import LaplacianParams, fit_laplacian, mmse_coefficients
from .patching import PatchLayout, assemble_patches, extract_patches, make_layout
from .qp import QpConfig, project, solve_box_qp
from .sparse_dict import Dictionary, omp_batch, reconstruct

PEAK = 255.0
LEVEL_SHIFT = 128.0
HF_ZIGZAG_START = 32
MIN_SIGMA1 = 5.0

# DCT of a constant 128 block: what the level shift adds to the coefficients
LEVEL_SHIFT_COEFFS = T64 @ np.full(64, LEVEL_SHIFT)


@dataclass
class SolverConfig:
    lambda1: float = 0.001
    lambda2_base: float = 1.0
    lambda2_boost: float = 0.1
    max_outer_iters: int = 4
    convergence_tol: float = 1e-4
    qp: QpConfig = field(default_factory=QpConfig)
    sigma1: float | None = None  # fixed intensity kernel width; None: per patch, see sigma1_for
    sigma1_floor: float | None = None  # None: block-mean quantization step Q_dc / 8, at least 5
    sigma2: float = 3.0
    weight_floor: float = 0.001  # fraction of a patch's largest edge weight added to every edge
    patch_size: int = 10
    omp_max_atoms: int | None = None  # None: stop on the residual tolerance alone
    omp_residual_tol: float | None = None  # unit scale; None: sqrt(lambda1 * n)
    regularizer: str = "lerag"
    share_overlaps: bool = True
    threads: int = 1
    chunk_size: int = 64

    def __post_init__(self):
        if isinstance(self.qp, dict):
            self.qp = QpConfig(**self.qp)
        for name in ("lambda1", "lambda2_base", "lambda2_boost", "weight_floor"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")
        if self.regularizer not in KINDS:
            raise ValueError(f"regularizer must be one of {KINDS}")
        if self.threads < 1 or self.chunk_size < 1:
            raise ValueError("threads and chunk_size must be >= 1")

    def residual_tol(self, n: int) -> float:
        """OMP stopping residual norm in pixel units."""
        if self.omp_residual_tol is not None:
            return self.omp_residual_tol * PEAK
        return PEAK * np.sqrt(self.lambda1 * n)

    def sigma1_for(self, X: np.ndarray, dc_step: float) -> np.ndarray:
        """Intensity kernel width per patch: ``max(floor, std(patch))`` unless fixed."""
        if self.sigma1 is not None:
            return np.full(len(X), float(self.sigma1))
        floor = self.sigma1_floor if self.sigma1_floor is not None else max(MIN_SIGMA1, dc_step / 8.0)
        return np.maximum(floor, X.std(axis=1))


@dataclass
class SolverReport:
    iterations: int = 0
    converged: bool = False
    mean_objective: list = field(default_factory=list)
    psnr_vs_hard: list = field(default_factory=list)
    qp_iterations: list = field(default_factory=list)
    fallback_patches: list = field(default_factory=list)
    objective_traces: list = field(default_factory=list)
    wall_time_s: float = 0.0

    def to_json(self, include_traces: bool = False) -> str:
        d = asdict(self)
        if not include_traces:
            d.pop("objective_traces")
        return json.dumps(d, indent=2)


def lambda2_effective(q_indices: np.ndarray, cfg: SolverConfig) -> float:
    """Smoothness weight grown by the high-frequency q-index mass of the enclosed block(s).

    ``q_indices`` holds one or more row-major 8x8 blocks; zig-zag positions
    32 and beyond count as high frequency, averaged over blocks.
    """
    q = np.asarray(q_indices).reshape(-1, 64)
    hf = np.abs(q[:, ZIGZAG[HF_ZIGZAG_START:]]).sum() / len(q)
    return float(cfg.lambda2_base * (1.0 + cfg.lambda2_boost * hf))


def bins_for_block(q: np.ndarray, Q: np.ndarray, margin: float = 1e-9):
    """Closed coefficient intervals ``[(q - 1/2) Q, (q + 1/2) Q - margin Q]`` (flattened)."""
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    Q = np.asarray(Q, dtype=np.float64).reshape(-1)
    return (q - 0.5) * Q, (q + 0.5) * Q - margin * Q


def qp_step(target: np.ndarray, g: PatchGraph | np.ndarray, lo: np.ndarray, hi: np.ndarray,
            lambda2_eff: float, operator: np.ndarray, shift: np.ndarray | None = None,
            cfg: QpConfig | None = None, x0: np.ndarray | None = None, kind: str = "lerag") -> np.ndarray:
    """Single patch: ``min ||x - target||^2 + lambda2_eff x^T K x`` s.t. ``lo <= operator x - shift <= hi``.

    ``g`` is a graph (``kind`` picks the regularizer) or an explicit kernel
    matrix. Raises QpDivergence if the objective keeps rising.
    """
    target = np.asarray(target, dtype=np.float64).reshape(1, -1)
    K = g.kernel(kind) if isinstance(g, PatchGraph) else np.asarray(g, dtype=np.float64)
    B = np.asarray(operator, dtype=np.float64)
    shift = np.zeros(B.shape[0]) if shift is None else np.asarray(shift, dtype=np.float64)
    res = solve_box_qp(target, K[None], np.array([lambda2_eff]), B[None], np.asarray(lo, float)[None],
                       np.asarray(hi, float)[None], shift[None],
                       None if x0 is None else np.asarray(x0, float)[None], cfg)
    if res.diverged[0]:
        raise QpDivergence("projected gradient objective kept increasing")
    return res.x[0]


def objective_value(x: np.ndarray, alpha: np.ndarray, dictionary: Dictionary, kernel: np.ndarray,
                    lambda1: float, lambda2_eff: float, mean: float = 0.0) -> float:
    """Combined objective of one patch on the unit intensity scale.

    ``kernel`` is the regularizer matrix (for LERaG it already contains ``1/d_min``).
    """
    x = np.asarray(x, dtype=np.float64) / PEAK
    alpha = np.asarray(alpha, dtype=np.float64)
    fit = x - (dictionary.atoms @ alpha + mean) / PEAK
    return float(fit @ fit + lambda1 * np.count_nonzero(alpha) + lambda2_eff * x @ kernel @ x)


def _objectives(X, support, coefs, means, atoms, K, lam1, lam2):
    """Vectorized :func:`objective_value` for a chunk of patches."""
    fit = (X - reconstruct(atoms, support, coefs) - means[:, None]) / PEAK
    xs = X / PEAK
    reg = np.einsum("pi,pij,pj->p", xs, K, xs)
    l0 = np.sum((support >= 0) & (coefs != 0), axis=1)
    return np.sum(fit * fit, axis=1) + lam1 * l0 + lam2 * reg


@dataclass
class _Problem:
    layout: PatchLayout
    atoms: np.ndarray
    gram: np.ndarray
    operators: np.ndarray  # (P, 64, n)
    lo: np.ndarray
    hi: np.ndarray
    shift: np.ndarray
    lam2: np.ndarray
    spatial: np.ndarray
    dc_step: float
    cfg: SolverConfig
    k_max: int
    tol: float


def _build_problem(qimg: QuantizedImage, dictionary: Dictionary, cfg: SolverConfig) -> _Problem:
    n = cfg.patch_size**2
    if dictionary.n != n:
        raise DictMismatch(f"dictionary atoms have length {dictionary.n}, patches need {n}")
    by, bx = qimg.grid
    layout = make_layout(by * 8, bx * 8, cfg.patch_size)
    blocks = qimg.blocks[layout.blocks[:, 0], layout.blocks[:, 1]].reshape(-1, 64)
    Q = qimg.luma_qtable.matrix.reshape(64)
    lo, hi = bins_for_block(blocks, np.broadcast_to(Q, blocks.shape), cfg.qp.bin_margin)
    lo, hi = lo.reshape(-1, 64), hi.reshape(-1, 64)
    operators = np.stack([layout.enclosure_operator(p) for p in range(layout.n_patches)])
    shift = np.broadcast_to(LEVEL_SHIFT_COEFFS, lo.shape)
    hf = np.abs(blocks[:, ZIGZAG[HF_ZIGZAG_START:]]).sum(axis=1)
    lam2 = cfg.lambda2_base * (1.0 + cfg.lambda2_boost * hf)
    return _Problem(layout, dictionary.atoms, dictionary.atoms.T @ dictionary.atoms, operators, lo, hi, shift,
                    lam2, spatial_kernel(grid_coords(cfg.patch_size), cfg.sigma2), float(Q[0]), cfg,
                    cfg.omp_max_atoms or n, cfg.residual_tol(n))


def _solve_chunk(sl: slice, X: np.ndarray, prev, prob: _Problem):
    """One outer iteration (graph rebuild, OMP, QP) for patches ``sl``.

    Returns the new patches, the codes and a per-patch objective trace
    ``[previous code, chosen code, after QP]`` under this iteration's graph.
    """
    cfg = prob.cfg
    lam2 = prob.lam2[sl]
    Xs = project(X[sl], prob.operators[sl], prob.lo[sl], prob.hi[sl], prob.shift[sl])
    K, _ = batch_kernels(Xs, prob.spatial, cfg.sigma1_for(Xs, prob.dc_step), cfg.regularizer, cfg.weight_floor)
    means = Xs.mean(axis=1)
    support, coefs, _ = omp_batch(Xs - means[:, None], prob.atoms, prob.k_max, prob.tol, gram=prob.gram)
    used = max(1, int((support >= 0).sum(axis=1).max()))
    support, coefs = support[:, :used], coefs[:, :used]
    f_code = _objectives(Xs, support, coefs, means, prob.atoms, K, cfg.lambda1, lam2)
    f_prev = np.full(len(Xs), np.nan)
    if prev is not None:
        # greedy OMP is not guaranteed to lower the objective; keep the old code where it would not
        ps, pc, pm = prev[0][sl], prev[1][sl], prev[2][sl]
        f_prev = _objectives(Xs, ps, pc, pm, prob.atoms, K, cfg.lambda1, lam2)
        keep = f_prev < f_code
        if ps.shape[1] < support.shape[1]:
            ps = np.pad(ps, ((0, 0), (0, support.shape[1] - ps.shape[1])), constant_values=-1)
            pc = np.pad(pc, ((0, 0), (0, support.shape[1] - pc.shape[1])))
        elif ps.shape[1] > support.shape[1]:
            support = np.pad(support, ((0, 0), (0, ps.shape[1] - support.shape[1])), constant_values=-1)
            coefs = np.pad(coefs, ((0, 0), (0, ps.shape[1] - coefs.shape[1])))
        support = np.where(keep[:, None], ps, support)
        coefs = np.where(keep[:, None], pc, coefs)
        means = np.where(keep, pm, means)
        f_code = np.where(keep, f_prev, f_code)
    target = reconstruct(prob.atoms, support, coefs) + means[:, None]
    res = solve_box_qp(target, K, lam2, prob.operators[sl], prob.lo[sl], prob.hi[sl], prob.shift[sl],
                       x0=Xs, cfg=cfg.qp)
    f_x = _objectives(res.x, support, coefs, means, prob.atoms, K, cfg.lambda1, lam2)
    return res.x, support, coefs, means, res.iterations, res.diverged, np.stack([f_prev, f_code, f_x], axis=1)


def _merge(parts):
    """Concatenate per-chunk code arrays that may differ in padded width."""
    width = max(p.shape[1] for p in parts)
    fill = -1 if parts[0].dtype.kind == "i" else 0.0
    return np.concatenate([np.pad(p, ((0, 0), (0, width - p.shape[1])), constant_values=fill) for p in parts])


def soft_decode(qimg: QuantizedImage, dictionary: Dictionary, cfg: SolverConfig | None = None,
                params: LaplacianParams | None = None, return_float: bool = False):
    """Restore a JPEG-quantized image; returns ``(raster, SolverReport)``.

    The raster is 8-bit unless ``return_float`` is set. Results do not depend
    on ``cfg.threads``: chunks are fixed by ``cfg.chunk_size`` and merged in order.
    """
    cfg = cfg or SolverConfig()
    start = time.perf_counter()
    prob = _build_problem(qimg, dictionary, cfg)
    layout = prob.layout
    if params is None:
        params = fit_laplacian(qimg)
    x0_raster = coefficients_to_raster(mmse_coefficients(qimg, params), layout.width, layout.height, clamp=False)
    X0 = extract_patches(x0_raster, layout)
    hard = hard_decode(qimg)

    P = layout.n_patches
    chunks = [slice(i, min(i + cfg.chunk_size, P)) for i in range(0, P, cfg.chunk_size)]
    X = X0
    prev = None
    report = SolverReport()
    fallback = np.zeros(P, dtype=bool)
    traces = [[] for _ in range(P)]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        for it in range(cfg.max_outer_iters):
            results = list(pool.map(lambda sl: _solve_chunk(sl, X, prev, prob), chunks))
            Xn = np.concatenate([r[0] for r in results])
            support = _merge([r[1] for r in results])
            coefs = _merge([r[2] for r in results])
            means = np.concatenate([r[3] for r in results])
            qp_iters = np.concatenate([r[4] for r in results])
            diverged = np.concatenate([r[5] for r in results])
            objs = np.concatenate([r[6] for r in results])
            if np.any(diverged):
                Xn[diverged] = X0[diverged]
                fallback |= diverged
            change = np.linalg.norm(Xn - X, axis=1) / np.maximum(np.linalg.norm(X, axis=1), 1e-12)
            raster = assemble_patches(Xn, layout)
            X = extract_patches(raster, layout) if cfg.share_overlaps else Xn
            prev = (support, coefs, means)
            for p in range(P):
                traces[p].append([float(v) for v in objs[p] if np.isfinite(v)])
            report.iterations = it + 1
            report.mean_objective.append(float(np.mean(objs[:, 2])))
            report.qp_iterations.append([int(v) for v in qp_iters])
            report.psnr_vs_hard.append(_psnr(hard, to_uint8(raster[:qimg.height, :qimg.width])))
            if np.all(change < cfg.convergence_tol):
                report.converged = True
                break
    report.fallback_patches = [int(p) for p in np.flatnonzero(fallback)]
    report.objective_traces = traces
    out = np.clip(raster[:qimg.height, :qimg.width], 0.0, PEAK)
    report.wall_time_s = time.perf_counter() - start
    return (out if return_float else to_uint8(out)), report


def _psnr(a: np.ndarray, b: np.ndarray) -> float:
    mse = float(np.mean((np.asarray(a, float) - np.asarray(b, float)) ** 2))
    return float("inf") if mse == 0 else 10.0 * np.log10(PEAK**2 / mse)
