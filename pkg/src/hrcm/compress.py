"""Randomized low-rank compression of a single far-field block.

The pipeline samples c columns of the block (scaled sqrt(N/c)), then r rows
of that sketch (scaled sqrt(M/r)), takes the small SVD, forms left vectors
from the sketch, orthonormalizes them, estimates the right factor by a
Monte-Carlo product with the block's adjoint, and orthonormalizes that too.
The compressed apply is y = U (V* x) where V carries the singular-value
weights of the sampled core matrix.

Blocks are only ever touched through a BlockView, so no M x N array is
materialized along the production path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericalError

__all__ = [
    "SampleBudget",
    "BlockView",
    "DenseBlockView",
    "KernelBlockView",
    "CompressedBlock",
    "sample_columns",
    "sample_rows",
    "svd_small",
    "truncation_rank",
    "orthonormalize",
    "mc_matmul",
    "compress_block",
    "apply_compressed",
]

SVD_SIZE_CAP = 1024   # largest core matrix the small SVD accepts
QR_DROP_RTOL = 1e-12  # relative cutoff for rank-deficient QR columns


@dataclass(frozen=True)
class SampleBudget:
    """Column/row sample counts and the singular-value cutoff."""

    c: int
    r: int
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.c < 1 or self.r < 1:
            raise ConfigurationError("sample counts must be >= 1")
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be positive")


class BlockView:
    """On-the-fly view of one interaction block.

    Subclasses provide ``shape``, ``dtype``, ``columns``, ``rows`` and
    ``dense``; entries are never stored globally.
    """

    shape: tuple[int, int]
    dtype: np.dtype

    def columns(self, idx) -> np.ndarray:
        raise NotImplementedError

    def rows(self, idx) -> np.ndarray:
        raise NotImplementedError

    def dense(self) -> np.ndarray:
        raise NotImplementedError

    def adjoint(self) -> "BlockView":
        return _AdjointView(self)


class _AdjointView(BlockView):
    """Conjugate-transpose view delegating to the parent block."""

    def __init__(self, parent: BlockView):
        self.parent = parent
        self.shape = (parent.shape[1], parent.shape[0])
        self.dtype = parent.dtype

    def columns(self, idx):
        return self.parent.rows(idx).conj().T

    def rows(self, idx):
        return self.parent.columns(idx).conj().T

    def dense(self):
        return self.parent.dense().conj().T

    def adjoint(self):
        return self.parent


class DenseBlockView(BlockView):
    """Wrap an explicit matrix (tests and validation-scale analysis)."""

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix)
        if self.matrix.ndim != 2:
            raise ConfigurationError("block must be 2-D")
        self.shape = self.matrix.shape
        self.dtype = self.matrix.dtype

    def columns(self, idx):
        return self.matrix[:, np.asarray(idx, dtype=np.intp)]

    def rows(self, idx):
        return self.matrix[np.asarray(idx, dtype=np.intp), :]

    def dense(self):
        return self.matrix


class KernelBlockView(BlockView):
    """Kernel-backed block K(t_i, s_j), optionally scaled by source densities.

    ``density_included=True`` bakes q_j into the entries; the hierarchical
    product keeps it False and folds densities into the multiplied vector
    instead, which keeps column norms density-free for uniform sampling.
    """

    def __init__(self, kernel, target_points, source_points,
                 source_densities=None, density_included=False):
        self.kernel = kernel
        self.target_points = np.asarray(target_points, dtype=np.float64)
        self.source_points = np.asarray(source_points, dtype=np.float64)
        self.density_included = density_included
        if density_included:
            if source_densities is None:
                raise ConfigurationError("density_included requires densities")
            self.source_densities = np.asarray(source_densities)
            self.dtype = np.result_type(kernel.dtype, self.source_densities.dtype)
        else:
            self.source_densities = None
            self.dtype = kernel.dtype
        self.shape = (self.target_points.shape[0], self.source_points.shape[0])

    def columns(self, idx):
        idx = np.asarray(idx, dtype=np.intp)
        out = self.kernel.matrix(self.target_points, self.source_points[idx])
        if self.density_included:
            out = out * self.source_densities[idx][None, :]
        return out

    def rows(self, idx):
        idx = np.asarray(idx, dtype=np.intp)
        out = self.kernel.matrix(self.target_points[idx], self.source_points)
        if self.density_included:
            out = out * self.source_densities[None, :]
        return out

    def dense(self):
        out = self.kernel.matrix(self.target_points, self.source_points)
        if self.density_included:
            out = out * self.source_densities[None, :]
        return out


def _uniform_indices(n, count, rng, sampler):
    if sampler is not None:
        idx = np.asarray(sampler(count, rng), dtype=np.intp)
        if idx.shape != (count,):
            raise ConfigurationError("sampler returned a wrong-shaped index set")
        return idx
    return rng.integers(0, n, size=count).astype(np.intp)


def sample_columns(A: BlockView, c: int, rng, sampler=None) -> np.ndarray:
    """c i.i.d. uniform columns of A, each scaled by sqrt(N/c)."""
    if c < 1:
        raise ConfigurationError("column sample count must be >= 1")
    n = A.shape[1]
    idx = _uniform_indices(n, c, rng, sampler)
    return A.columns(idx) * math.sqrt(n / c)


def sample_rows(C: np.ndarray, r: int, rng, sampler=None) -> np.ndarray:
    """r i.i.d. uniform rows of the dense sketch C, scaled by sqrt(M/r)."""
    if r < 1:
        raise ConfigurationError("row sample count must be >= 1")
    m = C.shape[0]
    idx = _uniform_indices(m, r, rng, sampler)
    return C[idx] * math.sqrt(m / r)


def svd_small(Cr: np.ndarray, cap: int = SVD_SIZE_CAP):
    """Deterministic SVD of the sampled core, Cr = U diag(s) V*.

    Returns (U, s, V) with s descending and the sign convention that the
    first nonzero component of each left singular vector is real positive.
    """
    Cr = np.asarray(Cr)
    if max(Cr.shape) > cap:
        raise ConfigurationError(
            f"core matrix {Cr.shape} exceeds the small-SVD cap {cap}"
        )
    try:
        U, s, Vh = np.linalg.svd(Cr, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("small SVD failed to converge") from exc
    V = Vh.conj().T
    # rotate each pair so the first nonzero component of U's column is positive
    nonzero = U != 0
    first = np.argmax(nonzero, axis=0)
    has_nz = nonzero.any(axis=0)
    lead = U[first, np.arange(U.shape[1])]
    phases = np.ones(U.shape[1], dtype=U.dtype)
    np.divide(lead, np.abs(lead), out=phases, where=has_nz & (lead != 0))
    U *= np.conj(phases)[None, :]
    V *= np.conj(phases)[None, :]
    return U, s, V


def truncation_rank(sigma: np.ndarray, epsilon: float) -> int:
    """Number of singular values strictly above epsilon."""
    sigma = np.asarray(sigma)
    if sigma.size and np.any(np.diff(sigma) > 0):
        raise ConfigurationError("singular values must be sorted descending")
    return int(np.count_nonzero(sigma > epsilon))


def orthonormalize(B: np.ndarray, rtol: float = QR_DROP_RTOL):
    """Economy QR with real-positive R diagonal.

    Trailing rank-deficient columns (|R_jj| below rtol relative to the
    largest diagonal entry) are dropped from the returned factors, so Q
    always has orthonormal columns spanning the numerically independent
    leading block of B.
    """
    B = np.asarray(B)
    if B.ndim != 2:
        raise ConfigurationError("orthonormalize expects a matrix")
    if B.shape[1] == 0:
        return B.copy(), np.zeros((0, 0), dtype=B.dtype)
    Q, R = np.linalg.qr(B)
    d = np.diagonal(R).copy()
    scale = np.abs(d).max() if d.size else 0.0
    keep = 0
    for j in range(d.size):
        if abs(d[j]) > rtol * scale or (scale == 0.0 and abs(d[j]) > 0.0):
            keep += 1
        else:
            break
    Q = Q[:, :keep]
    R = R[:keep, :]
    d = d[:keep]
    phases = np.ones(keep, dtype=R.dtype)
    nz = np.abs(d) > 0
    phases[nz] = d[nz] / np.abs(d[nz])
    return Q * phases[None, :], R * np.conj(phases)[:, None]


def mc_matmul(Astar: BlockView, U: np.ndarray, c: int, rng,
              sampler=None) -> np.ndarray:
    """Monte-Carlo estimate of Astar @ U with c sampled index pairs.

    Each draw pairs a uniform column of Astar with the matching row of U;
    dividing by c * (1/M) makes the estimate unbiased.
    """
    if c < 1:
        raise ConfigurationError("sample count must be >= 1")
    m = Astar.shape[1]
    if U.shape[0] != m:
        raise ConfigurationError("inner dimensions of the sampled product differ")
    idx = _uniform_indices(m, c, rng, sampler)
    cols = Astar.columns(idx)
    return cols @ (U[idx] * (m / c))


@dataclass
class CompressedBlock:
    """Factors approximating one block; apply(x) = U (V* x).

    U is column-orthonormal; V already carries the scale (for the default
    scheme its columns are sigma_t times orthonormal right vectors, for the
    projector scheme it is the raw Monte-Carlo adjoint estimate).  ``sigma``
    holds the sampled-core singular values kept after truncation.
    """

    U: np.ndarray
    V: np.ndarray
    sigma: np.ndarray
    rank: int
    shape: tuple[int, int]
    scheme: str = "sigma"
    _vq: np.ndarray | None = field(default=None, repr=False)
    _rv: np.ndarray | None = field(default=None, repr=False)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return apply_compressed(self, x)

    def orthonormal_factors(self):
        """Orthonormal right factor and its triangular bookkeeping matrix."""
        if self._vq is None:
            self._vq, self._rv = orthonormalize(self.V)
        return self._vq, self._rv


def apply_compressed(block: CompressedBlock, x: np.ndarray) -> np.ndarray:
    """y = U (V* x); the zero-rank block is the zero map."""
    x = np.asarray(x)
    m, n = block.shape
    if x.shape != (n,):
        raise ConfigurationError(f"vector length {x.shape} does not match block width {n}")
    if block.rank == 0:
        return np.zeros(m, dtype=np.result_type(block.U.dtype, x.dtype))
    return block.U @ (block.V.conj().T @ x)


def _zero_block(A: BlockView, sigma_dtype=float) -> CompressedBlock:
    m, n = A.shape
    return CompressedBlock(
        U=np.zeros((m, 0), dtype=A.dtype),
        V=np.zeros((n, 0), dtype=A.dtype),
        sigma=np.zeros(0, dtype=sigma_dtype),
        rank=0,
        shape=(m, n),
    )


def compress_block(A: BlockView, budget: SampleBudget, rng,
                   col_sampler=None, row_sampler=None, mc_sampler=None,
                   scheme: str = "sigma", exact_adjoint: bool = False) -> CompressedBlock:
    """Run the full sampled-compression pipeline on one block.

    ``col_sampler``/``row_sampler``/``mc_sampler`` override the uniform
    index draws (the hierarchical product passes tree random-path
    samplers).  ``scheme='projector'`` keeps the raw Monte-Carlo right
    factor instead of the sigma-weighted orthonormal one;
    ``exact_adjoint=True`` computes A* U densely (validation only).
    """
    if scheme not in ("sigma", "projector"):
        raise ConfigurationError(f"unknown compression scheme {scheme!r}")
    m, n = A.shape

    C = sample_columns(A, budget.c, rng, sampler=col_sampler)
    Cr = sample_rows(C, budget.r, rng, sampler=row_sampler)
    _, s, Vr = svd_small(Cr)
    l = min(budget.r, budget.c, truncation_rank(s, budget.epsilon))
    if l == 0:
        return _zero_block(A)

    U, _ = orthonormalize(C @ Vr[:, :l])
    l = U.shape[1]
    if l == 0:
        return _zero_block(A)
    sigma = s[:l].copy()

    if exact_adjoint:
        Vraw = A.dense().conj().T @ U
    else:
        Vraw = mc_matmul(A.adjoint(), U, budget.c, rng, sampler=mc_sampler)

    Vq, Rv = orthonormalize(Vraw)
    lq = Vq.shape[1]
    if lq == 0:
        return _zero_block(A)
    if lq < l:
        U = U[:, :lq]
        sigma = sigma[:lq]
        l = lq

    if scheme == "sigma":
        V = Vq * sigma[None, :]
    else:
        V = Vraw[:, :l]
    return CompressedBlock(U=U, V=V, sigma=sigma, rank=l, shape=(m, n),
                           scheme=scheme, _vq=Vq, _rv=Rv)
