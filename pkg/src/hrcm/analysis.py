"""Executable pieces of the sampling theory.

Optimal/nearly-optimal column-sampling probabilities, the closed-form
expectation of the Gram sketch error, its Monte-Carlo validation, the
uniform-sampling beta factor for well-separated sets, the separation error
bound, and the relative-error statistics used by the experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .compress import BlockView
from .errors import ConfigurationError

__all__ = [
    "SeparatedPairGeometry",
    "ErrorStats",
    "optimal_probabilities",
    "gram_error_expectation",
    "gram_error_trials",
    "empirical_gram_error",
    "uniform_sampling_beta",
    "separation_error_bound",
    "error_stats",
]


@dataclass(frozen=True)
class SeparatedPairGeometry:
    """Common diameter ``a`` and center distance ``delta`` of two boxes."""

    a: float
    delta: float

    def __post_init__(self):
        if not (0 < self.a < self.delta):
            raise ConfigurationError("separated pair requires 0 < a < delta")

    @property
    def eta(self) -> float:
        return self.a / self.delta

    @classmethod
    def from_boxes(cls, side: float, separation: float) -> "SeparatedPairGeometry":
        """Geometry of two axis-aligned side x side boxes.

        Uses the box diagonal as the diameter, which brackets every
        pairwise distance in [delta - a, delta + a].
        """
        return cls(a=side * math.sqrt(2.0), delta=separation)


@dataclass
class ErrorStats:
    """Sample mean and unbiased variance of per-realization relative errors."""

    mean: float
    variance: float
    realizations: int
    errors: np.ndarray = field(repr=False, default=None)


def _as_dense(A) -> np.ndarray:
    if isinstance(A, BlockView):
        return A.dense()
    return np.asarray(A)


def optimal_probabilities(A) -> np.ndarray:
    """Column-sampling distribution p_j = |A^(j)|^2 / ||A||_F^2.

    Minimizes the expected squared Frobenius error of the Gram sketch;
    validation-only (costs a full pass over the matrix).
    """
    M = _as_dense(A)
    sq = np.sum(np.abs(M) ** 2, axis=0)
    total = sq.sum()
    if total == 0:
        raise ConfigurationError("optimal probabilities are undefined for a zero matrix")
    return sq / total


def gram_error_expectation(A, c: int) -> float:
    """Closed form E ||AA* - CC*||_F^2 = (1/c)(||A||_F^4 - ||AA*||_F^2)
    under optimal-probability sampling of c columns."""
    M = _as_dense(A)
    if c < 1:
        raise ConfigurationError("sample count must be >= 1")
    fro2 = float(np.sum(np.abs(M) ** 2))
    gram = M @ M.conj().T
    gram2 = float(np.sum(np.abs(gram) ** 2))
    return (fro2 ** 2 - gram2) / c


def gram_error_trials(A, c: int, probs, trials: int, rng) -> np.ndarray:
    """Per-trial values of ||AA* - CC*||_F^2 with sampling distribution probs.

    Columns are drawn i.i.d. with replacement and scaled by 1/sqrt(c p_i);
    probs=None means uniform.  Intended for validation-scale matrices.
    """
    M = _as_dense(A)
    m, n = M.shape
    if max(m, n) > 256:
        raise ConfigurationError("gram-error validation is limited to 256 x 256 blocks")
    if trials < 1:
        raise ConfigurationError("trials must be >= 1")
    if probs is None:
        p = np.full(n, 1.0 / n)
    else:
        p = np.asarray(probs, dtype=float)
        if p.shape != (n,) or np.any(p < 0):
            raise ConfigurationError("probs must be a non-negative length-N vector")
        p = p / p.sum()
    gram = M @ M.conj().T
    out = np.empty(trials)
    for t in range(trials):
        idx = rng.choice(n, size=c, replace=True, p=p)
        C = M[:, idx] / np.sqrt(c * p[idx])[None, :]
        diff = gram - C @ C.conj().T
        out[t] = float(np.sum(np.abs(diff) ** 2))
    return out


def empirical_gram_error(A, c: int, probs, trials: int, rng) -> float:
    """Monte-Carlo mean of ||AA* - CC*||_F^2 (see gram_error_trials)."""
    return float(gram_error_trials(A, c, probs, trials, rng).mean())


def uniform_sampling_beta(kernel, geom: SeparatedPairGeometry) -> float:
    """beta = |K(delta + a)|^2 / |K(delta - a)|^2 on the kernel's radial profile.

    The factor by which uniform sampling is nearly optimal on a
    well-separated block; meaningful for monotonically decaying |K|.
    """
    if geom.delta <= geom.a:
        raise ConfigurationError("beta requires delta > a")
    far = float(kernel.radial_modulus(geom.delta + geom.a))
    near = float(kernel.radial_modulus(geom.delta - geom.a))
    if near == 0:
        raise ConfigurationError("kernel modulus vanishes at delta - a")
    return (far / near) ** 2


def separation_error_bound(kernel, geom: SeparatedPairGeometry,
                           M: int, N: int, c: int) -> float:
    """Expected Gram-error bound coefficient per unit ||A||_F^2.

    (delta/2)^(-tau) (1 + 2 k delta) / |K(delta + a)| * sqrt(M/N)
    * (1/sqrt(c)) * 2 eta / (2 - eta).
    """
    if min(M, N, c) < 1:
        raise ConfigurationError("M, N, c must be positive")
    delta, a = geom.delta, geom.a
    kmod = float(kernel.radial_modulus(delta + a))
    if kmod == 0:
        raise ConfigurationError("kernel modulus vanishes at delta + a")
    const = ((delta / 2.0) ** (-kernel.tau)
             * (1.0 + 2.0 * kernel.kparam * delta) / kmod
             * math.sqrt(M) / math.sqrt(N))
    eta = geom.eta
    return const / math.sqrt(c) * (2.0 * eta / (2.0 - eta))


def error_stats(reference: np.ndarray, realizations) -> ErrorStats:
    """Relative 2-norm error of each realization against the reference."""
    ref = np.asarray(reference)
    norm = float(np.linalg.norm(ref))
    if norm == 0:
        raise ConfigurationError("error statistics need a nonzero reference")
    errs = np.array([float(np.linalg.norm(np.asarray(y) - ref)) / norm
                     for y in realizations])
    if errs.size < 1:
        raise ConfigurationError("at least one realization is required")
    variance = float(errs.var(ddof=1)) if errs.size > 1 else 0.0
    return ErrorStats(mean=float(errs.mean()), variance=variance,
                      realizations=errs.size, errors=errs)
