"""Interaction kernels and their smoothness metadata.

Each kernel knows its algebraic decay exponent ``tau`` and oscillation
parameter ``kparam`` (both >= 0), whether its values are complex, and how
to evaluate dense sub-blocks of the interaction matrix on the fly.  No
global matrix is ever materialized by this module.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod

import numpy as np

from .errors import CoincidentPointsError, ConfigurationError

__all__ = [
    "Kernel",
    "Log2D",
    "ScreenedCoulomb",
    "Helmholtz",
    "kernel_from_spec",
    "rank_estimate",
]


def _as_point(r) -> np.ndarray:
    p = np.asarray(r, dtype=float).reshape(2)
    if not np.all(np.isfinite(p)):
        raise ConfigurationError("point coordinates must be finite")
    return p


class Kernel(ABC):
    """Evaluable interaction function K(r, r') over 2-D points.

    Subclasses set ``tau`` (algebraic decay exponent), ``kparam``
    (oscillation/growth rate, 1/length), ``is_complex`` and ``singular``
    (whether K diverges at zero separation).
    """

    tau: float = 0.0
    kparam: float = 0.0
    is_complex: bool = False
    singular: bool = True

    @property
    def dtype(self):
        return np.complex128 if self.is_complex else np.float64

    @abstractmethod
    def matrix(self, targets: np.ndarray, sources: np.ndarray,
               diag_offset: int | None = None) -> np.ndarray:
        """Dense block K(t_i, s_j) for row points ``targets`` and column
        points ``sources``.

        ``diag_offset`` marks the pairs (i, j) with j == i + diag_offset as
        self pairs: they are skipped (set to 0) instead of evaluated.  Any
        other zero-separation pair raises CoincidentPointsError for
        singular kernels.
        """

    @abstractmethod
    def radial_modulus(self, R):
        """|K| as a function of separation R, used by the separation
        analysis (beta ratio, error bounds)."""

    @abstractmethod
    def spec_string(self) -> str:
        """CLI spelling of this kernel."""

    def eval(self, r, rp):
        """Scalar evaluation K(r, rp) for two points."""
        t = _as_point(r)[None, :]
        s = _as_point(rp)[None, :]
        return self.matrix(t, s)[0, 0]

    # shared distance helper -------------------------------------------------
    def _separations(self, targets, sources, diag_offset):
        dx = targets[:, 0, None] - sources[None, :, 0]
        dy = targets[:, 1, None] - sources[None, :, 1]
        R = np.sqrt(dx * dx + dy * dy)
        mask = None
        if diag_offset is not None:
            m, n = R.shape
            i0 = max(0, -diag_offset)
            i1 = min(m, n - diag_offset)
            if i0 < i1:
                rows = np.arange(i0, i1)
                mask = (rows, rows + diag_offset)
                R[mask] = 1.0  # placeholder, zeroed after evaluation
        if self.singular and np.any(R == 0.0):
            raise CoincidentPointsError(
                "singular kernel evaluated at coincident points; "
                "self pairs must be excluded by the caller"
            )
        return dx, dy, R, mask


class ScreenedCoulomb(Kernel):
    """Screened 1/R interaction, K(R) = exp(-gamma R) / R."""

    tau = 1.0
    kparam = 0.0
    is_complex = False
    singular = True

    def __init__(self, gamma: float = 0.01):
        if gamma < 0:
            raise ConfigurationError("decay rate gamma must be >= 0")
        self.gamma = float(gamma)

    def matrix(self, targets, sources, diag_offset=None):
        _, _, R, mask = self._separations(targets, sources, diag_offset)
        out = np.exp(-self.gamma * R) / R
        if mask is not None:
            out[mask] = 0.0
        return out

    def radial_modulus(self, R):
        R = np.asarray(R, dtype=float)
        return np.exp(-self.gamma * R) / R

    def spec_string(self):
        return f"screened:{self.gamma:g}"

    def __repr__(self):
        return f"ScreenedCoulomb(gamma={self.gamma!r})"


class Helmholtz(Kernel):
    """Outgoing wave interaction, K(R) = exp(-i k R) / R (complex)."""

    tau = 1.0
    is_complex = True
    singular = True

    def __init__(self, k: float):
        if k < 0:
            raise ConfigurationError("wave number k must be >= 0")
        self.k = float(k)
        self.kparam = float(k)

    def matrix(self, targets, sources, diag_offset=None):
        _, _, R, mask = self._separations(targets, sources, diag_offset)
        out = np.exp(-1j * self.k * R) / R
        if mask is not None:
            out[mask] = 0.0
        return out

    def radial_modulus(self, R):
        R = np.asarray(R, dtype=float)
        return 1.0 / R

    def spec_string(self):
        return f"helmholtz:{self.k:g}"

    def __repr__(self):
        return f"Helmholtz(k={self.k!r})"


class Log2D(Kernel):
    """Half-plane image form of the 2-D logarithmic interaction.

    K = log sqrt((x-x')^2 + (y+y')^2) - log sqrt((x-x')^2 + (y-y')^2).
    Not radially symmetric; it is symmetric under simultaneous exchange
    of primed and unprimed coordinates.  Points are expected to have
    y > 0 (the image line y = 0 is the other singular locus).
    """

    tau = 0.0
    kparam = 0.0
    is_complex = False
    singular = True

    def matrix(self, targets, sources, diag_offset=None):
        dx, dy, R, mask = self._separations(targets, sources, diag_offset)
        yp = targets[:, 1, None] + sources[None, :, 1]
        Rimg = np.sqrt(dx * dx + yp * yp)
        if np.any(Rimg == 0.0):
            raise CoincidentPointsError(
                "log kernel evaluated on the image singularity (y + y' = 0)"
            )
        out = np.log(Rimg) - np.log(R)
        if mask is not None:
            out[mask] = 0.0
        return out

    def radial_modulus(self, R):
        # Radial profile of the direct term; the analysis helpers only
        # require this for monotonically decaying kernels.
        R = np.asarray(R, dtype=float)
        return np.abs(np.log(R))

    def spec_string(self):
        return "log2d"

    def __repr__(self):
        return "Log2D()"


def kernel_from_spec(spec: str) -> Kernel:
    """Parse a CLI kernel string: ``log2d``, ``screened:GAMMA``, ``helmholtz:K``."""
    s = spec.strip().lower()
    if s == "log2d":
        return Log2D()
    name, sep, arg = s.partition(":")
    if name == "screened":
        try:
            return ScreenedCoulomb(float(arg) if sep else 0.01)
        except ValueError as exc:
            raise ConfigurationError(f"bad screened kernel spec {spec!r}") from exc
    if name == "helmholtz":
        if not sep:
            raise ConfigurationError("helmholtz kernel needs a wave number, e.g. helmholtz:5")
        try:
            return Helmholtz(float(arg))
        except ValueError as exc:
            raise ConfigurationError(f"bad helmholtz kernel spec {spec!r}") from exc
    raise ConfigurationError(f"unknown kernel spec {spec!r}")


def rank_estimate(m: int, d: int = 2) -> int:
    """Number of terms in an order-m Taylor expansion in d dimensions.

    K(m) = sum_{p=0}^{m-1} C(d-1+p, p); for d = 2 this is m(m+1)/2.
    """
    if m < 1 or d < 1:
        raise ConfigurationError("rank_estimate requires m >= 1 and d >= 1")
    return sum(math.comb(d - 1 + p, p) for p in range(m))
