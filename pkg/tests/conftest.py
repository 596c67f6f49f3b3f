"""Shared fixtures and test helpers."""

import numpy as np
import pytest

from hrcm import Kernel, derive_stream
from hrcm.bench import ExperimentConfig, single_points


class ConstantKernel(Kernel):
    """Flat interaction: every pair contributes the same value.

    Exercises the internal kernel extension point; the resulting blocks are
    exactly rank one with constant-modulus factors.
    """

    tau = 0.0
    kparam = 0.0
    is_complex = False
    singular = False

    def __init__(self, value=1.0):
        self.value = float(value)

    def matrix(self, targets, sources, diag_offset=None):
        out = np.full((targets.shape[0], sources.shape[0]), self.value)
        if diag_offset is not None:
            m, n = out.shape
            i0 = max(0, -diag_offset)
            i1 = min(m, n - diag_offset)
            if i0 < i1:
                rows = np.arange(i0, i1)
                out[rows, rows + diag_offset] = 0.0
        return out

    def radial_modulus(self, R):
        return np.full_like(np.asarray(R, dtype=float), abs(self.value))

    def spec_string(self):
        return f"constant:{self.value:g}"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def constant_kernel():
    return ConstantKernel(1.0)


def pair_cloud(n, separation=16.0, side=8.0, seed=0):
    """Random target/source clouds in two side x side boxes."""
    g_t = derive_stream(seed, (97, 0))
    g_s = derive_stream(seed, (97, 1))
    tp = g_t.random((n, 2)) * side
    sp = g_s.random((n, 2)) * side
    sp[:, 0] += separation
    return tp, sp


def grid_point_set(n, seed=0, mode="jitter"):
    """N = 4^p points, one per finest cell, as the experiments place them."""
    cfg = ExperimentConfig(mode="single", n=n, seed=seed, points=mode)
    return single_points(cfg)


def relative_error(y, ref):
    return float(np.linalg.norm(y - ref) / np.linalg.norm(ref))
