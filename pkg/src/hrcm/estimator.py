"""Estimator-style front end: fit on points, transform weight vectors.

Follows the scikit-learn convention (get_params/set_params introspected
from __init__, fitted attributes with trailing underscores) without
requiring scikit-learn itself, so the operator drops into pipelines and
clones cleanly.
"""

from __future__ import annotations

import inspect
import math

import numpy as np

from .compress import SampleBudget
from .errors import ConfigurationError
from .geometry import PointSet, build_quadtree
from .hmatrix import ETA_DEFAULT, HmatrixOperator, TraversalConfig, direct_summation
from .kernels import Kernel, kernel_from_spec
from .validation import check_fitted, check_points, check_weights


class HierarchicalKernelSum:
    """Fast matrix-free kernel summation y_i = sum_j K(x_i, x_j) w_j.

    fit(X) builds the spatial partition over the points; transform(W)
    applies the hierarchically compressed operator to each row of W.
    Self pairs (j == i) are excluded, as required by singular kernels.

    Parameters
    ----------
    kernel : str or Kernel, e.g. "screened:0.01", "helmholtz:5", "log2d"
    samples : column/row sample count per admissible block (c = r)
    eta : admissibility ratio
    leaf_exponent : p0; leaves hold 4**p0 points in grid mode
    epsilon : singular-value cutoff for rank truncation
    domain_size : side length L of the bounding box (inferred when None)
    grid : "auto" picks grid layout when N = 4^p with balanced cells
    seed : base seed for the per-block sampling streams
    """

    def __init__(self, kernel="screened:0.01", samples=16, eta=ETA_DEFAULT,
                 leaf_exponent=2, epsilon=1e-8, domain_size=None,
                 grid="auto", seed=0):
        self.kernel = kernel
        self.samples = samples
        self.eta = eta
        self.leaf_exponent = leaf_exponent
        self.epsilon = epsilon
        self.domain_size = domain_size
        self.grid = grid
        self.seed = seed

    # -- sklearn parameter protocol -----------------------------------------
    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [p for p in sig.parameters if p != "self"]

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ConfigurationError(
                    f"invalid parameter {key!r} for {type(self).__name__}")
            setattr(self, key, value)
        return self

    # -- fitting --------------------------------------------------------------
    def _kernel(self) -> Kernel:
        if isinstance(self.kernel, Kernel):
            return self.kernel
        return kernel_from_spec(self.kernel)

    def fit(self, X, y=None):
        """Build the quadtree and traversal plan over the points."""
        X = check_points(X)
        n = X.shape[0]
        kernel = self._kernel()

        L = self.domain_size
        if L is None:
            L = float(max(X.max(), 0.0))
            L = L if L > 0 else 1.0
        if np.any(X < 0) or np.any(X > L):
            raise ConfigurationError("points must lie inside [0, domain_size]^2")

        use_grid = self.grid
        if use_grid == "auto":
            p = round(math.log(n, 4)) if n > 1 else 0
            use_grid = 4 ** p == n and p >= self.leaf_exponent
            if use_grid:
                try:
                    tree = build_quadtree(PointSet(X), L, self.leaf_exponent, grid=True)
                except ConfigurationError:
                    use_grid = False
            if not use_grid:
                tree = build_quadtree(PointSet(X), L, self.leaf_exponent, grid=False)
        else:
            tree = build_quadtree(PointSet(X), L, self.leaf_exponent, grid=bool(use_grid))

        budget = SampleBudget(c=self.samples, r=self.samples, epsilon=self.epsilon)
        cfg = TraversalConfig(budget=budget, eta=self.eta, p0=self.leaf_exponent)
        self.tree_ = tree
        self.kernel_ = kernel
        self.operator_ = HmatrixOperator(tree, tree, kernel, cfg, seed=self.seed)
        self.n_points_ = n
        self.domain_size_ = L
        return self

    # -- application ------------------------------------------------------------
    def transform(self, W):
        """Apply the compressed operator to each weight row of W.

        W has shape (N,) or (n_rhs, N); the result matches that shape.
        Compressed block factors are reused across rows.
        """
        check_fitted(self)
        W, was_1d = check_weights(W, self.n_points_)
        out = np.empty(W.shape, dtype=np.result_type(self.kernel_.dtype, W.dtype))
        for i, row in enumerate(W):
            out[i] = self.operator_.matvec(row)
        return out[0] if was_1d else out

    def fit_transform(self, X, W):
        return self.fit(X).transform(W)

    def exact_transform(self, W):
        """Direct O(N^2) summation for the same points (error reference)."""
        check_fitted(self)
        W, was_1d = check_weights(W, self.n_points_)
        ps = self.tree_.point_set
        out = np.empty(W.shape, dtype=np.result_type(self.kernel_.dtype, W.dtype))
        for i, row in enumerate(W):
            out[i] = direct_summation(ps, ps, self.kernel_, row)
        return out[0] if was_1d else out
