"""Point sets, the square-domain quadtree, admissibility, and path sampling.

The tree covers [0, L]^2 and splits every node into four children labeled
counter-clockwise from the lower-left quadrant (0 lower-left, 1 lower-right,
2 upper-right, 3 upper-left).  Point indices are permuted into depth-first
leaf order at build time; nodes own contiguous ranges of the permuted order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "PointSet",
    "TreeNode",
    "QuadTree",
    "build_quadtree",
    "diam",
    "dist",
    "is_admissible",
    "classify_pair",
    "random_path_sample",
]

# child digit -> (x half, y half), counter-clockwise from lower-left
CHILD_OFFSETS = ((0, 0), (1, 0), (1, 1), (0, 1))


@dataclass
class PointSet:
    """Coordinates with per-point densities q_i."""

    points: np.ndarray
    densities: np.ndarray = None

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ConfigurationError("points must be an (N, 2) array")
        n = self.points.shape[0]
        if n < 1:
            raise ConfigurationError("point set must be non-empty")
        if not np.all(np.isfinite(self.points)):
            raise ConfigurationError("point coordinates must be finite")
        if self.densities is None:
            self.densities = np.ones(n)
        else:
            self.densities = np.ascontiguousarray(self.densities)
            if self.densities.shape != (n,):
                raise ConfigurationError("densities must match points in length")
            if not np.all(np.isfinite(self.densities)):
                raise ConfigurationError("densities must be finite")

    def __len__(self):
        return self.points.shape[0]


@dataclass
class TreeNode:
    """One square cell of the partition.

    ``lo:hi`` is the node's contiguous slice of the tree-ordered points;
    the output accumulator segment of a target node is the same slice of
    the result vector.
    """

    level: int
    alpha: int
    beta: int
    x0: float
    y0: float
    size: float
    lo: int
    hi: int
    children: tuple = ()
    node_id: int = -1

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def npoints(self) -> int:
        return self.hi - self.lo

    @property
    def center(self) -> tuple[float, float]:
        return (self.x0 + 0.5 * self.size, self.y0 + 0.5 * self.size)

    @property
    def grid_coords(self) -> tuple[int, int]:
        return (self.alpha, self.beta)

    @property
    def cell_index(self) -> int:
        """Row-major linear cell index at this node's level."""
        return self.beta * (1 << self.level) + self.alpha


class QuadTree:
    """Fixed-depth 4-ary partition of [0, L]^2 indexing a PointSet."""

    def __init__(self, root, depth, domain_size, point_set, perm, grid, leaf_points):
        self.root = root
        self.depth = depth
        self.domain_size = domain_size
        self.point_set = point_set
        self.perm = perm                       # tree position -> original index
        self.inverse_perm = np.argsort(perm)
        self.points = point_set.points[perm]   # tree-ordered coordinates
        self.densities = point_set.densities[perm]
        self.grid = grid
        self.leaf_points = leaf_points         # points per leaf in grid mode

    def __len__(self):
        return len(self.point_set)

    def leaves(self):
        out = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                out.append(node)
            else:
                stack.extend(reversed(node.children))
        return out

    def scatter(self, y_tree: np.ndarray) -> np.ndarray:
        """Map a tree-ordered result back to original point order."""
        out = np.empty_like(y_tree)
        out[self.perm] = y_tree
        return out

    def gather(self, x_original: np.ndarray) -> np.ndarray:
        """Map an original-order vector into tree order."""
        return np.asarray(x_original)[self.perm]


def _leaf_keys(points: np.ndarray, L: float, depth: int) -> np.ndarray:
    """Depth-first leaf key of each point under the CCW child labeling."""
    n1 = 1 << depth
    h = L / n1
    ix = np.clip((points[:, 0] // h).astype(np.int64), 0, n1 - 1)
    iy = np.clip((points[:, 1] // h).astype(np.int64), 0, n1 - 1)
    keys = np.zeros(len(points), dtype=np.int64)
    for l in range(depth):
        shift = depth - 1 - l
        bx = (ix >> shift) & 1
        by = (iy >> shift) & 1
        digit = (by << 1) | (bx ^ by)
        keys = keys * 4 + digit
    return keys


def build_quadtree(ps: PointSet, L: float, p0: int = 2, grid: bool = True) -> QuadTree:
    """Partition ``ps`` over [0, L]^2 down to leaves of 4^p0 points.

    Grid mode requires N = 4^p (p >= p0) and exactly 4^p0 points falling in
    every leaf cell; general mode buckets any N >= 1 into the same
    fixed-depth tree and prunes empty cells.
    """
    if L <= 0:
        raise ConfigurationError("domain size must be positive")
    if p0 < 0:
        raise ConfigurationError("leaf exponent p0 must be >= 0")
    n = len(ps)
    pts = ps.points
    if np.any(pts < 0) or np.any(pts > L):
        raise ConfigurationError("points must lie inside [0, L]^2")

    if grid:
        p = round(math.log(n, 4))
        if 4 ** p != n:
            raise ConfigurationError(
                f"grid mode requires N to be a power of 4, got N={n}"
            )
        if p < p0:
            raise ConfigurationError(f"grid mode requires 4^p0 <= N (p0={p0}, p={p})")
        depth = p - p0
        leaf_points = 4 ** p0
    else:
        p = p0
        while 4 ** p < n:
            p += 1
        depth = p - p0
        leaf_points = None

    keys = _leaf_keys(pts, L, depth)
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]

    if grid:
        counts = np.bincount(sorted_keys, minlength=4 ** depth)
        if np.any(counts != leaf_points):
            raise ConfigurationError(
                "grid mode requires exactly 4^p0 points in every leaf cell"
            )

    counter = [0]

    def build(level, alpha, beta, prefix, lo, hi):
        size = L / (1 << level)
        node = TreeNode(level, alpha, beta, alpha * size, beta * size,
                        size, lo, hi, node_id=counter[0])
        counter[0] += 1
        if level < depth:
            span = depth - level - 1
            children = []
            for d, (bx, by) in enumerate(CHILD_OFFSETS):
                cpfx = prefix * 4 + d
                clo = int(np.searchsorted(sorted_keys, cpfx << (2 * span), side="left"))
                chi = int(np.searchsorted(sorted_keys, ((cpfx + 1) << (2 * span)) - 1,
                                          side="right"))
                if chi == clo and not grid:
                    continue  # prune empty cells
                children.append(build(level + 1, 2 * alpha + bx, 2 * beta + by,
                                      cpfx, clo, chi))
            node.children = tuple(children)
        return node

    root = build(0, 0, 0, 0, 0, n)
    return QuadTree(root, depth, float(L), ps, order, grid, leaf_points)


def diam(t: TreeNode) -> float:
    """Box diameter (the diagonal)."""
    return t.size * math.sqrt(2.0)


def dist(t1: TreeNode, t2: TreeNode) -> float:
    """Distance between box centers (the Chebyshev center of a square)."""
    c1 = t1.center
    c2 = t2.center
    return math.hypot(c1[0] - c2[0], c1[1] - c2[1])


def is_admissible(t1: TreeNode, t2: TreeNode, eta: float) -> bool:
    """max(diam) <= eta * dist, boundary equality admissible."""
    return max(diam(t1), diam(t2)) <= eta * dist(t1, t2)


def classify_pair(t1: TreeNode, t2: TreeNode) -> str:
    """Grid classification of a same-level pair: S, E, V, or LR.

    Matches admissibility at eta = sqrt(2)/2: S/E/V are exactly the
    non-admissible cells (self plus the eight surrounding neighbours).
    """
    if t1.level != t2.level:
        raise ConfigurationError("classify_pair requires nodes of the same level")
    da = abs(t1.alpha - t2.alpha)
    db = abs(t1.beta - t2.beta)
    if da == 0 and db == 0:
        return "S"
    if da + db == 1:
        return "E"
    if da == 1 and db == 1:
        return "V"
    return "LR"


_PATH_WEIGHTS: dict[int, np.ndarray] = {}


def _path_weights(levels: int) -> np.ndarray:
    w = _PATH_WEIGHTS.get(levels)
    if w is None:
        w = 4 ** np.arange(levels - 1, -1, -1, dtype=np.int64)
        _PATH_WEIGHTS[levels] = w
    return w


def random_path_sample(t: TreeNode, count: int, rng: np.random.Generator,
                       tree: QuadTree | None = None) -> np.ndarray:
    """Draw ``count`` point indices i.i.d. with replacement under ``t``.

    Each draw walks from ``t`` to a leaf picking a uniformly random child
    per level, then a uniformly random point inside the leaf.  Indices are
    positions in the tree ordering (absolute, not block-relative).  On a
    complete balanced subtree this is the uniform distribution over
    [t.lo, t.hi); the balanced case is drawn vectorized.
    """
    if count < 1:
        raise ConfigurationError("sample count must be >= 1")
    if t.npoints == 0:
        raise ConfigurationError("cannot sample from an empty node")

    balanced = tree is not None and tree.grid
    if balanced:
        levels = tree.depth - t.level
        leaf_np = tree.leaf_points
        if levels > 0:
            digits = rng.integers(0, 4, size=(count, levels))
            leaf_offset = digits @ _path_weights(levels)
        else:
            leaf_offset = np.zeros(count, dtype=np.int64)
        inside = rng.integers(0, leaf_np, size=count)
        return t.lo + leaf_offset * leaf_np + inside

    out = np.empty(count, dtype=np.int64)
    for k in range(count):
        node = t
        while not node.is_leaf:
            node = node.children[int(rng.integers(0, len(node.children)))]
        out[k] = node.lo + int(rng.integers(0, node.npoints))
    return out
