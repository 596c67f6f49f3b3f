"""Hierarchical block traversal, direct oracle, and the block census.

The traversal follows the one-way top-down recursion: a block small enough
(or rooted at leaves) is evaluated directly; an admissible block is
dispatched to the sampled low-rank product; anything else recurses over the
4 x 4 child pairs.  Tasks are collected into a plan first, then executed in
canonical plan order, so results are reproducible regardless of execution
interleaving and random streams are keyed by block identity.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import _fastpath
from .compress import KernelBlockView, SampleBudget, compress_block
from .errors import ConfigurationError
from .geometry import (PointSet, QuadTree, TreeNode, classify_pair,
                       is_admissible, random_path_sample)
from .streams import NS_BLOCK, derive_stream

__all__ = [
    "TraversalConfig",
    "BlockTask",
    "TraversalPlan",
    "CensusTable",
    "plan_blocks",
    "block_census",
    "direct_summation",
    "direct_product",
    "low_rank_product",
    "HmatrixOperator",
    "hmatrix_product",
    "pair_coverage",
]

ETA_DEFAULT = math.sqrt(2.0) / 2.0


@dataclass(frozen=True)
class TraversalConfig:
    """Admissibility ratio, sample budget, and the direct-evaluation cutoff.

    ``direct_threshold`` is the block size at or below which the direct
    product runs (default: the tree's leaf size, 4^p0 in grid mode); pass
    math.inf to disable compression entirely.
    """

    budget: SampleBudget
    eta: float = ETA_DEFAULT
    p0: int | None = None
    direct_threshold: float | None = None

    def __post_init__(self):
        if self.eta <= 0:
            raise ConfigurationError("eta must be positive")

    def threshold_for(self, tree: QuadTree) -> float:
        if self.direct_threshold is not None:
            return self.direct_threshold
        if tree.grid:
            return tree.leaf_points
        if self.p0 is not None:
            return 4 ** self.p0
        return max(node.npoints for node in tree.leaves())


@dataclass
class BlockTask:
    """One executed block: a target/source node pair at a level.

    ``kind`` is the execution route (DIRECT or LR); ``pair_class`` the
    grid classification (S/E/V/LR).  An LR task whose block is too small
    for the sample budget keeps its LR class but is evaluated exactly
    (``lr_fallback``).
    """

    target: TreeNode
    source: TreeNode
    level: int
    kind: str
    pair_class: str
    lr_fallback: bool = False


@dataclass
class TraversalPlan:
    tasks: list
    census: dict            # level -> {"S": n, "E": n, "V": n, "LR": n} of visited blocks
    maxlevel: int
    threshold: float
    eta: float

    @property
    def direct_tasks(self):
        return [t for t in self.tasks if t.kind == "DIRECT" or t.lr_fallback]

    @property
    def lowrank_tasks(self):
        return [t for t in self.tasks if t.kind == "LR" and not t.lr_fallback]


def plan_blocks(tree_t: QuadTree, tree_s: QuadTree, cfg: TraversalConfig) -> TraversalPlan:
    """Collect the executed block list and the visited-block census."""
    threshold = cfg.threshold_for(tree_t)
    min_compress = max(cfg.budget.c, cfg.budget.r)
    tasks: list[BlockTask] = []
    census: dict[int, dict] = defaultdict(lambda: {"S": 0, "E": 0, "V": 0, "LR": 0})
    maxlevel = 0

    def visit(t: TreeNode, s: TreeNode, level: int):
        nonlocal maxlevel
        maxlevel = max(maxlevel, level)
        cls = classify_pair(t, s)
        census[level][cls] += 1
        small = min(t.npoints, s.npoints) <= threshold
        if small or t.is_leaf or s.is_leaf:
            tasks.append(BlockTask(t, s, level, "DIRECT", cls))
            return
        if is_admissible(t, s, cfg.eta):
            fallback = min(t.npoints, s.npoints) <= min_compress
            tasks.append(BlockTask(t, s, level, "LR", cls, lr_fallback=fallback))
            return
        for tc in t.children:
            for sc in s.children:
                visit(tc, sc, level + 1)

    visit(tree_t.root, tree_s.root, 0)
    return TraversalPlan(tasks, dict(census), maxlevel, threshold, cfg.eta)


@dataclass
class CensusTable:
    """Predicted per-level block counts from the S/E/V recurrence.

    ``lr`` counts low-rank blocks created at each level; ``lr_cumulative``
    projects earlier LR blocks down (times 16 per level) so that
    S + E + V + lr_cumulative = 16^level at every level.  Work totals are
    operation-count estimates: direct work counts the 16 leaf-level child
    pairs of each bottom non-admissible block at (4^p0)^2 each, low-rank
    work sums 4^(p-level) over compressed blocks.
    """

    p: int
    p0: int
    levels: list = field(default_factory=list)  # dicts: level, S, E, V, LR, LR_cumulative
    direct_ops: int = 0
    lowrank_ops: int = 0

    def counts(self, level: int) -> dict:
        return self.levels[level]

    def sum_check(self, level: int) -> bool:
        row = self.levels[level]
        total = row["S"] + row["E"] + row["V"] + row["LR_cumulative"]
        return total == 16 ** level


def block_census(p: int, p0: int) -> CensusTable:
    """Iterate the subdivision recurrence from the root self-interaction.

    One S block spawns (4 S, 8 E, 4 V) child pairs, one E spawns
    (2 E, 2 V, 12 LR), one V spawns (1 V, 15 LR); recursion stops at
    level p - p0 where everything remaining is evaluated directly.
    """
    if p < p0:
        raise ConfigurationError("census requires p >= p0")
    depth = p - p0
    table = CensusTable(p=p, p0=p0)
    s, e, v, lr, cum = 1, 0, 0, 0, 0
    table.levels.append({"level": 0, "S": 1, "E": 0, "V": 0, "LR": 0,
                         "LR_cumulative": 0})
    for level in range(1, depth + 1):
        s, e, v, lr = (4 * s,
                       8 * s + 2 * e,
                       4 * s + 2 * e + v,
                       12 * e + 15 * v)
        cum = 16 * cum + lr
        table.levels.append({"level": level, "S": s, "E": e, "V": v,
                             "LR": lr, "LR_cumulative": cum})
    if depth == 0:
        table.direct_ops = 16 ** p0
        table.lowrank_ops = 0
        return table
    bottom = table.levels[depth - 1]
    table.direct_ops = 16 * (16 ** p0) * (bottom["S"] + bottom["E"] + bottom["V"])
    table.lowrank_ops = sum(row["LR"] * 4 ** (p - row["level"])
                            for row in table.levels[:depth])
    return table


def direct_summation(targets: PointSet, sources: PointSet, kernel, x) -> np.ndarray:
    """Exact O(MN) reference: out_i = sum_j K(t_i, s_j) q_j x_j.

    When targets and sources are the same set, the singular self pairs
    i == j are excluded from the sum.
    """
    x = np.asarray(x)
    if x.shape != (len(sources),):
        raise ConfigurationError("x must have one entry per source point")
    w = sources.densities * x
    self_pairs = targets is sources
    return _fastpath.matvec(kernel, targets.points, sources.points, w, self_pairs)


def _accumulate_direct(kernel, tree_t, tree_s, tasks, w_tree, out):
    """Evaluate a list of direct blocks grouped by target node."""
    if not tasks:
        return
    groups: dict[int, list] = {}
    order: list[int] = []
    for task in tasks:
        key = task.target.node_id
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(task)

    n_blocks = len(tasks)
    tlo = np.empty(n_blocks, dtype=np.int64)
    thi = np.empty(n_blocks, dtype=np.int64)
    slo = np.empty(n_blocks, dtype=np.int64)
    shi = np.empty(n_blocks, dtype=np.int64)
    group_ptr = np.zeros(len(order) + 1, dtype=np.int64)
    k = 0
    for g, key in enumerate(order):
        for task in groups[key]:
            tlo[k] = task.target.lo
            thi[k] = task.target.hi
            slo[k] = task.source.lo
            shi[k] = task.source.hi
            k += 1
        group_ptr[g + 1] = k
    same_set = tree_t is tree_s
    _fastpath.block_list_apply(kernel, tree_t.points, tree_s.points, w_tree,
                               same_set, group_ptr, tlo, thi, slo, shi, out)


def direct_product(t: TreeNode, s: TreeNode, kernel, tree_t, tree_s, w_tree, out):
    """Exact evaluation of one block, accumulated into the target segment."""
    same = tree_t is tree_s
    group_ptr = np.array([0, 1], dtype=np.int64)
    _fastpath.block_list_apply(
        kernel, tree_t.points, tree_s.points, w_tree, same, group_ptr,
        np.array([t.lo], dtype=np.int64), np.array([t.hi], dtype=np.int64),
        np.array([s.lo], dtype=np.int64), np.array([s.hi], dtype=np.int64),
        out)


def _block_stream(seed, realization, task):
    return derive_stream(seed, (NS_BLOCK, realization, task.level,
                                task.target.cell_index, task.source.cell_index))


def compress_task(task: BlockTask, kernel, tree_t, tree_s,
                  budget: SampleBudget, rng):
    """Compress one admissible block using tree random-path sampling."""
    t, s = task.target, task.source
    view = KernelBlockView(kernel, tree_t.points[t.lo:t.hi],
                           tree_s.points[s.lo:s.hi])

    def col_sampler(count, g):
        return random_path_sample(s, count, g, tree_s) - s.lo

    def row_sampler(count, g):
        return random_path_sample(t, count, g, tree_t) - t.lo

    return compress_block(view, budget, rng, col_sampler=col_sampler,
                          row_sampler=row_sampler, mc_sampler=row_sampler)


def low_rank_product(task: BlockTask, kernel, tree_t, tree_s, w_tree, out,
                     budget: SampleBudget, rng, block=None):
    """Compress one admissible block (unless given) and apply it to w.

    The result is accumulated into the target node's output segment; the
    compressed factors are returned for caching or diagnostics.
    """
    t, s = task.target, task.source
    if block is None:
        block = compress_task(task, kernel, tree_t, tree_s, budget, rng)
    out[t.lo:t.hi] += block.apply(w_tree[s.lo:s.hi])
    return block


class HmatrixOperator:
    """Reusable hierarchical operator: plan once, matvec many times.

    Compressed factors are cached per (realization, block) up to a memory
    cap; beyond it they are recomputed from the same derived streams, which
    yields bitwise-identical factors, so linearity and determinism do not
    depend on the cache.
    """

    def __init__(self, tree_t: QuadTree, tree_s: QuadTree, kernel,
                 cfg: TraversalConfig, seed: int = 0,
                 cache_entry_limit: int = 30_000_000):
        self.tree_t = tree_t
        self.tree_s = tree_s
        self.kernel = kernel
        self.cfg = cfg
        self.seed = seed
        self.plan = plan_blocks(tree_t, tree_s, cfg)
        self._cache: dict = {}
        self._cache_entries = 0
        self._cache_entry_limit = cache_entry_limit
        self.dtype = np.result_type(kernel.dtype, tree_s.densities.dtype)

    def _out_dtype(self, w_tree):
        return np.result_type(self.dtype, np.asarray(w_tree).dtype)

    # -- components ---------------------------------------------------------
    def apply_direct(self, w_tree: np.ndarray) -> np.ndarray:
        out = np.zeros(len(self.tree_t), dtype=self._out_dtype(w_tree))
        _accumulate_direct(self.kernel, self.tree_t, self.tree_s,
                           self.plan.direct_tasks, w_tree, out)
        return out

    def apply_lowrank(self, w_tree: np.ndarray, realization: int = 0) -> np.ndarray:
        out = np.zeros(len(self.tree_t), dtype=self._out_dtype(w_tree))
        for task in self.plan.lowrank_tasks:
            key = (realization, task.target.node_id, task.source.node_id)
            block = self._cache.get(key)
            if block is None:
                rng = _block_stream(self.seed, realization, task)
                block = compress_task(task, self.kernel, self.tree_t, self.tree_s,
                                      self.cfg.budget, rng)
                size = block.U.size + block.V.size
                if self._cache_entries + size <= self._cache_entry_limit:
                    self._cache[key] = block
                    self._cache_entries += size
            t, s = task.target, task.source
            out[t.lo:t.hi] += block.apply(w_tree[s.lo:s.hi])
        return out

    # -- full product ---------------------------------------------------------
    def matvec(self, x: np.ndarray, realization: int = 0) -> np.ndarray:
        """y = A x in original point order, deterministic for fixed seed."""
        x = np.asarray(x)
        if x.shape != (len(self.tree_s),):
            raise ConfigurationError("x must have one entry per source point")
        x_tree = self.tree_s.gather(x)
        w_tree = self.tree_s.densities * x_tree
        y_tree = self.apply_direct(w_tree)
        y_tree += self.apply_lowrank(w_tree, realization)
        return self.tree_t.scatter(y_tree)

    def census(self):
        return self.plan.census


def hmatrix_product(tree_t: QuadTree, tree_s: QuadTree, kernel, x,
                    cfg: TraversalConfig, seed: int = 0,
                    realization: int = 0) -> np.ndarray:
    """One-shot hierarchical product (see HmatrixOperator for factor reuse)."""
    op = HmatrixOperator(tree_t, tree_s, kernel, cfg, seed=seed)
    return op.matvec(x, realization=realization)


def pair_coverage(plan: TraversalPlan, n_targets: int, n_sources: int) -> np.ndarray:
    """Count how many executed blocks cover each (target, source) pair.

    Completeness and disjointness of the traversal mean every entry is
    exactly 1.  Indices are in tree order; intended for small N.
    """
    cover = np.zeros((n_targets, n_sources), dtype=np.int64)
    for task in plan.tasks:
        t, s = task.target, task.source
        cover[t.lo:t.hi, s.lo:s.hi] += 1
    return cover
