import math

import numpy as np
import pytest

from hrcm import (ConfigurationError, Helmholtz, HmatrixOperator, PointSet,
                  SampleBudget, ScreenedCoulomb, TraversalConfig, block_census,
                  build_quadtree, direct_summation, hmatrix_product,
                  pair_coverage, plan_blocks)
from hrcm.hmatrix import direct_product
from conftest import ConstantKernel, grid_point_set, relative_error


def census_by_enumeration(depth):
    """Independent oracle: walk the grid-coordinate pair recursion directly.

    Tracks all visited same-level cell pairs starting from the root pair;
    non-admissible pairs (self, edge, vertex) recurse into all 16 child
    pairs, admissible ones stop.
    """
    def classify(a1, b1, a2, b2):
        da, db = abs(a1 - a2), abs(b1 - b2)
        if da == 0 and db == 0:
            return "S"
        if da + db == 1:
            return "E"
        if da == 1 and db == 1:
            return "V"
        return "LR"

    rows = []
    current = [(0, 0, 0, 0)]
    for level in range(depth + 1):
        row = {"S": 0, "E": 0, "V": 0, "LR": 0}
        nxt = []
        for (a1, b1, a2, b2) in current:
            cls = classify(a1, b1, a2, b2)
            row[cls] += 1
            if cls != "LR" and level < depth:
                for bx1 in range(2):
                    for by1 in range(2):
                        for bx2 in range(2):
                            for by2 in range(2):
                                nxt.append((2 * a1 + bx1, 2 * b1 + by1,
                                            2 * a2 + bx2, 2 * b2 + by2))
        rows.append(row)
        current = nxt
    return rows


# --- census ------------------------------------------------------------------

def test_census_level_one_from_root():
    table = block_census(3, 2)
    assert table.levels[1] == {"level": 1, "S": 4, "E": 8, "V": 4, "LR": 0,
                               "LR_cumulative": 0}


def test_census_level_two():
    table = block_census(4, 2)
    row = table.levels[2]
    assert (row["S"], row["E"], row["V"], row["LR"]) == (16, 48, 36, 156)
    assert table.sum_check(2)


def test_census_level_three_frozen_from_enumeration():
    # frozen output of census_by_enumeration(3): (64, 224, 196, 1116)
    table = block_census(5, 2)
    row = table.levels[3]
    assert (row["S"], row["E"], row["V"], row["LR"]) == (64, 224, 196, 1116)
    assert row["LR_cumulative"] == 16 * 156 + 1116
    assert table.sum_check(3)


@pytest.mark.parametrize("depth", [0, 1, 2, 3, 4])
def test_census_matches_enumeration_oracle(depth):
    oracle = census_by_enumeration(depth)
    table = block_census(depth + 2, 2)
    for level in range(depth + 1):
        row = table.levels[level]
        assert {c: row[c] for c in ("S", "E", "V", "LR")} == oracle[level]


def test_census_sum_checks_all_levels():
    table = block_census(8, 2)
    for level in range(len(table.levels)):
        assert table.sum_check(level)


def test_census_work_totals():
    table = block_census(5, 2)
    bottom = table.levels[2]   # depth-1 level
    expected_direct = 16 * 16 ** 2 * (bottom["S"] + bottom["E"] + bottom["V"])
    assert table.direct_ops == expected_direct
    expected_lr = sum(table.levels[l]["LR"] * 4 ** (5 - l) for l in range(3))
    assert table.lowrank_ops == expected_lr
    single_leaf = block_census(2, 2)
    assert single_leaf.direct_ops == 16 ** 2 and single_leaf.lowrank_ops == 0


def test_plan_census_equals_recurrence():
    ps = grid_point_set(1024, seed=21)
    tree = build_quadtree(ps, 8.0, 2)
    cfg = TraversalConfig(budget=SampleBudget(4, 4))
    plan = plan_blocks(tree, tree, cfg)
    table = block_census(5, 2)
    for level in range(tree.depth + 1):
        row = table.levels[level]
        assert plan.census[level] == {c: row[c] for c in ("S", "E", "V", "LR")}


# --- direct products -----------------------------------------------------------

def test_direct_summation_single_source():
    targets = PointSet(np.array([[0.0, 0.0]]))
    sources = PointSet(np.array([[1.0, 0.0]]), densities=np.array([1.0]))
    out = direct_summation(targets, sources, ScreenedCoulomb(0.0), np.ones(1))
    assert out[0] == pytest.approx(1.0)   # 1/R at R=1, q=x=1


def test_direct_summation_mirrored_sources():
    targets = PointSet(np.array([[0.0, 1.0]]))
    sources = PointSet(np.array([[2.0, 1.0], [-2.0, 1.0]]))
    out = direct_summation(targets, sources, ScreenedCoulomb(0.01), np.ones(2))
    single = direct_summation(targets, PointSet(np.array([[2.0, 1.0]])),
                              ScreenedCoulomb(0.01), np.ones(1))
    assert out[0] == pytest.approx(2 * single[0], rel=1e-14)


def test_direct_summation_zero_vector():
    ps = grid_point_set(64, seed=22)
    out = direct_summation(ps, ps, ScreenedCoulomb(0.01), np.zeros(64))
    assert np.all(out == 0)


def test_direct_product_matches_naive_loops():
    ps = grid_point_set(1024, seed=23)
    tree = build_quadtree(ps, 8.0, 2)
    kern = ScreenedCoulomb(0.01)
    leaves = tree.leaves()
    t, s = leaves[3], leaves[40]
    w = tree.densities * np.ones(1024)
    out = np.zeros(1024)
    direct_product(t, s, kern, tree, tree, w, out)
    naive = np.zeros(t.npoints)
    for i in range(t.npoints):
        for j in range(s.npoints):
            ti = tree.points[t.lo + i]
            sj = tree.points[s.lo + j]
            R = math.hypot(ti[0] - sj[0], ti[1] - sj[1])
            naive[i] += math.exp(-0.01 * R) / R * w[s.lo + j]
    assert np.allclose(out[t.lo:t.hi], naive, rtol=1e-15, atol=1e-18)
    assert np.all(out[:t.lo] == 0) and np.all(out[t.hi:] == 0)


def test_hmatrix_no_compression_equals_direct_general_mode():
    pts = np.random.default_rng(24).random((64, 2)) * 8
    ps = PointSet(pts, densities=np.random.default_rng(25).random(64))
    tree = build_quadtree(ps, 8.0, 1, grid=False)
    kern = ScreenedCoulomb(0.01)
    x = np.random.default_rng(26).random(64)
    ref = direct_summation(ps, ps, kern, x)
    cfg = TraversalConfig(budget=SampleBudget(4, 4), direct_threshold=math.inf)
    y = hmatrix_product(tree, tree, kern, x, cfg)
    assert relative_error(y, ref) <= 1e-14


def test_single_leaf_tree_is_direct():
    ps = grid_point_set(16, seed=27)
    tree = build_quadtree(ps, 8.0, 2)   # N = 4^p0: root is the only leaf
    kern = ScreenedCoulomb(0.01)
    x = np.ones(16)
    ref = direct_summation(ps, ps, kern, x)
    y = hmatrix_product(tree, tree, kern, x, TraversalConfig(budget=SampleBudget(4, 4)))
    assert relative_error(y, ref) <= 1e-12


# --- traversal behaviour ----------------------------------------------------------

def test_pair_coverage_complete_and_disjoint():
    ps = grid_point_set(256, seed=28)
    tree = build_quadtree(ps, 8.0, 1)
    for thr in (None, math.inf):
        cfg = TraversalConfig(budget=SampleBudget(2, 2), direct_threshold=thr)
        plan = plan_blocks(tree, tree, cfg)
        cover = pair_coverage(plan, 256, 256)
        assert np.all(cover == 1)


def test_zero_input_gives_zero_output():
    ps = grid_point_set(256, seed=29)
    tree = build_quadtree(ps, 8.0, 1)
    kern = Helmholtz(0.25)
    cfg = TraversalConfig(budget=SampleBudget(4, 4))
    y = hmatrix_product(tree, tree, kern, np.zeros(256), cfg, seed=5)
    assert np.all(y == 0)


def test_matvec_deterministic_and_seed_sensitive():
    ps = grid_point_set(1024, seed=30)
    tree = build_quadtree(ps, 8.0, 2)
    kern = ScreenedCoulomb(0.01)
    x = np.random.default_rng(0).random(1024)
    cfg = TraversalConfig(budget=SampleBudget(8, 8))
    y1 = hmatrix_product(tree, tree, kern, x, cfg, seed=7)
    y2 = hmatrix_product(tree, tree, kern, x, cfg, seed=7)
    y3 = hmatrix_product(tree, tree, kern, x, cfg, seed=8)
    assert np.array_equal(y1, y2)       # bitwise
    assert not np.array_equal(y1, y3)


def test_operator_linearity_with_cached_factors():
    ps = grid_point_set(1024, seed=31)
    tree = build_quadtree(ps, 8.0, 2)
    kern = ScreenedCoulomb(0.01)
    op = HmatrixOperator(tree, tree, kern, TraversalConfig(budget=SampleBudget(8, 8)),
                         seed=3)
    g = np.random.default_rng(1)
    x, y = g.random(1024), g.random(1024)
    a, b = 1.7, -0.3
    lhs = op.matvec(a * x + b * y)
    rhs = a * op.matvec(x) + b * op.matvec(y)
    scale = np.abs(rhs).max()
    assert np.allclose(lhs, rhs, atol=1e-11 * scale)


def test_lr_fallback_small_blocks_exact():
    # sample budget >= block sizes: every admissible block evaluated exactly
    ps = grid_point_set(256, seed=32)
    tree = build_quadtree(ps, 8.0, 1)
    kern = ScreenedCoulomb(0.01)
    x = np.random.default_rng(2).random(256)
    ref = direct_summation(ps, ps, kern, x)
    cfg = TraversalConfig(budget=SampleBudget(64, 64))
    plan = plan_blocks(tree, tree, cfg)
    assert all(t.lr_fallback for t in plan.tasks if t.kind == "LR")
    y = hmatrix_product(tree, tree, kern, x, cfg, seed=1)
    assert relative_error(y, ref) <= 1e-12


def test_zero_densities_leave_accumulator_unchanged():
    pts = grid_point_set(256, seed=33).points
    ps = PointSet(pts, densities=np.zeros(256))
    tree = build_quadtree(ps, 8.0, 1)
    kern = ScreenedCoulomb(0.01)
    y = hmatrix_product(tree, tree, kern, np.ones(256), TraversalConfig(budget=SampleBudget(4, 4)))
    assert np.all(y == 0)


def test_constant_kernel_compressed_matches_direct():
    ps = grid_point_set(1024, seed=34)
    tree = build_quadtree(ps, 8.0, 2)
    kern = ConstantKernel(0.5)
    x = np.random.default_rng(3).random(1024)
    ref = direct_summation(ps, ps, kern, x)
    y = hmatrix_product(tree, tree, kern, x, TraversalConfig(budget=SampleBudget(4, 4)), seed=2)
    assert relative_error(y, ref) <= 1e-8


def test_helmholtz_single_set_reasonable_error():
    ps = grid_point_set(1024, seed=35)
    tree = build_quadtree(ps, 8.0, 2)
    kern = Helmholtz(0.25)
    x = np.ones(1024)
    ref = direct_summation(ps, ps, kern, x)
    y = hmatrix_product(tree, tree, kern, x, TraversalConfig(budget=SampleBudget(16, 16)), seed=4)
    err = relative_error(y, ref)
    assert err < 0.05
    assert np.iscomplexobj(y)


def test_x_length_validation():
    ps = grid_point_set(64, seed=36)
    tree = build_quadtree(ps, 8.0, 1)
    op = HmatrixOperator(tree, tree, ScreenedCoulomb(0.01),
                         TraversalConfig(budget=SampleBudget(2, 2)))
    with pytest.raises(ConfigurationError):
        op.matvec(np.ones(63))
