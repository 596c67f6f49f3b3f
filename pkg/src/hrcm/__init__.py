"""Hierarchical random compression for fast 2-D kernel summation.

Far-field blocks of the interaction matrix are replaced by sampled
low-rank factorizations organized on a quadtree, turning the dense O(N^2)
product into an O(N log N) one; near-field blocks are evaluated exactly.
"""

from .analysis import (ErrorStats, SeparatedPairGeometry, empirical_gram_error,
                       error_stats, gram_error_expectation, gram_error_trials,
                       optimal_probabilities, separation_error_bound,
                       uniform_sampling_beta)
from .bench import ExperimentConfig, RunRecord, run_experiment
from .compress import (BlockView, CompressedBlock, DenseBlockView,
                       KernelBlockView, SampleBudget, apply_compressed,
                       compress_block, mc_matmul, orthonormalize,
                       sample_columns, sample_rows, svd_small, truncation_rank)
from .errors import (CoincidentPointsError, ConfigurationError, HrcmError,
                     NumericalError)
from .estimator import HierarchicalKernelSum
from .geometry import (PointSet, QuadTree, TreeNode, build_quadtree,
                       classify_pair, diam, dist, is_admissible,
                       random_path_sample)
from .hmatrix import (ETA_DEFAULT, BlockTask, CensusTable, HmatrixOperator,
                      TraversalConfig, TraversalPlan, block_census,
                      direct_summation, hmatrix_product, pair_coverage,
                      plan_blocks)
from .kernels import (Helmholtz, Kernel, Log2D, ScreenedCoulomb,
                      kernel_from_spec, rank_estimate)
from .streams import derive_stream

__version__ = "0.1.0"

__all__ = [
    "BlockTask", "BlockView", "CensusTable", "CoincidentPointsError",
    "CompressedBlock", "ConfigurationError", "DenseBlockView", "ErrorStats",
    "ETA_DEFAULT", "ExperimentConfig", "Helmholtz", "HierarchicalKernelSum",
    "HmatrixOperator", "HrcmError", "Kernel", "KernelBlockView", "Log2D",
    "NumericalError", "PointSet", "QuadTree", "RunRecord", "SampleBudget",
    "ScreenedCoulomb", "SeparatedPairGeometry", "TraversalConfig",
    "TraversalPlan", "TreeNode", "apply_compressed", "block_census",
    "build_quadtree", "classify_pair", "compress_block", "derive_stream",
    "diam", "direct_summation", "dist", "empirical_gram_error", "error_stats",
    "gram_error_expectation", "gram_error_trials", "hmatrix_product",
    "is_admissible", "kernel_from_spec", "mc_matmul", "optimal_probabilities",
    "orthonormalize", "pair_coverage", "plan_blocks", "random_path_sample",
    "rank_estimate", "run_experiment", "sample_columns", "sample_rows",
    "separation_error_bound", "svd_small", "truncation_rank",
    "uniform_sampling_beta",
]
