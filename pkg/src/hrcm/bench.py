"""Experiment runner: point placement, experiment modes, records, CSV/JSON.

Modes
-----
pair       two separated boxes; direct product vs repeated one-block compression
single     one point set; full hierarchical product vs direct summation
census     predicted block counts per level plus work totals
svd-decay  exact and sampled leading singular values of a separated block
gram-check Gram-sketch error: closed form vs Monte-Carlo, uniform vs bound
timing     wall-clock sweep of direct and hierarchical products over N = 4^p

Every stochastic draw derives from (seed, purpose path), so identical
configs reproduce identical records byte for byte (timing fields aside).
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .analysis import (SeparatedPairGeometry, empirical_gram_error, error_stats,
                       gram_error_expectation, gram_error_trials,
                       optimal_probabilities, uniform_sampling_beta)
from .compress import (DenseBlockView, KernelBlockView, SampleBudget,
                       compress_block, sample_columns, sample_rows)
from .errors import ConfigurationError
from .geometry import PointSet, build_quadtree
from .hmatrix import ETA_DEFAULT, HmatrixOperator, TraversalConfig, block_census, direct_summation
from .kernels import kernel_from_spec
from .streams import (NS_DENSITY, NS_POINTS, NS_REALIZATION, NS_TRIAL,
                      NS_VECTOR, derive_stream, thread_count)

__all__ = ["ExperimentConfig", "RunRecord", "run_experiment", "write_json", "write_csv"]

MODES = ("pair", "single", "census", "svd-decay", "gram-check", "timing")
CSV_COLUMNS = ("N", "K", "mean", "variance", "t_direct", "t_hrcm")
SVD_DECAY_COUNT = 18


@dataclass
class ExperimentConfig:
    mode: str
    kernel: str = "screened:0.01"
    n: int = 1024
    L: float = 8.0
    p0: int = 2
    k: int = 16                      # c = r sample budget
    epsilon: float = 1e-8
    eta: float | None = None         # admissibility ratio / pair side-distance ratio
    seed: int = 0
    realizations: int = 20
    pair_separation: float | None = None   # center distance, default 16
    x_spec: str = "ones"
    points: str = "jitter"           # single-set placement: jitter | lattice
    p: int | None = None             # census depth exponent
    p_min: int = 5                   # timing sweep range, N = 4^p
    p_max: int = 9
    direct_cap: int = 262144         # skip direct timing above this N
    trials: int = 10000              # gram-check Monte-Carlo trials
    gram_n: int = 64                 # gram-check block size

    def validate(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}; choose from {MODES}")
        for name in ("n", "k", "realizations", "trials", "gram_n"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive")
        if self.L <= 0 or self.epsilon <= 0:
            raise ConfigurationError("L and epsilon must be positive")
        if self.p0 < 0 or self.seed < 0:
            raise ConfigurationError("p0 and seed must be non-negative")
        if self.eta is not None and not (0 < self.eta < 1):
            raise ConfigurationError("eta must lie in (0, 1)")
        if self.points not in ("jitter", "lattice"):
            raise ConfigurationError("points must be 'jitter' or 'lattice'")
        if self.mode == "census" and self.p is None:
            raise ConfigurationError("census mode requires p")
        if self.mode == "census" and self.p is not None and self.p < self.p0:
            raise ConfigurationError("census requires p >= p0")
        if self.mode == "timing" and self.p_min > self.p_max:
            raise ConfigurationError("timing requires p_min <= p_max")
        if self.mode in ("pair", "svd-decay", "gram-check"):
            if self.separation() <= 0:
                raise ConfigurationError("pair separation must be positive")
        kernel_from_spec(self.kernel)

    def separation(self) -> float:
        """Center distance of the two boxes in pair-style modes."""
        if self.pair_separation is not None:
            return self.pair_separation
        if self.eta is not None:
            # tables quote eta as box side over center distance
            return self.L / self.eta
        return 16.0

    def budget(self) -> SampleBudget:
        return SampleBudget(c=self.k, r=self.k, epsilon=self.epsilon)


@dataclass
class RunRecord:
    mode: str
    config: dict
    results: dict
    timings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"mode": self.mode, "config": self.config,
                "results": self.results, "timings": self.timings}

    def to_json(self) -> str:
        return json.dumps(_jsonify(self.to_dict()), sort_keys=True, indent=2) + "\n"

    def csv_rows(self):
        """Rows in the shared (N, K, mean, variance, t_direct, t_hrcm) layout."""
        cfg = self.config
        if self.mode in ("pair", "single"):
            return [(cfg["n"], cfg["k"],
                     self.results["mean"], self.results["variance"],
                     self.timings.get("direct_s"), self.timings.get("hrcm_s"))]
        if self.mode == "timing":
            return [(row["n"], cfg["k"], None, None,
                     row.get("t_direct"), row.get("t_hrcm"))
                    for row in self.results["sweep"]]
        return []


def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


# ---------------------------------------------------------------------------
# point and vector generation


def pair_points(cfg: ExperimentConfig):
    """Uniform points in two L x L boxes with centers ``separation`` apart."""
    delta = cfg.separation()
    rng_t = derive_stream(cfg.seed, (NS_POINTS, 0))
    rng_s = derive_stream(cfg.seed, (NS_POINTS, 1))
    tp = rng_t.random((cfg.n, 2)) * cfg.L
    sp = rng_s.random((cfg.n, 2)) * cfg.L
    sp[:, 0] += delta
    dens = derive_stream(cfg.seed, (NS_DENSITY, 0)).random(cfg.n)
    return PointSet(tp), PointSet(sp, dens), delta


def single_points(cfg: ExperimentConfig) -> PointSet:
    """N = 4^p points, one per finest grid cell (jittered or at centers)."""
    n = cfg.n
    p = round(math.log(n, 4))
    if 4 ** p != n:
        raise ConfigurationError("single mode requires N to be a power of 4")
    n1 = 1 << p
    h = cfg.L / n1
    ii, jj = np.meshgrid(np.arange(n1), np.arange(n1), indexing="ij")
    base = np.column_stack([ii.ravel(), jj.ravel()]).astype(float)
    if cfg.points == "jitter":
        rng = derive_stream(cfg.seed, (NS_POINTS, 0))
        offs = rng.random((n, 2))
    else:
        offs = np.full((n, 2), 0.5)
    pts = (base + offs) * h
    dens = derive_stream(cfg.seed, (NS_DENSITY, 0)).random(n)
    return PointSet(pts, dens)


def x_vector(cfg: ExperimentConfig, n: int) -> np.ndarray:
    spec = cfg.x_spec
    if spec == "ones":
        return np.ones(n)
    if spec == "random-uniform":
        return derive_stream(cfg.seed, (NS_VECTOR, 0)).random(n)
    if spec.startswith("file:"):
        path = spec[5:]
        x = np.load(path) if path.endswith(".npy") else np.loadtxt(path)
        x = np.asarray(x).reshape(-1)
        if x.shape != (n,):
            raise ConfigurationError(f"x file holds {x.shape[0]} values, need {n}")
        return x
    raise ConfigurationError(f"unknown x spec {spec!r}")


def _map_realizations(fn, count):
    workers = thread_count()
    if workers <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(count)))


# ---------------------------------------------------------------------------
# modes


def _run_pair(cfg: ExperimentConfig) -> RunRecord:
    kernel = kernel_from_spec(cfg.kernel)
    targets, sources, delta = pair_points(cfg)
    x = x_vector(cfg, cfg.n)
    w = sources.densities * x
    view = KernelBlockView(kernel, targets.points, sources.points)
    budget = cfg.budget()

    t0 = time.perf_counter()
    reference = direct_summation(targets, sources, kernel, x)
    t_direct = time.perf_counter() - t0

    def one(i):
        rng = derive_stream(cfg.seed, (NS_REALIZATION, i))
        block = compress_block(view, budget, rng)
        return block.apply(w)

    t0 = time.perf_counter()
    outs = _map_realizations(one, cfg.realizations)
    t_hrcm = (time.perf_counter() - t0) / cfg.realizations

    stats = error_stats(reference, outs)
    results = {"n": cfg.n, "k": cfg.k, "separation": delta,
               "eta_side": cfg.L / delta,
               "errors": stats.errors, "mean": stats.mean,
               "variance": stats.variance}
    return RunRecord("pair", asdict(cfg), results,
                     {"direct_s": t_direct, "hrcm_s": t_hrcm})


def _run_single(cfg: ExperimentConfig) -> RunRecord:
    kernel = kernel_from_spec(cfg.kernel)
    ps = single_points(cfg)
    tree = build_quadtree(ps, cfg.L, cfg.p0)
    tcfg = TraversalConfig(budget=cfg.budget(),
                           eta=cfg.eta if cfg.eta is not None else ETA_DEFAULT)
    x = x_vector(cfg, cfg.n)

    t0 = time.perf_counter()
    reference = direct_summation(ps, ps, kernel, x)
    t_direct = time.perf_counter() - t0

    op = HmatrixOperator(tree, tree, kernel, tcfg, seed=cfg.seed,
                         cache_entry_limit=0)
    x_tree = tree.gather(x)
    w_tree = tree.densities * x_tree

    t0 = time.perf_counter()
    y_direct = op.apply_direct(w_tree)
    t_direct_part = time.perf_counter() - t0
    t0 = time.perf_counter()
    y0 = tree.scatter(y_direct + op.apply_lowrank(w_tree, realization=0))
    t_lowrank_part = time.perf_counter() - t0
    t_hrcm = t_direct_part + t_lowrank_part

    def one(i):
        if i == 0:
            return y0
        return tree.scatter(y_direct + op.apply_lowrank(w_tree, realization=i))

    outs = _map_realizations(one, cfg.realizations)
    stats = error_stats(reference, outs)
    census = [{"level": lvl, **cnt} for lvl, cnt in sorted(op.census().items())]
    results = {"n": cfg.n, "k": cfg.k, "eta": tcfg.eta,
               "errors": stats.errors, "mean": stats.mean,
               "variance": stats.variance, "census": census}
    return RunRecord("single", asdict(cfg), results,
                     {"direct_s": t_direct, "hrcm_s": t_hrcm,
                      "hrcm_near_field_s": t_direct_part,
                      "hrcm_low_rank_s": t_lowrank_part})


def _run_census(cfg: ExperimentConfig) -> RunRecord:
    table = block_census(cfg.p, cfg.p0)
    results = {"p": cfg.p, "p0": cfg.p0, "levels": table.levels,
               "direct_ops": table.direct_ops, "lowrank_ops": table.lowrank_ops,
               "sum_checks": [table.sum_check(l) for l in range(len(table.levels))]}
    return RunRecord("census", asdict(cfg), results)


def _run_svd_decay(cfg: ExperimentConfig) -> RunRecord:
    if cfg.n > 4096:
        raise ConfigurationError("svd-decay computes a dense SVD; use n <= 4096")
    kernel = kernel_from_spec(cfg.kernel)
    targets, sources, delta = pair_points(cfg)
    dense = KernelBlockView(kernel, targets.points, sources.points).dense()
    exact = np.linalg.svd(dense, compute_uv=False)[:SVD_DECAY_COUNT]

    rng = derive_stream(cfg.seed, (NS_REALIZATION, 0))
    view = DenseBlockView(dense)
    C = sample_columns(view, cfg.k, rng)
    Cr = sample_rows(C, cfg.k, rng)
    sampled = np.linalg.svd(Cr, compute_uv=False)[:SVD_DECAY_COUNT]

    results = {"n": cfg.n, "k": cfg.k, "separation": delta,
               "eta_side": cfg.L / delta,
               "exact": exact, "sampled": sampled,
               "exact_normalized": exact / exact[0]}
    return RunRecord("svd-decay", asdict(cfg), results)


def _run_gram_check(cfg: ExperimentConfig) -> RunRecord:
    kernel = kernel_from_spec(cfg.kernel)
    sub = ExperimentConfig(**{**asdict(cfg), "mode": "pair", "n": cfg.gram_n})
    targets, sources, delta = pair_points(sub)
    A = KernelBlockView(kernel, targets.points, sources.points).dense()

    c = cfg.k
    closed = gram_error_expectation(A, c)
    probs = optimal_probabilities(A)
    emp_opt = empirical_gram_error(A, c, probs, cfg.trials,
                                   derive_stream(cfg.seed, (NS_TRIAL, 0)))
    trials_unif = gram_error_trials(A, c, None, cfg.trials,
                                    derive_stream(cfg.seed, (NS_TRIAL, 1)))
    emp_unif = float(trials_unif.mean())
    se_unif = float(trials_unif.std(ddof=1) / math.sqrt(cfg.trials))

    geom = SeparatedPairGeometry.from_boxes(cfg.L, delta)
    beta = uniform_sampling_beta(kernel, geom)
    fro2 = float(np.sum(np.abs(A) ** 2))
    gram2 = float(np.sum(np.abs(A @ A.conj().T) ** 2))
    bound_unif = fro2 ** 2 / (beta * c) - gram2 / c

    results = {"block": cfg.gram_n, "c": c, "trials": cfg.trials,
               "separation": delta, "beta": beta,
               "closed_form": closed, "empirical_optimal": emp_opt,
               "optimal_rel_gap": abs(emp_opt - closed) / closed,
               "empirical_uniform": emp_unif,
               "uniform_stderr": se_unif,
               "uniform_bound": bound_unif,
               "bound_satisfied": bool(emp_unif <= bound_unif + 3 * se_unif)}
    return RunRecord("gram-check", asdict(cfg), results)


def _best_time(fn, fast_cutoff=1.0, repeats=3):
    """Wall-clock of fn(); re-measured (best of ``repeats``) when it is fast
    enough for timer jitter to matter."""
    t0 = time.perf_counter()
    fn()
    best = time.perf_counter() - t0
    if best < fast_cutoff:
        for _ in range(repeats - 1):
            t0 = time.perf_counter()
            fn()
            best = min(best, time.perf_counter() - t0)
    return best


def _run_timing(cfg: ExperimentConfig) -> RunRecord:
    kernel = kernel_from_spec(cfg.kernel)
    sweep = []
    for p in range(cfg.p_min, cfg.p_max + 1):
        n = 4 ** p
        sub = ExperimentConfig(**{**asdict(cfg), "mode": "single", "n": n})
        ps = single_points(sub)
        x = x_vector(sub, n)
        row = {"n": n, "p": p}

        if n <= cfg.direct_cap:
            row["t_direct"] = _best_time(lambda: direct_summation(ps, ps, kernel, x))

        t0 = time.perf_counter()
        tree = build_quadtree(ps, cfg.L, cfg.p0)
        row["t_tree"] = time.perf_counter() - t0

        tcfg = TraversalConfig(budget=cfg.budget(),
                               eta=cfg.eta if cfg.eta is not None else ETA_DEFAULT)

        def hrcm_product():
            op = HmatrixOperator(tree, tree, kernel, tcfg, seed=cfg.seed,
                                 cache_entry_limit=0)
            op.matvec(x)

        row["t_hrcm"] = _best_time(hrcm_product)
        sweep.append(row)

    def slope(key):
        pts = [(math.log(r["n"]), math.log(r[key])) for r in sweep
               if r.get(key) and r[key] > 0]
        if len(pts) < 2:
            return None
        xs = np.array([p[0] for p in pts])
        ys = np.array([p[1] for p in pts])
        return float(np.polyfit(xs, ys, 1)[0])

    results = {"sweep": sweep, "slope_direct": slope("t_direct"),
               "slope_hrcm": slope("t_hrcm"), "direct_cap": cfg.direct_cap}
    return RunRecord("timing", asdict(cfg), results)


_RUNNERS = {"pair": _run_pair, "single": _run_single, "census": _run_census,
            "svd-decay": _run_svd_decay, "gram-check": _run_gram_check,
            "timing": _run_timing}


def run_experiment(cfg: ExperimentConfig) -> RunRecord:
    """Validate the configuration and dispatch to the mode runner."""
    cfg.validate()
    if os.environ.get("HRCM_THREADS"):
        try:
            import numba
            numba.set_num_threads(max(1, min(thread_count(), numba.config.NUMBA_NUM_THREADS)))
        except ImportError:
            pass
    return _RUNNERS[cfg.mode](cfg)


def write_json(record: RunRecord, path: str):
    with open(path, "w") as fh:
        fh.write(record.to_json())


def write_csv(record: RunRecord, path: str):
    rows = record.csv_rows()
    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join("" if v is None else repr(v) if isinstance(v, float)
                              else str(v) for v in row) + "\n")
