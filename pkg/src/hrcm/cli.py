"""Command line interface.

Example:
    hrcm run --mode single --kernel screened:0.01 --n 65536 --k 64 \
             --eta 0.7071 --p0 2 --epsilon 1e-8 --seed 42 \
             --realizations 20 --out report.json --csv report.csv

Exit codes: 0 success, 2 configuration/usage error.
"""

from __future__ import annotations

import argparse
import sys

from .bench import ExperimentConfig, run_experiment, write_csv, write_json
from .errors import ConfigurationError, HrcmError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hrcm",
        description="Hierarchical random compression for 2-D kernel summation. "
                    "Self pairs (i == j) are excluded from single-set sums.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("--mode", required=True,
                     choices=["pair", "single", "census", "svd-decay",
                              "gram-check", "timing"])
    run.add_argument("--kernel", default="screened:0.01",
                     help="log2d | screened:GAMMA | helmholtz:K")
    run.add_argument("--n", type=int, default=1024)
    run.add_argument("--length", type=float, default=8.0, dest="L",
                     help="box side length L")
    run.add_argument("--p0", type=int, default=2, help="leaf exponent")
    run.add_argument("--k", type=int, default=16, help="column/row samples c = r")
    run.add_argument("--epsilon", type=float, default=1e-8)
    run.add_argument("--eta", type=float, default=None,
                     help="admissibility ratio (single); side/distance ratio (pair)")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--realizations", type=int, default=20)
    run.add_argument("--pair-separation", type=float, default=None,
                     help="center distance of the two boxes (default 16)")
    run.add_argument("--x", default="ones", dest="x_spec",
                     help="ones | random-uniform | file:PATH")
    run.add_argument("--points", default="jitter", choices=["jitter", "lattice"])
    run.add_argument("--p", type=int, default=None, help="census depth exponent")
    run.add_argument("--p-min", type=int, default=5)
    run.add_argument("--p-max", type=int, default=9)
    run.add_argument("--direct-cap", type=int, default=262144,
                     help="skip direct timing above this N")
    run.add_argument("--trials", type=int, default=10000)
    run.add_argument("--gram-n", type=int, default=64)
    run.add_argument("--out", default=None, help="write the JSON record here")
    run.add_argument("--csv", default=None, help="write the CSV table here")
    return parser


def _summary(record) -> str:
    r = record.results
    if record.mode in ("pair", "single"):
        return (f"{record.mode}: N={r['n']} K={r['k']} "
                f"mean={r['mean']:.3e} variance={r['variance']:.3e}")
    if record.mode == "census":
        top = r["levels"][-1]
        return (f"census: p={r['p']} p0={r['p0']} last level "
                f"S={top['S']} E={top['E']} V={top['V']} LR={top['LR']}")
    if record.mode == "svd-decay":
        decay = r["exact_normalized"][min(9, len(r["exact"]) - 1)]
        return f"svd-decay: sigma10/sigma1={decay:.3e}"
    if record.mode == "gram-check":
        return (f"gram-check: closed={r['closed_form']:.4e} "
                f"optimal={r['empirical_optimal']:.4e} "
                f"uniform={r['empirical_uniform']:.4e} "
                f"bound ok={r['bound_satisfied']}")
    if record.mode == "timing":
        return (f"timing: slope_hrcm={r['slope_hrcm']} "
                f"slope_direct={r['slope_direct']}")
    return record.mode


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = ExperimentConfig(
        mode=args.mode, kernel=args.kernel, n=args.n, L=args.L, p0=args.p0,
        k=args.k, epsilon=args.epsilon, eta=args.eta, seed=args.seed,
        realizations=args.realizations, pair_separation=args.pair_separation,
        x_spec=args.x_spec, points=args.points, p=args.p,
        p_min=args.p_min, p_max=args.p_max, direct_cap=args.direct_cap,
        trials=args.trials, gram_n=args.gram_n,
    )
    try:
        record = run_experiment(cfg)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except HrcmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.out:
        write_json(record, args.out)
    if args.csv:
        write_csv(record, args.csv)
    print(_summary(record))
    return 0


if __name__ == "__main__":
    sys.exit(main())
