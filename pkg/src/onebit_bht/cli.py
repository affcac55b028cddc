"""Command-line entry point: ``onebit-bht {sweep,single,selftest}``."""
import argparse
import json
import logging
import sys
from dataclasses import fields, replace

import numpy as np

from .bench import (
    ALGORITHMS,
    ExperimentSpec,
    emit_results,
    nmse_db,
    run_monte_carlo,
    trial_seed,
)
from .model import ModelParams, generate_measurements, sample_sparse_signal
from .numerics import least_squares_init
from .pipeline import INFEASIBLE_POLICIES, BhtMleConfig, run_bht_mle, run_mle_baseline
from .selftest import run_selftest


def _list_of(kind):
    def parse(text):
        try:
            return [kind(tok) for tok in text.split(",") if tok]
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid list {text!r}")
    return parse


def _flatten(values):
    return None if values is None else [x for chunk in values for x in chunk]


def _add_model_flags(parser, single):
    # Defaults stay None so that config-file values are only overridden by
    # flags actually given on the command line.
    parser.add_argument("--m", type=int, help="signal length (default 200)")
    if single:
        parser.add_argument("--n-meas", type=int, help="number of sign measurements (default 400)")
        parser.add_argument("--p", type=float, help="activity probability (default 0.1)")
    else:
        parser.add_argument("--n-meas", type=_list_of(int), nargs="+",
                            help="measurement counts, comma or space separated "
                                 "(default 400,500,600,700,800)")
        parser.add_argument("--p", type=_list_of(float), nargs="+",
                            help="activity probabilities (default 0.1,0.2)")
    parser.add_argument("--sigma-e", type=float, help="perturbation std (default 0.1)")
    parser.add_argument("--sigma-n", type=float, help="additive noise std (default 0.1)")
    parser.add_argument("--sigma-r", type=float, help="active amplitude std (default 1.0)")
    parser.add_argument("--seed", type=int, help="base seed (default 0)")
    parser.add_argument("--infeasible-policy", choices=INFEASIBLE_POLICIES,
                        help="handling of a non-existent ML amplitude estimate (default project)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="onebit-bht",
        description="Sparse recovery from one-bit measurements with a perturbed sensing matrix.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="{sweep,single,selftest}")
    sub.required = True

    sweep = sub.add_parser("sweep", help="Monte Carlo NMSE/timing sweep")
    _add_model_flags(sweep, single=False)
    sweep.add_argument("--trials", type=int, help="Monte Carlo trials per cell (default 100)")
    sweep.add_argument("--algos", type=_list_of(str),
                       help=f"comma-separated subset of {','.join(ALGORITHMS)} (default bht_mle,mle)")
    sweep.add_argument("--out", default="results.csv", help="output path (default results.csv)")
    sweep.add_argument("--format", choices=("csv", "json"), help="default: from --out suffix, else csv")
    sweep.add_argument("--config", help="JSON file with ExperimentSpec fields; flags override it")
    sweep.add_argument("--workers", type=int, help="worker processes (capped by ONEBIT_BHT_THREADS)")
    sweep.add_argument("--no-timing", action="store_true",
                       help="write wall_time_s as nan so that reruns are byte-identical")

    single = sub.add_parser("single", help="one trial with per-iteration diagnostics")
    _add_model_flags(single, single=True)
    single.add_argument("--trial", type=int, default=0, help="trial index (default 0)")

    selftest = sub.add_parser("selftest", help="run the built-in oracle checks")
    selftest.add_argument("--seed", type=int, default=0)
    return parser


def _load_config(path):
    with open(path) as fh:
        data = json.load(fh)
    known = {f.name for f in fields(ExperimentSpec)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return data


def spec_from_args(args):
    spec = ExperimentSpec()
    if getattr(args, "config", None):
        spec = replace(spec, **_load_config(args.config))
    overrides = dict(
        m=args.m,
        n_meas_grid=_flatten(args.n_meas),
        p_grid=_flatten(args.p),
        sigma_e=args.sigma_e,
        sigma_n=args.sigma_n,
        sigma_r=args.sigma_r,
        trials=args.trials,
        base_seed=args.seed,
        algorithms=args.algos,
        infeasible_policy=args.infeasible_policy,
    )
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.no_timing:
        overrides["timing"] = False
    return replace(spec, **overrides)


def cmd_sweep(args):
    spec = spec_from_args(args)
    fmt = args.format or ("json" if args.out.endswith(".json") else "csv")
    records = run_monte_carlo(spec, workers=args.workers)
    summary_path = emit_results(records, fmt, args.out)
    print(f"wrote {len(records)} records to {args.out} (summary: {summary_path})")
    return 0


def _print_history(history):
    print(f"  {'k':>2} {'alpha':>6} {'p_hat':>6} {'Th':>6} {'sigma_z':>8} {'|supp|':>6} "
          f"{'newton':>6} {'feasible':>8}  stop")
    for h in history:
        print(f"  {h['k']:>2} {h['alpha']:>6.3f} {h['p_hat']:>6.3f} {h['threshold']:>6.3f} "
              f"{h['sigma_z']:>8.4f} {h['n_active']:>6d} {h['solver_iterations']:>6d} "
              f"{str(h['feasible']):>8}  {h['solver_reason']}")


def cmd_single(args):
    defaults = ModelParams()
    params = ModelParams(
        m=args.m or defaults.m,
        n_meas=args.n_meas or defaults.n_meas,
        p=args.p if args.p is not None else defaults.p,
        sigma_e=args.sigma_e if args.sigma_e is not None else defaults.sigma_e,
        sigma_n=args.sigma_n if args.sigma_n is not None else defaults.sigma_n,
        sigma_r=args.sigma_r if args.sigma_r is not None else defaults.sigma_r,
    )
    policy = args.infeasible_policy or "project"
    base_seed = args.seed if args.seed is not None else 0
    seed = trial_seed(base_seed, params.p, params.n_meas, args.trial)
    rng = np.random.default_rng(seed)
    signal = sample_sparse_signal(params, rng)
    meas = generate_measurements(signal, params, rng)
    flipped = int(np.sum(np.sign(meas.a_mat.T @ signal.s) != meas.y))

    print(f"m={params.m} N={params.n_meas} p={params.p} sigma_e={params.sigma_e} "
          f"sigma_n={params.sigma_n} base_seed={base_seed} trial={args.trial} seed={seed}")
    print(f"true support ({signal.support.size}): {signal.support.tolist()}")
    print(f"sign flips caused by noise: {flipped}/{params.n_meas}")

    bht = run_bht_mle(meas.a_mat, meas.y, params.sigma_e, params.sigma_n,
                      BhtMleConfig(infeasible_policy=policy))
    print("\nBHT-MLE iterations:")
    _print_history(bht.history)
    detected = bht.support.support
    true_set, det_set = set(signal.support.tolist()), set(detected.tolist())
    print(f"detected support ({detected.size}): {detected.tolist()}")
    print(f"  missed: {sorted(true_set - det_set)}  false: {sorted(det_set - true_set)}")
    order = np.argsort(-bht.support.scores)[:10]
    print("  top scores: " + ", ".join(f"{j}:{bht.support.scores[j]:.2f}" for j in order)
          + f"  (threshold {bht.support.threshold:.3f})")

    mle = run_mle_baseline(meas.a_mat, meas.y, params.sigma_e, params.sigma_n,
                           infeasible_policy=policy)
    s0 = least_squares_init(meas.a_mat, meas.y)
    print("\nresults:")
    for name, res_s, wall, flags in (
        ("bht_mle", bht.s_hat, bht.wall_time, bht.flags),
        ("mle", mle.s_hat, mle.wall_time, mle.flags),
        ("ls_init", s0, float("nan"), frozenset()),
    ):
        print(f"  {name:<8} NMSE {nmse_db(signal.s, res_s):8.3f} dB  "
              f"time {wall:.4f} s  flags {sorted(flags)}")
    return 0


def cmd_selftest(args):
    results = run_selftest(args.seed)
    for name, passed, detail in results:
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    return 0 if all(passed for _, passed, _ in results) else 1


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else argv
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return {"sweep": cmd_sweep, "single": cmd_single, "selftest": cmd_selftest}[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"onebit-bht: error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, ValueError) else 1


if __name__ == "__main__":
    sys.exit(main())
