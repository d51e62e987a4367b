"""Command-line front end.

Subcommands: simulate (end-to-end pipeline runs), bound (closed-form
amplification calculator), verify-amplification (exact-oracle soundness
checks), cover (debug dyadic covers), estimate (offline aggregation of a
report file). Exit codes: 0 success, 2 invalid or out-of-regime
parameters, 3 a verification check failed.
"""

import argparse
import csv
import json
import sys

import numpy as np

from .aggregator import accumulate_arrays, dyadic_cover, estimate_marginals
from .amplification import amplify_group, amplify_shuffle, rdp_bound
from .client import read_reports
from .divergence import certify_amplification
from .errors import InvalidParameterError
from .harness import SimulationConfig, results_to_json, simulate, summarize, write_results

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_VERIFY_FAILED = 3


def _cmd_simulate(args):
    config = SimulationConfig(
        n=args.n, d=args.d, k=args.k, epsilon=args.epsilon, beta=args.beta,
        trials=args.trials, seed=args.seed, input_model=args.input_model,
        shuffle_mode=args.shuffle_mode, output_path=args.output,
        step_time=args.step_time, input_path=args.input_path,
        reports_path=args.reports_path, allow_large=args.allow_large,
        backend=args.backend,
    )
    results = simulate(config)
    if args.output:
        write_results(config, results, args.output)
    else:
        sys.stdout.write(results_to_json(config, results))
    total = sum(r.wall_time for r in results)
    summary = summarize(results)
    print(f"simulate: {config.trials} trial(s) in {total:.3f}s, "
          f"median max error {summary['median_max_abs_error']:.6g}, "
          f"bound satisfied in {summary['bound_satisfied_fraction']:.0%}",
          file=sys.stderr)
    return EXIT_OK


def _cmd_bound(args):
    result = amplify_shuffle(args.eps0, args.n, args.delta)
    payload = {
        "eps0": args.eps0,
        "n": args.n,
        "delta": args.delta,
        "epsilon_central": result.epsilon_central,
        "epsilon_1": result.epsilon_1,
        "regime": result.regime,
        "bounds": result.bounds,
    }
    if args.alpha is not None:
        payload["rdp"] = {"alpha": args.alpha,
                          "epsilon": rdp_bound(args.eps0, args.n, args.alpha)}
    if args.group is not None:
        group = amplify_group(args.eps0, args.group, args.delta)
        payload["group"] = {"size": args.group,
                            "epsilon_central": group.epsilon_central}
    print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


def _verify_points(args):
    if args.grid:
        with open(args.grid, newline="", encoding="utf-8") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                yield int(row[0]), float(row[1]), float(row[2])
    else:
        if args.n is None or args.eps0 is None or args.delta is None:
            raise InvalidParameterError("need --n, --eps0 and --delta (or --grid)")
        yield args.n, args.eps0, args.delta


def _cmd_verify(args):
    all_passed = True
    for n, eps0, delta in _verify_points(args):
        record = certify_amplification(n, eps0, delta, backend=args.backend)
        print(json.dumps(record.to_json_dict(), sort_keys=True))
        all_passed = all_passed and record.passed
    return EXIT_OK if all_passed else EXIT_VERIFY_FAILED


def _cmd_cover(args):
    nodes = dyadic_cover(args.t, args.d)
    print(json.dumps([[h, j] for h, j in nodes]))
    return EXIT_OK


def _cmd_estimate(args):
    h, t, u = read_reports(args.reports)
    tree = accumulate_arrays(h, t, u, args.d)
    estimates = estimate_marginals(tree, args.epsilon, args.k, args.d)
    truth = None
    if args.truth:
        truth = np.loadtxt(args.truth, dtype=np.int64, ndmin=1)
        if len(truth) != args.d:
            raise InvalidParameterError(
                f"truth file has {len(truth)} rows, expected {args.d}"
            )
    out = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
    try:
        if truth is None:
            out.write("t,f_tilde\n")
            for i, est in enumerate(estimates, start=1):
                out.write(f"{i},{est:.17g}\n")
        else:
            out.write("t,f_tilde,f_true,abs_error\n")
            for i, est in enumerate(estimates, start=1):
                err = abs(est - truth[i - 1])
                out.write(f"{i},{est:.17g},{truth[i - 1]},{err:.17g}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ldpshuffle",
        description="Longitudinal local-DP collection, shuffle-model "
                    "amplification bounds, and exact certification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the client/server pipeline on synthetic data")
    p.add_argument("--n", type=int, required=True, help="number of clients")
    p.add_argument("--d", type=int, required=True, help="time horizon (power of two)")
    p.add_argument("--k", type=int, required=True, help="per-client change budget")
    p.add_argument("--epsilon", type=float, required=True, help="per-client budget")
    p.add_argument("--beta", type=float, default=1.0 / 3.0, help="bound failure probability")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--input-model", default="random-changes",
                   choices=["worst-case-sparse", "random-changes", "step-function", "file"])
    p.add_argument("--shuffle-mode", default="none", choices=["none", "post-shuffle"])
    p.add_argument("--step-time", type=int, default=None)
    p.add_argument("--input-path", default=None, help="JSON-lines change vectors (file model)")
    p.add_argument("--reports-path", default=None, help="dump the trial-0 report stream here")
    p.add_argument("--output", default=None, help="results file (.csv for CSV, else JSON)")
    p.add_argument("--allow-large", action="store_true")
    p.add_argument("--backend", default=None, choices=["numba", "numpy"])
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("bound", help="closed-form amplification calculator")
    p.add_argument("--eps0", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--alpha", type=float, default=None, help="also report the RDP bound")
    p.add_argument("--group", type=int, default=None, help="also report the group bound for |S|")
    p.set_defaults(handler=_cmd_bound)

    p = sub.add_parser("verify-amplification",
                       help="check the calculator against the exact oracle")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--eps0", type=float, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--grid", default=None, help="CSV of n,eps0,delta triples")
    p.add_argument("--backend", default=None, choices=["numba", "numpy"])
    p.set_defaults(handler=_cmd_verify)

    p = sub.add_parser("cover", help="print the dyadic cover of a prefix")
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.set_defaults(handler=_cmd_cover)

    p = sub.add_parser("estimate", help="aggregate a report file into estimates")
    p.add_argument("--reports", required=True, help="JSON-lines report stream")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--truth", default=None, help="optional true counts, one per line")
    p.add_argument("--output", default=None)
    p.set_defaults(handler=_cmd_estimate)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except InvalidParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
