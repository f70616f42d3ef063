"""Command-line entry point.

Exit codes: 0 on success, 2 on configuration problems (unreadable config,
bad dimensions, unknown solver), 3 when a solve fails to converge.
"""

import argparse
import json
import sys
from pathlib import Path

from . import bench
from .solvers import STATUS_CONVERGED

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_CONVERGENCE = 3

_SOLVERS = ("al-lbfgs", "al-gd", "minres")


def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", type=Path, help="JSON file with study parameters")
    shared.add_argument("--out", type=Path, default=Path("."), help="output directory")
    shared.add_argument(
        "--seed", type=int, default=None, help="master seed (overrides config)"
    )

    parser = argparse.ArgumentParser(
        prog="deepcfft",
        description="Matrix-free data-driven predictive control benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("gen-data", parents=[shared], help="generate instance files")

    p_solve = sub.add_parser("solve", parents=[shared], help="solve one instance")
    p_solve.add_argument("instance", type=Path, help="instance JSON path")
    p_solve.add_argument("--solver", choices=_SOLVERS, default="al-lbfgs")

    sub.add_parser(
        "residual-study", parents=[shared], help="per-iteration residuals, all solvers"
    )
    sub.add_parser(
        "scaling-study", parents=[shared], help="timing sweep across state dimensions"
    )
    sub.add_parser(
        "condition-study", parents=[shared], help="condition numbers with/without B"
    )
    sub.add_parser(
        "closed-loop", parents=[shared], help="receding-horizon tracking demo"
    )
    return parser


def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path) as handle:
        loaded = json.load(handle)
    if not isinstance(loaded, dict):
        raise ValueError("config root must be a JSON object")
    return loaded


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    try:
        if args.command == "gen-data":
            result = bench.run_gen_data(config, args.out, seed)
        elif args.command == "solve":
            report = bench.run_solve(args.instance, args.solver, config, args.out)
            print(
                f"{args.solver}: status={report.status} "
                f"residual={report.residual_norm:.3e} "
                f"inner={report.total_inner} elapsed={report.elapsed_s:.2f}s"
            )
            if report.status != STATUS_CONVERGED:
                return EXIT_NO_CONVERGENCE
            return EXIT_OK
        elif args.command == "residual-study":
            result = bench.run_residual_study(config, args.out, seed)
            main_status = result.get("al-lbfgs", {}).get("status", STATUS_CONVERGED)
            print(json.dumps(result, indent=2))
            if main_status != STATUS_CONVERGED:
                return EXIT_NO_CONVERGENCE
            return EXIT_OK
        elif args.command == "scaling-study":
            result = bench.run_scaling_study(config, args.out, seed)
        elif args.command == "condition-study":
            result = bench.run_condition_study(config, args.out, seed)
        elif args.command == "closed-loop":
            result = bench.run_closed_loop(config, args.out, seed)
            print(json.dumps(result, indent=2))
            if not result["all_solves_converged"]:
                return EXIT_NO_CONVERGENCE
            return EXIT_OK
        else:  # pragma: no cover - argparse enforces the choices
            raise ValueError(f"unknown command {args.command!r}")
    except (OSError, ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(result, indent=2))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
