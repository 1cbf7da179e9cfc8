"""Command-line interface.

Exit status contract: 0 success, 2 configuration error, 3 solver
non-convergence, 4 integrand evaluation error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from ._backend import BACKEND
from .expressions import ExpressionError
from .runner import ConfigError, RunConfig, convergence_study, load_config, run_solve

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3
EXIT_EVALUATION = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hadamard-vp",
        description=(
            "Solve variational problems driven by left Hadamard fractional "
            "derivatives by integer-order expansion and direct discretization."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="solve a single problem instance")
    solve.add_argument("--config", required=True, help="path to a JSON config")
    solve.add_argument("--k", type=int, help="override the node count")
    solve.add_argument("--N", type=int, dest="n_terms", help="override the expansion order")
    solve.add_argument("--out", help="override the output CSV path")

    study = sub.add_parser("study", help="convergence study over k and N")
    study.add_argument("--config", required=True, help="path to a JSON config")
    study.add_argument("--k-list", required=True, help="comma-separated node counts")
    study.add_argument("--n-list", required=True, help="comma-separated expansion orders")
    study.add_argument("--out", help="output CSV path for the study table")
    return parser


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"{flag} expects comma-separated integers, got {text!r}") from exc


def _apply_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    if args.k is not None:
        if args.k < 3:
            raise ConfigError(f"--k must be >= 3, got {args.k}")
        config = replace(config, k=args.k)
    if args.n_terms is not None:
        try:
            config = replace(
                config, problem=replace(config.problem, n_terms=args.n_terms)
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if args.out is not None:
        config = replace(config, output_path=args.out)
    return config


def _cmd_solve(args: argparse.Namespace) -> int:
    config = _apply_overrides(load_config(args.config), args)
    report = run_solve(config)
    print(f"backend:        {BACKEND}")
    print(f"k, N:           {config.k}, {config.problem.n_terms}")
    print(f"objective:      {report.value:.12e}")
    print(f"iterations:     {report.iterations}")
    print(f"gradient norm:  {report.gradient_norm:.3e}")
    print(f"converged:      {report.converged}")
    if report.max_abs_error is not None:
        print(f"max abs error:  {report.max_abs_error:.9f}")
    if report.bound_diagnostic is not None:
        print(f"error bound:    {report.bound_diagnostic:.6e}")
    if config.output_path:
        print(f"wrote {config.output_path}")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def _cmd_study(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    k_list = _parse_int_list(args.k_list, "--k-list")
    n_list = _parse_int_list(args.n_list, "--n-list")
    table = convergence_study(config, k_list, n_list, output_path=args.out)
    print("k,N,E_k,J_approx,iterations,converged")
    for row in table:
        err = "nan" if row["E_k"] is None else f"{row['E_k']:.9e}"
        value = "nan" if row["J_approx"] is None else f"{row['J_approx']:.9e}"
        flag = "true" if row["converged"] else "false"
        print(f"{row['k']},{row['N']},{err},{value},{row['iterations']},{flag}")
    if args.out:
        print(f"wrote {args.out}", file=sys.stderr)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        return _cmd_study(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ExpressionError as exc:
        print(f"evaluation error: {exc}", file=sys.stderr)
        return EXIT_EVALUATION


if __name__ == "__main__":
    sys.exit(main())
