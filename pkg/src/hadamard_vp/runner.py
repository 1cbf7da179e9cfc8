"""Config loading, end-to-end solves, error metrics and CSV reports.

A run is described by a flat JSON object (see ``load_config``).  Solving
produces a :class:`SolveReport` with per-node rows; when an exact
solution is supplied the maximum node-wise error is reported alongside
the functional error-bound diagnostic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .expressions import ExpressionError, evaluate, parse_expression
from .operators import expansion_coefficients, functional_error_bound
from .solver import SolverOptions, initial_guess, minimize
from .transcription import (
    Grid,
    ProblemSpec,
    build_objective_functions,
    derivative_samples,
    make_grid,
)

__all__ = [
    "ConfigError",
    "RunConfig",
    "SolveReport",
    "load_config",
    "run_solve",
    "convergence_study",
]


class ConfigError(Exception):
    """A configuration file is malformed or out of range."""


_REQUIRED_KEYS = ("a", "b", "alpha", "N", "k", "x_a", "x_b", "lagrangian")
_OPTIONAL_KEYS = ("exact_solution", "grad_tol", "max_iterations", "output_path")
_ALL_KEYS = frozenset(_REQUIRED_KEYS) | frozenset(_OPTIONAL_KEYS)


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemSpec
    k: int
    solver: SolverOptions
    output_path: str | None


@dataclass(frozen=True)
class SolveReport:
    config: dict
    value: float
    gradient_norm: float
    iterations: int
    converged: bool
    rows: list[tuple]  # (t, x_numeric, x_exact | None, abs_err | None)
    max_abs_error: float | None
    bound_diagnostic: float | None


def _require_number(raw: dict, key: str) -> float:
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"key {key!r} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"key {key!r} must be finite, got {value!r}")
    return float(value)


def _require_int(raw: dict, key: str) -> int:
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"key {key!r} must be an integer, got {value!r}")
    return value


def _require_str(raw: dict, key: str) -> str:
    value = raw[key]
    if not isinstance(value, str):
        raise ConfigError(f"key {key!r} must be a string, got {value!r}")
    return value


def parse_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(raw) - _ALL_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    missing = [key for key in _REQUIRED_KEYS if key not in raw]
    if missing:
        raise ConfigError(f"missing configuration keys: {missing}")

    a = _require_number(raw, "a")
    b = _require_number(raw, "b")
    alpha = _require_number(raw, "alpha")
    n_terms = _require_int(raw, "N")
    k = _require_int(raw, "k")
    x_a = _require_number(raw, "x_a")
    x_b = _require_number(raw, "x_b")

    if k < 3:
        raise ConfigError(f"key 'k' must be >= 3, got {k}")

    try:
        lagrangian = parse_expression(
            _require_str(raw, "lagrangian"), {"t", "x", "Dx"}
        )
    except ExpressionError as exc:
        raise ConfigError(f"key 'lagrangian': {exc}") from exc

    exact = None
    if "exact_solution" in raw:
        try:
            exact = parse_expression(_require_str(raw, "exact_solution"), {"t"})
        except ExpressionError as exc:
            raise ConfigError(f"key 'exact_solution': {exc}") from exc

    solver_kwargs = {}
    if "grad_tol" in raw:
        solver_kwargs["grad_tol"] = _require_number(raw, "grad_tol")
    if "max_iterations" in raw:
        solver_kwargs["max_iterations"] = _require_int(raw, "max_iterations")

    output_path = None
    if "output_path" in raw:
        output_path = _require_str(raw, "output_path")

    try:
        problem = ProblemSpec(
            a=a, b=b, alpha=alpha, n_terms=n_terms, x_a=x_a, x_b=x_b,
            lagrangian=lagrangian, exact_solution=exact,
        )
        solver = SolverOptions(**solver_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    return RunConfig(problem=problem, k=k, solver=solver, output_path=output_path)


def load_config(path: str | Path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read configuration file {path!s}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path!s}: {exc}") from exc
    return parse_config(raw)


def _format(value: float) -> str:
    return f"{value:.17g}"


def write_solution_csv(report: SolveReport, path: str | Path) -> None:
    lines = ["t,x_numeric,x_exact,abs_err"]
    for t, x_num, x_exact, err in report.rows:
        if x_exact is None:
            lines.append(f"{_format(t)},{_format(x_num)},,")
        else:
            lines.append(
                f"{_format(t)},{_format(x_num)},{_format(x_exact)},{_format(err)}"
            )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _config_echo(config: RunConfig) -> dict:
    spec = config.problem
    return {
        "a": spec.a,
        "b": spec.b,
        "alpha": spec.alpha,
        "N": spec.n_terms,
        "k": config.k,
        "x_a": spec.x_a,
        "x_b": spec.x_b,
        "grad_tol": config.solver.grad_tol,
        "max_iterations": config.solver.max_iterations,
    }


def run_solve(config: RunConfig, write_output: bool = True) -> SolveReport:
    """Discretize, minimize from the linear initial guess, and report."""
    spec = config.problem
    grid = make_grid(spec.a, spec.b, config.k)
    coeffs = expansion_coefficients(spec.alpha, spec.n_terms)
    f, g = build_objective_functions(spec, grid, coeffs)

    solution = minimize(f, g, initial_guess(spec, grid), config.solver)
    x = np.concatenate([[spec.x_a], solution.point, [spec.x_b]])

    rows = []
    max_err = None
    if spec.exact_solution is not None:
        exact = np.array(
            [evaluate(spec.exact_solution, {"t": t}) for t in grid.nodes]
        )
        errors = np.abs(x - exact)
        max_err = float(np.max(errors))
        rows = [
            (float(t), float(xn), float(xe), float(er))
            for t, xn, xe, er in zip(grid.nodes, x, exact, errors)
        ]
    else:
        rows = [(float(t), float(xn), None, None) for t, xn in zip(grid.nodes, x)]

    try:
        u = derivative_samples(x, grid)
        d2x = derivative_samples(u, grid)
        bound = functional_error_bound(x, u, d2x, spec, grid)
    except (ExpressionError, ValueError):
        bound = None

    report = SolveReport(
        config=_config_echo(config),
        value=float(solution.value),
        gradient_norm=solution.gradient_norm,
        iterations=solution.iterations,
        converged=solution.converged,
        rows=rows,
        max_abs_error=max_err,
        bound_diagnostic=bound,
    )
    if write_output and config.output_path:
        write_solution_csv(report, config.output_path)
    return report


def _study_line(k, n_terms, max_err, value, iterations, converged) -> str:
    err_text = _format(max_err) if max_err is not None else "nan"
    value_text = _format(value) if value is not None else "nan"
    flag = "true" if converged else "false"
    return f"{k},{n_terms},{err_text},{value_text},{iterations},{flag}"


def convergence_study(
    config: RunConfig,
    k_list: Sequence[int],
    n_list: Sequence[int],
    output_path: str | Path | None = None,
) -> list[dict]:
    """Run every (k, N) pair in k-major order and tabulate the errors.

    Individual failures are recorded in-row with ``converged`` false; the
    study keeps going.
    """
    if not k_list or not n_list:
        raise ConfigError("k and N lists must be non-empty")
    for k in k_list:
        if not isinstance(k, (int, np.integer)) or k < 3:
            raise ConfigError(f"study k values must be integers >= 3, got {k!r}")
    for n in n_list:
        if not isinstance(n, (int, np.integer)) or n < 2:
            raise ConfigError(f"study N values must be integers >= 2, got {n!r}")
    if config.problem.exact_solution is None:
        raise ConfigError("a convergence study requires an exact solution")

    table = []
    for k in k_list:
        for n_terms in n_list:
            cell = RunConfig(
                problem=replace(config.problem, n_terms=int(n_terms)),
                k=int(k),
                solver=config.solver,
                output_path=None,
            )
            try:
                report = run_solve(cell, write_output=False)
                row = {
                    "k": int(k),
                    "N": int(n_terms),
                    "E_k": report.max_abs_error,
                    "J_approx": report.value,
                    "iterations": report.iterations,
                    "converged": report.converged,
                }
            except ExpressionError:
                row = {
                    "k": int(k),
                    "N": int(n_terms),
                    "E_k": None,
                    "J_approx": None,
                    "iterations": 0,
                    "converged": False,
                }
            table.append(row)

    if output_path is not None:
        lines = ["k,N,E_k,J_approx,iterations,converged"]
        for row in table:
            lines.append(
                _study_line(
                    row["k"], row["N"], row["E_k"], row["J_approx"],
                    row["iterations"], row["converged"],
                )
            )
        Path(output_path).write_text(
            "\n".join(lines) + "\n", encoding="utf-8", newline="\n"
        )
    return table
