"""End-to-end acceptance checks.

Each test prints a single `[acceptance] <name>: PASS|FAIL` line on the
terminal (bypassing capture) so the whole gate can be read at a glance.
Solves of the logarithmic tracking problem are cached per node count and
reused across criteria.
"""

import math
import time

import numpy as np
import pytest

from hadamard_vp.gammafn import gamma
from hadamard_vp.expressions import (
    EvaluationError,
    evaluate,
    parse_expression,
    to_source,
)
from hadamard_vp.operators import (
    approximate_derivative,
    exact_derivative_logpower,
    expansion_coefficients,
    functional_error_bound,
    moment_values,
    pointwise_error_bound,
)
from hadamard_vp.runner import parse_config, run_solve
from hadamard_vp.solver import SolverOptions, minimize
from hadamard_vp.transcription import (
    build_objective_functions,
    derivative_samples,
    make_grid,
)

from conftest import TRACKING_LAGRANGIAN, make_tracking_spec


def _announce(capsys, label, fn):
    """Run the criterion body; always emit one visible pass/fail line."""
    try:
        fn()
    except BaseException:
        with capsys.disabled():
            print(f"[acceptance] {label}: FAIL")
        raise
    with capsys.disabled():
        print(f"[acceptance] {label}: PASS")


_SOLVES: dict[int, tuple] = {}


def _tracking_solve(k):
    """Cached (report, wall_seconds) for the tracking problem at k nodes."""
    if k not in _SOLVES:
        config = parse_config(
            {
                "a": 1.0,
                "b": 2.0,
                "alpha": 0.5,
                "N": 3,
                "k": k,
                "x_a": 0.0,
                "x_b": math.log(2.0),
                "lagrangian": TRACKING_LAGRANGIAN,
                "exact_solution": "ln(t)",
                "grad_tol": 1e-8,
                "max_iterations": 20000,
            }
        )
        start = time.perf_counter()
        report = run_solve(config, write_output=False)
        _SOLVES[k] = (report, time.perf_counter() - start)
    return _SOLVES[k]


def _logpower_samples(grid, beta):
    """State, first and second derivative of (ln t)**beta on the grid."""
    t = grid.nodes
    s = grid.log_nodes
    x = s**beta
    with np.errstate(divide="ignore", invalid="ignore"):
        dx = beta * s ** (beta - 1.0) / t
        d2x = (beta * (beta - 1.0) * s ** (beta - 2.0) - beta * s ** (beta - 1.0)) / t**2
    if beta > 1.0:
        dx[0] = 0.0
    return x, dx, d2x


def _expansion_residuals(grid, beta, alpha, n_terms):
    """|expansion - exact| at the interior nodes for x = (ln t)**beta."""
    x, dx, _ = _logpower_samples(grid, beta)
    coeffs = expansion_coefficients(alpha, n_terms)
    moments = [moment_values(x, grid, p) for p in range(2, n_terms + 1)]
    d = approximate_derivative(x, dx, moments, coeffs, grid)
    exact = np.array(
        [
            exact_derivative_logpower(beta, alpha, grid.a, t)
            for t in grid.nodes[1:]
        ]
    )
    return np.abs(d[1:] - exact)


def test_error_reproduction(capsys):
    def body():
        report_100, elapsed_100 = _tracking_solve(100)
        report_250, elapsed_250 = _tracking_solve(250)
        assert report_100.converged and report_250.converged
        assert report_100.max_abs_error <= 0.06
        assert report_250.max_abs_error <= 0.025
        assert report_250.max_abs_error < report_100.max_abs_error
        assert elapsed_100 <= 60.0 and elapsed_250 <= 60.0

    _announce(capsys, "error reproduction at k=100 and k=250", body)


def test_monotone_error_decay(capsys):
    def body():
        errors = [_tracking_solve(k)[0].max_abs_error for k in (50, 100, 200, 400)]
        assert all(lo < hi for hi, lo in zip(errors, errors[1:]))

    _announce(capsys, "monotone error decay over k", body)


def test_coefficient_identity(capsys):
    def body():
        for alpha in np.arange(0.1, 0.95, 0.1):
            target = 1.0 / gamma(2.0 - alpha)
            for n_terms in range(2, 13):
                coeffs = expansion_coefficients(float(alpha), n_terms)
                total = coeffs.state_weight + coeffs.velocity_weight + sum(
                    c * (p - 1) / p
                    for p, c in zip(range(2, n_terms + 1), coeffs.moment_weights)
                )
                assert abs(total - target) <= 1e-10

    _announce(capsys, "coefficient identity", body)


def test_pointwise_bound_domination(capsys):
    def body():
        grid = make_grid(1.0, 2.0, 400)
        for beta in (1.5, 2.0, 3.0):
            _, dx, d2x = _logpower_samples(grid, beta)
            for alpha in (0.3, 0.5, 0.7):
                for n_terms in range(2, 9):
                    residual = _expansion_residuals(grid, beta, alpha, n_terms)
                    bound = pointwise_error_bound(dx, d2x, alpha, n_terms, grid)
                    assert np.all(residual <= bound.values[1:] + 1e-6)

    _announce(capsys, "pointwise error bound domination", body)


def test_exactness_on_logarithm(capsys):
    def body():
        grid = make_grid(1.0, 2.0, 400)
        for alpha in (0.3, 0.5, 0.7):
            for n_terms in range(2, 9):
                residual = _expansion_residuals(grid, 1.0, alpha, n_terms)
                assert np.max(residual) <= 1e-4

    _announce(capsys, "expansion exactness on the logarithm", body)


def test_functional_error_bound(capsys):
    def body():
        spec = make_tracking_spec()
        grid = make_grid(1.0, 2.0, 100)
        x, dx, d2x = _logpower_samples(grid, 2.0)

        coeffs = expansion_coefficients(0.5, 3)
        moments = [moment_values(x, grid, p) for p in range(2, 4)]
        d_approx = approximate_derivative(x, dx, moments, coeffs, grid)
        d_exact = np.zeros(grid.k)
        d_exact[1:] = np.array(
            [exact_derivative_logpower(2.0, 0.5, 1.0, t) for t in grid.nodes[1:]]
        )

        quad_w = np.full(grid.k, grid.h)
        quad_w[0] = 0.0
        quad_w[-1] = grid.h / 2.0

        def quadrature(d):
            values = np.array(
                [
                    evaluate(spec.lagrangian, {"t": t, "x": xi, "Dx": di})
                    for t, xi, di in zip(grid.nodes[1:], x[1:], d[1:])
                ]
            )
            return float(np.dot(quad_w[1:], values))

        gap = abs(quadrature(d_exact) - quadrature(d_approx))
        bound = functional_error_bound(x, dx, d2x, spec, grid)
        assert gap <= bound

    _announce(capsys, "functional error bound domination", body)


def test_gamma_function(capsys):
    def body():
        assert gamma(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-12)
        for n in range(1, 16):
            assert gamma(n) == pytest.approx(math.factorial(n - 1), rel=1e-12)
        rng = np.random.default_rng(23)
        count = 0
        while count < 50:
            z = float(rng.uniform(-4.0, 8.0))
            if abs(z - round(z)) <= 1e-3:
                continue
            count += 1
            assert gamma(z + 1.0) == pytest.approx(z * gamma(z), rel=1e-10)
            if -3.0 < z < 3.0:
                reflected = gamma(z) * gamma(1.0 - z) * math.sin(math.pi * z)
                assert reflected == pytest.approx(math.pi, rel=1e-10)

    _announce(capsys, "gamma function suite", body)


def test_gradient_consistency(capsys):
    def body():
        spec = make_tracking_spec()
        grid = make_grid(1.0, 2.0, 50)
        f, g = build_objective_functions(spec, grid)
        rng = np.random.default_rng(29)
        base = np.log(grid.nodes[1:-1])
        for _ in range(10):
            z = base + 0.2 * rng.normal(size=grid.k - 2)
            grad = g(z)
            oracle = np.empty_like(grad)
            for i in range(z.size):
                step = 1e-7 * (1.0 + abs(z[i]))
                zp, zm = z.copy(), z.copy()
                zp[i] += step
                zm[i] -= step
                oracle[i] = (f(zp) - f(zm)) / (2.0 * step)
            scale = max(1.0, float(np.max(np.abs(oracle))))
            assert np.max(np.abs(grad - oracle)) <= 1e-5 * scale

    _announce(capsys, "objective gradient consistency", body)


def test_solver_sanity(capsys):
    def body():
        weights = np.arange(1.0, 21.0)
        values = []

        def f(z):
            value = float(np.dot(weights, (z - 1.0) ** 2))
            values.append(value)
            return value

        def g(z):
            return 2.0 * weights * (z - 1.0)

        solution = minimize(f, g, np.zeros(20), SolverOptions(grad_tol=1e-10))
        assert solution.converged
        np.testing.assert_allclose(solution.point, 1.0, atol=1e-8)
        accepted = [values[0]]
        for value in values[1:]:
            if value <= accepted[-1]:
                accepted.append(value)
        assert accepted == sorted(accepted, reverse=True)

        def rosen(z):
            return float(100.0 * (z[1] - z[0] ** 2) ** 2 + (1.0 - z[0]) ** 2)

        def rosen_grad(z):
            return np.array(
                [
                    -400.0 * z[0] * (z[1] - z[0] ** 2) - 2.0 * (1.0 - z[0]),
                    200.0 * (z[1] - z[0] ** 2),
                ]
            )

        solution = minimize(
            rosen, rosen_grad, np.array([-1.2, 1.0]), SolverOptions(grad_tol=1e-8)
        )
        assert solution.converged
        np.testing.assert_allclose(solution.point, [1.0, 1.0], atol=1e-4)

    _announce(capsys, "solver sanity", body)


def test_expression_language(capsys):
    def body():
        for source, expected in [
            ("1+2*3", 7.0),
            ("-2^2", -4.0),
            ("2^3^2", 512.0),
            ("(1+2)*3", 9.0),
            ("1-2-3", -4.0),
        ]:
            assert evaluate(parse_expression(source), {}) == expected

        for source in [
            "t + x",
            "-2^2",
            "2^3^2",
            "t/(x*2)",
            "sqrt(ln(t))",
            TRACKING_LAGRANGIAN,
        ]:
            expr = parse_expression(source)
            assert parse_expression(to_source(expr)) == expr

        with pytest.raises(EvaluationError) as excinfo:
            evaluate(parse_expression("1 + ln(t)"), {"t": -1.0})
        assert excinfo.value.position == 4

    _announce(capsys, "expression language corpus", body)
