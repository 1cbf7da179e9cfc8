import math

import numpy as np
import pytest

from hadamard_vp.gammafn import gamma
from hadamard_vp.operators import (
    QuadratureAccuracyError,
    approximate_derivative,
    exact_derivative_logpower,
    exact_derivative_quadrature,
    expansion_coefficients,
    functional_error_bound,
    moment_values,
    pointwise_error_bound,
)
from hadamard_vp.transcription import make_grid

from conftest import make_tracking_spec

SQRT_PI = math.sqrt(math.pi)

ALPHAS = [round(0.1 * i, 1) for i in range(1, 10)]


def log_samples(grid, beta=1.0):
    return grid.log_nodes**beta


def exact_logpower_samples(grid, beta, alpha):
    out = np.zeros(grid.k)
    out[1:] = np.array(
        [
            exact_derivative_logpower(beta, alpha, grid.a, t)
            for t in grid.nodes[1:]
        ]
    )
    return out


def expansion_on_samples(x, alpha, n_terms, grid, u=None):
    coeffs = expansion_coefficients(alpha, n_terms)
    if u is None:
        from hadamard_vp.transcription import derivative_samples

        u = derivative_samples(x, grid)
    moments = [moment_values(x, grid, p) for p in range(2, n_terms + 1)]
    return approximate_derivative(x, u, moments, coeffs, grid)


# --------------------------------------------------------------------------
# expansion coefficients
# --------------------------------------------------------------------------

def test_coefficient_values_half_order():
    coeffs = expansion_coefficients(0.5, 2)
    # hand evaluation using Gamma(1.5) = sqrt(pi)/2, Gamma(0.5) = sqrt(pi)
    assert coeffs.state_weight == pytest.approx(1.5 / SQRT_PI, rel=1e-12)
    assert coeffs.velocity_weight == pytest.approx(
        0.375 / gamma(1.5), rel=1e-12
    )
    assert coeffs.moment_weights[0] == pytest.approx(
        -1.0 / (2.0 * SQRT_PI), rel=1e-12
    )


@pytest.mark.parametrize("alpha", ALPHAS)
@pytest.mark.parametrize("n_terms", range(2, 13))
def test_coefficient_identity(alpha, n_terms):
    # exactness of the expansion on x = ln(t/a) forces
    # A + B + sum C_p (p-1)/p = 1/Gamma(2-alpha)
    coeffs = expansion_coefficients(alpha, n_terms)
    total = coeffs.state_weight + coeffs.velocity_weight
    for weight, p in zip(coeffs.moment_weights, range(2, n_terms + 1)):
        total += weight * (p - 1) / p
    assert abs(total - 1.0 / gamma(2.0 - alpha)) <= 1e-10


def test_coefficient_argument_errors():
    with pytest.raises(ValueError):
        expansion_coefficients(0.5, 1)
    with pytest.raises(ValueError):
        expansion_coefficients(1.2, 4)
    with pytest.raises(ValueError):
        expansion_coefficients(0.0, 4)


def test_coefficients_large_n_finite():
    coeffs = expansion_coefficients(0.5, 40)
    assert np.all(np.isfinite(coeffs.moment_weights))
    total = coeffs.state_weight + coeffs.velocity_weight
    for weight, p in zip(coeffs.moment_weights, range(2, 41)):
        total += weight * (p - 1) / p
    assert abs(total - 1.0 / gamma(1.5)) <= 1e-10


# --------------------------------------------------------------------------
# exact oracles
# --------------------------------------------------------------------------

def test_logpower_matches_closed_form():
    # derivative of ln(tau) is sqrt(ln t)/Gamma(1.5) for order one half
    for t in (1.3, 2.0, math.e):
        assert exact_derivative_logpower(1.0, 0.5, 1.0, t) == pytest.approx(
            math.sqrt(math.log(t)) / gamma(1.5), rel=1e-14
        )
    assert exact_derivative_logpower(1.0, 0.5, 1.0, math.e) == pytest.approx(
        1.1283791670955126, rel=1e-13
    )


def test_logpower_constant_when_exponent_equals_order():
    values = [
        exact_derivative_logpower(0.5, 0.5, 2.0, t) for t in (2.5, 3.0, 10.0)
    ]
    assert values == pytest.approx([gamma(1.5)] * 3, rel=1e-14)


def test_logpower_domain_errors():
    with pytest.raises(ValueError):
        exact_derivative_logpower(1.0, 0.5, 1.0, 1.0)
    with pytest.raises(ValueError):
        exact_derivative_logpower(1.0, 0.5, 2.0, 1.0)
    with pytest.raises(ValueError):
        exact_derivative_logpower(-1.0, 0.5, 1.0, 2.0)


@pytest.mark.parametrize("beta", [1.0, 2.0, 3.5])
@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
def test_quadrature_agrees_with_logpower(beta, alpha):
    tol = 1e-9
    value = exact_derivative_quadrature(
        lambda tau: math.log(tau) ** beta,
        lambda tau: beta * math.log(tau) ** (beta - 1.0) / tau,
        alpha,
        1.0,
        2.0,
        tol,
    )
    assert value == pytest.approx(
        exact_derivative_logpower(beta, alpha, 1.0, 2.0), abs=tol
    )


def test_quadrature_constant_function():
    for alpha, c, a, t in [(0.3, 2.5, 1.0, 3.0), (0.7, -1.0, 0.5, 2.0)]:
        value = exact_derivative_quadrature(
            lambda tau: c, lambda tau: 0.0, alpha, a, t
        )
        expected = c / gamma(1.0 - alpha) * math.log(t / a) ** (-alpha)
        assert value == pytest.approx(expected, rel=1e-12)


def test_quadrature_tolerance_precondition():
    with pytest.raises(ValueError):
        exact_derivative_quadrature(
            math.log, lambda tau: 1 / tau, 0.5, 1.0, 2.0, tol=1e-12
        )


# --------------------------------------------------------------------------
# moments
# --------------------------------------------------------------------------

def test_moment_zero_state():
    grid = make_grid(1.0, 2.0, 50)
    for p in (2, 3, 5):
        moment = moment_values(np.zeros(grid.k), grid, p)
        assert np.all(moment.values == 0.0)


def test_moment_constant_state():
    grid = make_grid(1.0, 2.0, 201)
    moment = moment_values(np.ones(grid.k), grid, 2)
    assert moment.values[0] == 0.0
    np.testing.assert_allclose(moment.values, grid.log_nodes, atol=5e-6)


def test_moment_log_state():
    grid = make_grid(1.0, 2.0, 201)
    moment = moment_values(grid.log_nodes.copy(), grid, 2)
    np.testing.assert_allclose(
        moment.values, grid.log_nodes**2 / 2.0, atol=1e-12
    )


def test_moment_argument_errors():
    grid = make_grid(1.0, 2.0, 10)
    with pytest.raises(ValueError):
        moment_values(np.zeros(9), grid, 2)
    with pytest.raises(ValueError):
        moment_values(np.zeros(10), grid, 1)


# --------------------------------------------------------------------------
# approximate derivative
# --------------------------------------------------------------------------

def test_expansion_zero_state():
    grid = make_grid(1.0, 2.0, 40)
    d = expansion_on_samples(np.zeros(grid.k), 0.5, 4, grid, u=np.zeros(grid.k))
    assert np.all(d == 0.0)


@pytest.mark.parametrize("alpha", ALPHAS)
@pytest.mark.parametrize("n_terms", range(2, 13))
def test_expansion_exact_on_logarithm(alpha, n_terms):
    grid = make_grid(1.0, 2.0, 400)
    d = expansion_on_samples(
        grid.log_nodes.copy(), alpha, n_terms, grid, u=1.0 / grid.nodes
    )
    exact = exact_logpower_samples(grid, 1.0, alpha)
    assert np.max(np.abs(d[1:] - exact[1:])) <= 1e-4


def test_expansion_linearity():
    grid = make_grid(1.0, 2.0, 60)
    rng = np.random.default_rng(5)
    x1, x2 = rng.normal(size=(2, grid.k))
    u1, u2 = rng.normal(size=(2, grid.k))
    lam, mu = 0.7, -1.3
    d_combo = expansion_on_samples(
        lam * x1 + mu * x2, 0.4, 5, grid, u=lam * u1 + mu * u2
    )
    d1 = expansion_on_samples(x1, 0.4, 5, grid, u=u1)
    d2 = expansion_on_samples(x2, 0.4, 5, grid, u=u2)
    np.testing.assert_allclose(
        d_combo, lam * d1 + mu * d2, rtol=1e-12, atol=1e-12
    )


def test_expansion_missing_moment():
    grid = make_grid(1.0, 2.0, 20)
    coeffs = expansion_coefficients(0.5, 3)
    moments = [moment_values(np.ones(grid.k), grid, 2)]  # p = 3 missing
    with pytest.raises(ValueError):
        approximate_derivative(
            np.ones(grid.k), np.zeros(grid.k), moments, coeffs, grid
        )


# --------------------------------------------------------------------------
# pointwise bound
# --------------------------------------------------------------------------

def test_bound_vanishes_for_logarithm():
    # x = ln t has x' + t x'' = 1/t - 1/t = 0 identically
    grid = make_grid(1.0, 2.0, 100)
    bound = pointwise_error_bound(
        1.0 / grid.nodes, -1.0 / grid.nodes**2, 0.5, 3, grid
    )
    # rounding in t * (1/t**2) leaves a few ulp of curvature
    assert np.all(bound.values <= 1e-15)
    assert bound.curvature_max <= 1e-15


def test_bound_zero_at_left_endpoint():
    grid = make_grid(1.0, 2.0, 50)
    rng = np.random.default_rng(2)
    bound = pointwise_error_bound(
        rng.normal(size=grid.k), rng.normal(size=grid.k), 0.3, 4, grid
    )
    assert bound.values[0] == 0.0
    assert np.all(bound.values >= 0.0)


def test_bound_value_log_squared():
    # x = (ln t)^2: curvature |x' + t x''| = 2/t peaks at t = 1
    grid = make_grid(1.0, 2.0, 200)
    t = grid.nodes
    dx = 2.0 * np.log(t) / t
    d2x = (2.0 - 2.0 * np.log(t)) / t**2
    bound = pointwise_error_bound(dx, d2x, 0.5, 3, grid)
    expected_end = (
        2.0
        * math.exp(0.75)
        / (gamma(1.5) * 0.5 * math.sqrt(3.0))
        * math.sqrt(math.log(2.0))
    )
    assert bound.curvature_max == pytest.approx(2.0, rel=1e-12)
    assert bound.values[-1] == pytest.approx(expected_end, rel=1e-12)


@pytest.mark.parametrize("beta", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("n_terms", range(2, 9))
def test_bound_dominates_measured_error(beta, alpha, n_terms):
    grid = make_grid(1.0, 2.0, 400)
    t = grid.nodes
    s = grid.log_nodes
    x = s**beta
    with np.errstate(divide="ignore"):
        dx = beta * s ** (beta - 1.0) / t
        # infinite at the left endpoint when beta < 2; the bound formula
        # remains valid (and trivially dominates) there
        d2x = (beta * (beta - 1.0) * s ** (beta - 2.0)
               - beta * s ** (beta - 1.0)) / t**2
    d = expansion_on_samples(x, alpha, n_terms, grid, u=dx)
    exact = exact_logpower_samples(grid, beta, alpha)
    bound = pointwise_error_bound(dx, d2x, alpha, n_terms, grid)
    assert np.all(
        np.abs(d[1:] - exact[1:]) <= bound.values[1:] + 1e-6
    )


def test_bound_decay_in_expansion_order():
    # the N dependence is the explicit factor N**(alpha-1)
    grid = make_grid(1.0, 2.0, 100)
    t = grid.nodes
    dx = 2.0 * np.log(t) / t
    d2x = (2.0 - 2.0 * np.log(t)) / t**2
    for alpha in (0.2, 0.5, 0.8):
        small = pointwise_error_bound(dx, d2x, alpha, 2, grid)
        large = pointwise_error_bound(dx, d2x, alpha, 16, grid)
        ratio = large.values[-1] / small.values[-1]
        assert ratio == pytest.approx(8.0 ** (alpha - 1.0), rel=1e-12)


# --------------------------------------------------------------------------
# functional bound
# --------------------------------------------------------------------------

def test_functional_bound_zero_without_derivative_dependence():
    from hadamard_vp.expressions import parse_expression
    from hadamard_vp.transcription import ProblemSpec

    spec = ProblemSpec(
        a=1.0, b=2.0, alpha=0.5, n_terms=3, x_a=0.0, x_b=1.0,
        lagrangian=parse_expression("x^2 + ln(t)"),
    )
    grid = make_grid(1.0, 2.0, 60)
    rng = np.random.default_rng(9)
    bound = functional_error_bound(
        rng.normal(size=grid.k),
        rng.normal(size=grid.k),
        rng.normal(size=grid.k),
        spec,
        grid,
    )
    assert bound == pytest.approx(0.0, abs=1e-9)


def test_functional_bound_zero_on_exact_solution(tracking_spec):
    grid = make_grid(1.0, 2.0, 120)
    t = grid.nodes
    bound = functional_error_bound(
        np.log(t), 1.0 / t, -1.0 / t**2, tracking_spec, grid
    )
    assert bound == pytest.approx(0.0, abs=1e-12)


def test_functional_bound_dominates_measured_gap(tracking_spec):
    from hadamard_vp.operators import expansion_coefficients
    from hadamard_vp.transcription import make_context, objective_from_context

    grid = make_grid(1.0, 2.0, 100)
    t = grid.nodes
    s = grid.log_nodes
    x = s**2
    dx = 2.0 * s / t
    d2x = (2.0 - 2.0 * s) / t**2

    spec = tracking_spec
    # boundary values of (ln t)^2 so the trajectory is admissible
    from dataclasses import replace

    spec2 = replace(spec, x_b=math.log(2.0) ** 2, exact_solution=None)
    ctx = make_context(spec2, grid)
    approx_value = objective_from_context(ctx, x[1:-1])

    # reference objective with the exact fractional derivative inside L
    exact_d = exact_logpower_samples(grid, 2.0, 0.5)
    target = np.sqrt(s[1:]) / gamma(1.5)
    integrand = (exact_d[1:] - target) ** 2
    h = grid.h
    weights = np.full(grid.k - 1, h)
    weights[-1] = h / 2.0
    exact_value = float(weights @ integrand)

    bound = functional_error_bound(x, dx, d2x, spec2, grid)
    assert abs(exact_value - approx_value) <= bound
