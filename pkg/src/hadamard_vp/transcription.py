"""Direct discretization of the variational problem.

The state is sampled on a uniform grid with the boundary values pinned,
its derivative is recovered by second-order finite differences, the moment
integrals by cumulative product-integration, and the objective by a
trapezoidal rule that gives zero weight to the singular left endpoint.
This eliminates all auxiliary states, leaving an unconstrained problem in
the k-2 interior samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .expressions import (
    EvaluationError,
    Expr,
    Program,
    compile_program,
    evaluate,
    variables,
)
from .operators import (
    ExpansionCoefficients,
    MomentTrajectory,
    approximate_derivative,
    check_fractional_order,
    expansion_coefficients,
    moment_interval_weights,
    moment_values,
)

__all__ = [
    "Grid",
    "ProblemSpec",
    "DiscreteTrajectory",
    "make_grid",
    "derivative_samples",
    "assemble",
    "objective",
    "objective_gradient",
    "build_objective_functions",
]

#: Relative finite-difference step for the objective gradient.
GRADIENT_STEP = 1e-6

#: Tolerance for exact-solution boundary-condition checks.
BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class Grid:
    a: float
    b: float
    k: int
    nodes: np.ndarray = field(compare=False)
    log_nodes: np.ndarray = field(compare=False)  # ln(nodes / a)

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.k - 1)


def make_grid(a: float, b: float, k: int) -> Grid:
    if not a > 0.0:
        raise ValueError(f"left endpoint must be positive, got {a!r}")
    if not b > a:
        raise ValueError(f"need b > a, got a={a!r}, b={b!r}")
    if not isinstance(k, (int, np.integer)) or k < 3:
        raise ValueError(f"node count must be an integer >= 3, got {k!r}")
    k = int(k)
    h = (b - a) / (k - 1)
    nodes = a + h * np.arange(k)
    nodes[-1] = b  # assigned, not accumulated
    return Grid(float(a), float(b), k, nodes, np.log(nodes / a))


@dataclass(frozen=True)
class ProblemSpec:
    """A variational problem instance.

    ``lagrangian`` is an expression over t, x, Dx; ``exact_solution``, when
    given, is an expression over t used only for error reporting.
    """

    a: float
    b: float
    alpha: float
    n_terms: int
    x_a: float
    x_b: float
    lagrangian: Expr
    exact_solution: Expr | None = None

    def __post_init__(self):
        if not self.a > 0.0:
            raise ValueError(f"left endpoint must be positive, got {self.a!r}")
        if not self.b > self.a:
            raise ValueError(f"need b > a, got a={self.a!r}, b={self.b!r}")
        check_fractional_order(self.alpha)
        if not isinstance(self.n_terms, (int, np.integer)) or self.n_terms < 2:
            raise ValueError(
                f"expansion order must be an integer >= 2, got {self.n_terms!r}"
            )
        extra = variables(self.lagrangian) - {"t", "x", "Dx"}
        if extra:
            raise ValueError(f"lagrangian uses unknown variables {sorted(extra)}")
        if self.exact_solution is not None:
            extra = variables(self.exact_solution) - {"t"}
            if extra:
                raise ValueError(
                    f"exact solution may reference only t, found {sorted(extra)}"
                )
            for endpoint, value in ((self.a, self.x_a), (self.b, self.x_b)):
                got = evaluate(self.exact_solution, {"t": endpoint})
                if abs(got - value) > BOUNDARY_TOL:
                    raise ValueError(
                        f"exact solution violates the boundary condition at "
                        f"t={endpoint!r}: {got!r} != {value!r}"
                    )


@dataclass(frozen=True)
class DiscreteTrajectory:
    grid: Grid
    x: np.ndarray
    u: np.ndarray
    d: np.ndarray
    moments: tuple[MomentTrajectory, ...]


def derivative_samples(x: np.ndarray, grid: Grid) -> np.ndarray:
    """Second-order derivative estimates: central stencils inside,
    one-sided three-point stencils at both ends.  Exact for quadratics."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (grid.k,):
        raise ValueError(f"expected {grid.k} samples, got {x.shape}")
    h = grid.h
    u = np.empty(grid.k)
    u[1:-1] = (x[2:] - x[:-2]) / (2.0 * h)
    u[0] = (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * h)
    u[-1] = (3.0 * x[-1] - 4.0 * x[-2] + x[-3]) / (2.0 * h)
    return u


def _full_state(interior_x: np.ndarray, spec: ProblemSpec, grid: Grid) -> np.ndarray:
    z = np.asarray(interior_x, dtype=np.float64)
    if z.shape != (grid.k - 2,):
        raise ValueError(
            f"expected {grid.k - 2} interior samples, got {z.shape}"
        )
    return np.concatenate([[spec.x_a], z, [spec.x_b]])


def _check_coeffs(spec: ProblemSpec, coeffs: ExpansionCoefficients) -> None:
    if coeffs.alpha != spec.alpha or coeffs.n_terms != spec.n_terms:
        raise ValueError(
            "expansion coefficients do not match the problem's (alpha, N)"
        )


def assemble(
    interior_x: np.ndarray,
    spec: ProblemSpec,
    grid: Grid,
    coeffs: ExpansionCoefficients,
) -> DiscreteTrajectory:
    """Full trajectory with the boundary values pinned and the auxiliary
    states reconstructed by quadrature, so the dynamics hold by
    construction up to quadrature order."""
    _check_coeffs(spec, coeffs)
    x = _full_state(interior_x, spec, grid)
    u = derivative_samples(x, grid)
    moments = tuple(
        moment_values(x, grid, p) for p in range(2, spec.n_terms + 1)
    )
    d = approximate_derivative(x, u, moments, coeffs, grid)
    return DiscreteTrajectory(grid, x, u, d, moments)


# --------------------------------------------------------------------------
# fast objective path (shared context for both kernel backends)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ObjectiveContext:
    """Precomputed node factors consumed by the evaluation kernels."""

    spec: ProblemSpec
    grid: Grid
    program: Program
    h: float
    t_interior: np.ndarray  # nodes 1..k-1
    state_w: np.ndarray  # (k-1,)  weight of x at each interior node
    velocity_w: np.ndarray  # (k-1,)  weight of u at each interior node
    moment_w: np.ndarray  # (N-1, k-1)
    moment_lo: np.ndarray  # (N-1, k-1)  interval weight of x[i]
    moment_hi: np.ndarray  # (N-1, k-1)  interval weight of x[i+1]
    quad_w: np.ndarray  # (k-1,)  trapezoid weights, singular node dropped


def make_context(
    spec: ProblemSpec, grid: Grid, coeffs: ExpansionCoefficients | None = None
) -> ObjectiveContext:
    if coeffs is None:
        coeffs = expansion_coefficients(spec.alpha, spec.n_terms)
    else:
        _check_coeffs(spec, coeffs)
    t = grid.nodes
    s = grid.log_nodes
    alpha = spec.alpha
    n_terms = spec.n_terms

    state_w = coeffs.state_weight * s[1:] ** (-alpha)
    velocity_w = coeffs.velocity_weight * s[1:] ** (1.0 - alpha) * t[1:]
    moment_w = np.empty((n_terms - 1, grid.k - 1))
    moment_lo = np.empty((n_terms - 1, grid.k - 1))
    moment_hi = np.empty((n_terms - 1, grid.k - 1))
    for idx, p in enumerate(range(2, n_terms + 1)):
        moment_w[idx] = coeffs.moment_weights[idx] * s[1:] ** (1.0 - alpha - p)
        moment_lo[idx], moment_hi[idx] = moment_interval_weights(s, p)

    quad_w = np.full(grid.k - 1, grid.h)
    quad_w[-1] = grid.h / 2.0

    return ObjectiveContext(
        spec=spec,
        grid=grid,
        program=compile_program(spec.lagrangian),
        h=grid.h,
        t_interior=np.ascontiguousarray(t[1:]),
        state_w=np.ascontiguousarray(state_w),
        velocity_w=np.ascontiguousarray(velocity_w),
        moment_w=np.ascontiguousarray(moment_w),
        moment_lo=np.ascontiguousarray(moment_lo),
        moment_hi=np.ascontiguousarray(moment_hi),
        quad_w=np.ascontiguousarray(quad_w),
    )


def _raise_node_error(ctx: ObjectiveContext, x: np.ndarray, node: int) -> None:
    """Reconstruct the failing scalar evaluation for a precise message."""
    coeffs = expansion_coefficients(ctx.spec.alpha, ctx.spec.n_terms)
    traj = assemble(x[1:-1], ctx.spec, ctx.grid, coeffs)
    env = {"t": ctx.grid.nodes[node], "x": traj.x[node], "Dx": traj.d[node]}
    try:
        evaluate(ctx.spec.lagrangian, env)
    except EvaluationError as exc:
        raise EvaluationError(
            f"integrand failed at grid node {node} "
            f"(t={ctx.grid.nodes[node]!r}): {exc.args[0]}",
            exc.position,
        ) from exc
    raise EvaluationError(
        f"non-finite integrand value at grid node {node} "
        f"(t={ctx.grid.nodes[node]!r})",
        0,
    )


def objective_from_context(ctx: ObjectiveContext, interior_x: np.ndarray) -> float:
    x = _full_state(interior_x, ctx.spec, ctx.grid)
    value, bad_node = _backend.kernels.eval_objective(
        x,
        ctx.t_interior,
        ctx.state_w,
        ctx.velocity_w,
        ctx.moment_w,
        ctx.moment_lo,
        ctx.moment_hi,
        ctx.quad_w,
        ctx.h,
        ctx.program.ops,
        ctx.program.consts,
        ctx.program.max_stack,
    )
    if bad_node >= 0:
        _raise_node_error(ctx, x, bad_node)
    return value


def gradient_from_context(ctx: ObjectiveContext, interior_x: np.ndarray) -> np.ndarray:
    x = _full_state(interior_x, ctx.spec, ctx.grid)
    grad, bad_coord = _backend.kernels.eval_gradient(
        x,
        ctx.t_interior,
        ctx.state_w,
        ctx.velocity_w,
        ctx.moment_w,
        ctx.moment_lo,
        ctx.moment_hi,
        ctx.quad_w,
        ctx.h,
        ctx.program.ops,
        ctx.program.consts,
        ctx.program.max_stack,
        GRADIENT_STEP,
    )
    if bad_coord >= 0:
        raise EvaluationError(
            f"integrand failed while differentiating with respect to "
            f"interior sample {bad_coord}",
            0,
        )
    return grad


def objective(
    interior_x: np.ndarray,
    spec: ProblemSpec,
    grid: Grid,
    coeffs: ExpansionCoefficients,
) -> float:
    """Discretized objective: trapezoidal quadrature of the integrand over
    nodes 1..k-1, with zero weight at the singular left endpoint."""
    return objective_from_context(make_context(spec, grid, coeffs), interior_x)


def objective_gradient(
    interior_x: np.ndarray,
    spec: ProblemSpec,
    grid: Grid,
    coeffs: ExpansionCoefficients,
) -> np.ndarray:
    """Gradient with respect to the interior samples, by per-coordinate
    central differences with relative step 1e-6."""
    return gradient_from_context(make_context(spec, grid, coeffs), interior_x)


def build_objective_functions(
    spec: ProblemSpec,
    grid: Grid,
    coeffs: ExpansionCoefficients | None = None,
):
    """Closures (f, g) over a shared precomputed context, for the solver."""
    ctx = make_context(spec, grid, coeffs)

    def f(interior_x: np.ndarray) -> float:
        return objective_from_context(ctx, interior_x)

    def g(interior_x: np.ndarray) -> np.ndarray:
        return gradient_from_context(ctx, interior_x)

    return f, g
