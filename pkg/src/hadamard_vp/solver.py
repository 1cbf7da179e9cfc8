"""Unconstrained minimizer: limited-memory quasi-Newton with a
backtracking Armijo line search.

The discretized objective is ill-conditioned in the node count, so plain
gradient descent stalls; a short curvature history fixes that without any
constraint machinery (the boundary conditions were already eliminated by
the transcription).  Integrand domain errors at trial points act as soft
barriers: the step is rejected and shrunk.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .expressions import EvaluationError

__all__ = ["SolverOptions", "Solution", "minimize", "initial_guess"]

_ARMIJO = 1e-4
_BACKTRACK = 0.5
_MIN_STEP = 1e-16
_CURVATURE_GUARD = 1e-14


@dataclass(frozen=True)
class SolverOptions:
    grad_tol: float = 1e-6
    max_iterations: int = 5000
    memory: int = 10

    def __post_init__(self):
        if not self.grad_tol > 0.0:
            raise ValueError(f"grad_tol must be positive, got {self.grad_tol!r}")
        if self.max_iterations <= 0:
            raise ValueError(
                f"max_iterations must be positive, got {self.max_iterations!r}"
            )
        if self.memory <= 0:
            raise ValueError(f"memory must be positive, got {self.memory!r}")


@dataclass(frozen=True)
class Solution:
    point: np.ndarray = field(compare=False)
    value: float
    gradient_norm: float
    iterations: int
    converged: bool
    diagnostic: str = ""


def _descent_direction(g, s_hist, y_hist):
    """Two-loop recursion; falls back to steepest descent on an empty or
    degenerate history."""
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        rho = 1.0 / np.dot(y, s)
        a = rho * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        q *= np.dot(s, y) / np.dot(y, y)
    for (s, y), a in zip(zip(s_hist, y_hist), reversed(alphas)):
        rho = 1.0 / np.dot(y, s)
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return -q


def minimize(f, g, x0, opts: SolverOptions = SolverOptions()) -> Solution:
    """Minimize ``f`` with gradient ``g`` starting from ``x0``.

    Deterministic; the sequence of accepted objective values is
    non-increasing.  Returns a non-converged ``Solution`` with a
    diagnostic when the line-search step underflows or the iteration
    budget runs out.
    """
    x = np.array(x0, dtype=np.float64)
    fx = f(x)
    gx = np.asarray(g(x), dtype=np.float64)

    s_hist: deque = deque(maxlen=opts.memory)
    y_hist: deque = deque(maxlen=opts.memory)
    iterations = 0

    def grad_norm(v):
        return float(np.max(np.abs(v))) if v.size else 0.0

    while iterations < opts.max_iterations:
        if grad_norm(gx) <= opts.grad_tol:
            break

        direction = _descent_direction(gx, s_hist, y_hist)
        slope = float(np.dot(gx, direction))
        if slope >= 0.0:
            direction = -gx
            slope = float(np.dot(gx, direction))

        step = 1.0
        while True:
            try:
                f_trial = f(x + step * direction)
            except EvaluationError:
                f_trial = np.inf
            if f_trial <= fx + _ARMIJO * step * slope:
                break
            step *= _BACKTRACK
            if step < _MIN_STEP:
                return Solution(
                    point=x,
                    value=fx,
                    gradient_norm=grad_norm(gx),
                    iterations=iterations,
                    converged=False,
                    diagnostic="line-search step underflow",
                )

        x_next = x + step * direction
        g_next = np.asarray(g(x_next), dtype=np.float64)

        s = x_next - x
        y = g_next - gx
        sy = float(np.dot(s, y))
        if sy > _CURVATURE_GUARD * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)

        x, fx, gx = x_next, f_trial, g_next
        iterations += 1

    converged = grad_norm(gx) <= opts.grad_tol
    return Solution(
        point=x,
        value=fx,
        gradient_norm=grad_norm(gx),
        iterations=iterations,
        converged=converged,
        diagnostic="" if converged else "iteration budget exhausted",
    )


def initial_guess(spec, grid) -> np.ndarray:
    """Interior samples of the line joining the two boundary points."""
    t = grid.nodes[1:-1]
    frac = (t - spec.a) / (spec.b - spec.a)
    return spec.x_a + (spec.x_b - spec.x_a) * frac
