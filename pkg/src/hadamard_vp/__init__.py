"""Solver for variational problems driven by left Hadamard fractional
derivatives.

The fractional operator is replaced by an integer-order expansion (state,
first derivative and running moment integrals), turning the problem into
a classical one that is discretized on a uniform grid and minimized
directly.  Hot evaluation kernels live in a compiled extension with a
NumPy fallback; ``BACKEND`` names the one in use.
"""

from ._backend import BACKEND
from .expressions import (
    EvaluationError,
    ExpressionError,
    LexError,
    ParseError,
    evaluate,
    parse_expression,
    to_source,
    tokenize,
)
from .gammafn import GammaPoleError, gamma, log_gamma_abs
from .operators import (
    ExpansionCoefficients,
    MomentTrajectory,
    PointwiseErrorBound,
    QuadratureAccuracyError,
    approximate_derivative,
    exact_derivative_logpower,
    exact_derivative_quadrature,
    expansion_coefficients,
    functional_error_bound,
    moment_values,
    pointwise_error_bound,
)
from .runner import (
    ConfigError,
    RunConfig,
    SolveReport,
    convergence_study,
    load_config,
    run_solve,
)
from .solver import Solution, SolverOptions, initial_guess, minimize
from .transcription import (
    DiscreteTrajectory,
    Grid,
    ProblemSpec,
    assemble,
    build_objective_functions,
    derivative_samples,
    make_grid,
    objective,
    objective_gradient,
)

__version__ = "0.1.0"
