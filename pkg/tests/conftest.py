import math

import pytest

from hadamard_vp.expressions import parse_expression
from hadamard_vp.transcription import ProblemSpec

TRACKING_LAGRANGIAN = "(Dx - sqrt(ln(t))/gamma(1.5))^2"


def make_tracking_spec(n_terms: int = 3, with_exact: bool = True) -> ProblemSpec:
    """The quadratic tracking problem on [1, 2] whose global minimizer is
    x(t) = ln t (the integrand vanishes along that trajectory)."""
    return ProblemSpec(
        a=1.0,
        b=2.0,
        alpha=0.5,
        n_terms=n_terms,
        x_a=0.0,
        x_b=math.log(2.0),
        lagrangian=parse_expression(TRACKING_LAGRANGIAN),
        exact_solution=parse_expression("ln(t)", {"t"}) if with_exact else None,
    )


@pytest.fixture
def tracking_spec() -> ProblemSpec:
    return make_tracking_spec()
