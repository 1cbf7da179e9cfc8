"""Benchmark the compiled evaluation kernels against the NumPy fallback.

Times the objective and gradient of the logarithmic tracking problem at
several grid sizes, calling each backend's kernels directly on the same
precomputed context.  Run with ``python benchmarks/compare_backends.py``.
"""

import argparse
import math
import time

import numpy as np

from hadamard_vp import _kernels_py
from hadamard_vp.expressions import parse_expression
from hadamard_vp.transcription import GRADIENT_STEP, ProblemSpec, make_context, make_grid

try:
    from hadamard_vp import _kernels as _kernels_compiled
except ImportError:
    _kernels_compiled = None


def tracking_problem() -> ProblemSpec:
    return ProblemSpec(
        a=1.0,
        b=2.0,
        alpha=0.5,
        n_terms=3,
        x_a=0.0,
        x_b=math.log(2.0),
        lagrangian=parse_expression("(Dx - sqrt(ln(t))/gamma(1.5))^2"),
    )


def kernel_args(ctx, x):
    return (
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


def time_call(fn, repeats):
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--k", type=int, nargs="+", default=[50, 100, 200, 400, 800],
        help="grid sizes to benchmark",
    )
    parser.add_argument(
        "--repeats", type=int, default=5,
        help="repetitions per measurement (best time is reported)",
    )
    args = parser.parse_args()

    backends = [("python", _kernels_py)]
    if _kernels_compiled is not None:
        backends.insert(0, ("compiled", _kernels_compiled))
    else:
        print("compiled extension not available; timing the fallback only")

    spec = tracking_problem()
    print(f"{'k':>6} {'backend':>9} {'objective':>12} {'gradient':>12} {'speedup':>8}")
    for k in args.k:
        grid = make_grid(spec.a, spec.b, k)
        ctx = make_context(spec, grid)
        x = np.log(grid.nodes)
        timings = {}
        for name, kernels in backends:
            obj = time_call(
                lambda: kernels.eval_objective(*kernel_args(ctx, x)), args.repeats
            )
            grad = time_call(
                lambda: kernels.eval_gradient(*kernel_args(ctx, x), GRADIENT_STEP),
                args.repeats,
            )
            timings[name] = (obj, grad)
        for name, (obj, grad) in timings.items():
            if name == "compiled" and "python" in dict(backends):
                ratio = f"{timings.get('python', (obj, grad))[1] / grad:7.1f}x"
            else:
                ratio = ""
            print(f"{k:>6} {name:>9} {obj * 1e3:>10.3f}ms {grad * 1e3:>10.3f}ms {ratio:>8}")


if __name__ == "__main__":
    main()
