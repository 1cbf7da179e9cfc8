"""NumPy implementation of the evaluation kernels.

This is the fallback used when the compiled extension is unavailable; it
is also the reference the extension is tested against.  Both expose the
same two entry points:

    eval_objective(...)  -> (value, bad_node)
    eval_gradient(...)   -> (gradient, bad_coordinate)

``bad_node``/``bad_coordinate`` is -1 on success.  Any non-finite
intermediate (domain violation, overflow, division by zero) is reported
rather than silently propagated, because a -inf objective would defeat
the line search downstream.

The gradient batches all 2(k-2) perturbed objective evaluations into one
vectorized pass over a (k-2, k) matrix of states.
"""

from __future__ import annotations

import numpy as np
from scipy import special

from .expressions import (
    OP_ABS,
    OP_ADD,
    OP_CONST,
    OP_COS,
    OP_DIV,
    OP_DX,
    OP_EXP,
    OP_GAMMA,
    OP_LN,
    OP_MUL,
    OP_NEG,
    OP_POW,
    OP_SIN,
    OP_SQRT,
    OP_SUB,
    OP_T,
    OP_X,
)

name = "python"


def _run_program(ops, consts, t, x, d):
    """Evaluate the stack program with array operands broadcast over the
    trailing (node) axis."""
    stack = []
    for code, arg in ops:
        if code == OP_CONST:
            stack.append(consts[arg])
        elif code == OP_T:
            stack.append(t)
        elif code == OP_X:
            stack.append(x)
        elif code == OP_DX:
            stack.append(d)
        elif code == OP_NEG:
            stack[-1] = -stack[-1]
        elif code == OP_ADD:
            b = stack.pop()
            stack[-1] = stack[-1] + b
        elif code == OP_SUB:
            b = stack.pop()
            stack[-1] = stack[-1] - b
        elif code == OP_MUL:
            b = stack.pop()
            stack[-1] = stack[-1] * b
        elif code == OP_DIV:
            b = stack.pop()
            stack[-1] = stack[-1] / b
        elif code == OP_POW:
            b = stack.pop()
            stack[-1] = np.power(stack[-1], b)
        elif code == OP_LN:
            stack[-1] = np.log(stack[-1])
        elif code == OP_EXP:
            stack[-1] = np.exp(stack[-1])
        elif code == OP_SQRT:
            stack[-1] = np.sqrt(stack[-1])
        elif code == OP_SIN:
            stack[-1] = np.sin(stack[-1])
        elif code == OP_COS:
            stack[-1] = np.cos(stack[-1])
        elif code == OP_ABS:
            stack[-1] = np.abs(stack[-1])
        elif code == OP_GAMMA:
            stack[-1] = special.gamma(stack[-1])
        else:
            raise ValueError(f"unknown opcode {code}")
    return stack[-1]


def _integrand_values(x, t1, state_w, velocity_w, moment_w, moment_lo,
                      moment_hi, h, ops, consts):
    """Integrand samples at nodes 1..k-1 for states ``x`` of shape (..., k)."""
    u = np.empty_like(x)
    u[..., 1:-1] = (x[..., 2:] - x[..., :-2]) / (2.0 * h)
    u[..., 0] = (-3.0 * x[..., 0] + 4.0 * x[..., 1] - x[..., 2]) / (2.0 * h)
    u[..., -1] = (3.0 * x[..., -1] - 4.0 * x[..., -2] + x[..., -3]) / (2.0 * h)

    d = state_w * x[..., 1:] + velocity_w * u[..., 1:]
    for idx in range(moment_w.shape[0]):
        increments = moment_lo[idx] * x[..., :-1] + moment_hi[idx] * x[..., 1:]
        d = d + moment_w[idx] * np.cumsum(increments, axis=-1)

    values = _run_program(ops, consts, t1, x[..., 1:], d)
    return np.broadcast_to(np.asarray(values, dtype=np.float64), d.shape)


def eval_objective(x, t1, state_w, velocity_w, moment_w, moment_lo, moment_hi,
                   quad_w, h, ops, consts, max_stack):
    with np.errstate(all="ignore"):
        values = _integrand_values(
            x, t1, state_w, velocity_w, moment_w, moment_lo, moment_hi, h,
            ops, consts,
        )
        total = float(np.dot(quad_w, values))
    if not np.isfinite(total):
        bad = np.flatnonzero(~np.isfinite(values))
        node = int(bad[0]) + 1 if bad.size else 1
        return float("nan"), node
    return total, -1


def eval_gradient(x, t1, state_w, velocity_w, moment_w, moment_lo, moment_hi,
                  quad_w, h, ops, consts, max_stack, rel_step):
    k = x.shape[0]
    m = k - 2
    steps = rel_step * (1.0 + np.abs(x[1:-1]))
    idx = np.arange(m)

    plus = np.tile(x, (m, 1))
    minus = np.tile(x, (m, 1))
    plus[idx, idx + 1] += steps
    minus[idx, idx + 1] -= steps

    with np.errstate(all="ignore"):
        f_plus = _integrand_values(
            plus, t1, state_w, velocity_w, moment_w, moment_lo, moment_hi, h,
            ops, consts,
        ) @ quad_w
        f_minus = _integrand_values(
            minus, t1, state_w, velocity_w, moment_w, moment_lo, moment_hi, h,
            ops, consts,
        ) @ quad_w
        grad = (f_plus - f_minus) / (2.0 * steps)
    if not np.all(np.isfinite(grad)):
        bad = np.flatnonzero(~np.isfinite(grad))
        return grad, int(bad[0])
    return grad, -1
