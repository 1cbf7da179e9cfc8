# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled evaluation kernels.

Mirrors the NumPy fallback in ``_kernels_py``: scalar loops over the grid
nodes, with the integrand evaluated by a small stack machine.  The
gradient loops over the interior coordinates and reuses scratch buffers
across the 2(k-2) perturbed objective evaluations.
"""

from libc.math cimport cos, exp, fabs, floor, isfinite, log, pow, sin, sqrt, tgamma
from libc.stdlib cimport free, malloc

import numpy as np

name = "compiled"

DEF OP_CONST = 0
DEF OP_T = 1
DEF OP_X = 2
DEF OP_DX = 3
DEF OP_NEG = 4
DEF OP_ADD = 5
DEF OP_SUB = 6
DEF OP_MUL = 7
DEF OP_DIV = 8
DEF OP_POW = 9
DEF OP_LN = 10
DEF OP_EXP = 11
DEF OP_SQRT = 12
DEF OP_SIN = 13
DEF OP_COS = 14
DEF OP_ABS = 15
DEF OP_GAMMA = 16


cdef double _run_program(const int[:, ::1] ops, const double[::1] consts,
                         double t, double x, double d, double* stack,
                         bint* ok) nogil:
    cdef Py_ssize_t n = ops.shape[0]
    cdef Py_ssize_t i
    cdef int sp = 0
    cdef int code
    cdef double a, b
    ok[0] = True
    for i in range(n):
        code = ops[i, 0]
        if code == OP_CONST:
            stack[sp] = consts[ops[i, 1]]
            sp += 1
        elif code == OP_T:
            stack[sp] = t
            sp += 1
        elif code == OP_X:
            stack[sp] = x
            sp += 1
        elif code == OP_DX:
            stack[sp] = d
            sp += 1
        elif code == OP_NEG:
            stack[sp - 1] = -stack[sp - 1]
        elif code == OP_LN:
            a = stack[sp - 1]
            if a <= 0.0:
                ok[0] = False
                return 0.0
            stack[sp - 1] = log(a)
        elif code == OP_EXP:
            stack[sp - 1] = exp(stack[sp - 1])
        elif code == OP_SQRT:
            a = stack[sp - 1]
            if a < 0.0:
                ok[0] = False
                return 0.0
            stack[sp - 1] = sqrt(a)
        elif code == OP_SIN:
            stack[sp - 1] = sin(stack[sp - 1])
        elif code == OP_COS:
            stack[sp - 1] = cos(stack[sp - 1])
        elif code == OP_ABS:
            stack[sp - 1] = fabs(stack[sp - 1])
        elif code == OP_GAMMA:
            a = stack[sp - 1]
            if a <= 0.0 and a == floor(a):
                ok[0] = False
                return 0.0
            stack[sp - 1] = tgamma(a)
        else:
            sp -= 1
            b = stack[sp]
            a = stack[sp - 1]
            if code == OP_ADD:
                stack[sp - 1] = a + b
            elif code == OP_SUB:
                stack[sp - 1] = a - b
            elif code == OP_MUL:
                stack[sp - 1] = a * b
            elif code == OP_DIV:
                if b == 0.0:
                    ok[0] = False
                    return 0.0
                stack[sp - 1] = a / b
            else:  # OP_POW
                if (a < 0.0 and b != floor(b)) or (a == 0.0 and b < 0.0):
                    ok[0] = False
                    return 0.0
                stack[sp - 1] = pow(a, b)
    return stack[sp - 1]


cdef double _objective_suffix(const double[::1] x,
                              const double[::1] t1,
                              const double[::1] state_w,
                              const double[::1] velocity_w,
                              const double[:, ::1] moment_w,
                              const double[:, ::1] moment_lo,
                              const double[:, ::1] moment_hi,
                              const double[::1] quad_w,
                              double h,
                              const int[:, ::1] ops,
                              const double[::1] consts,
                              double* stack,
                              double* running,
                              Py_ssize_t i0,
                              Py_ssize_t* bad_node) nogil:
    # Sum of node contributions i0..k-1, with ``running`` holding the
    # moment sums accumulated over intervals 0..i0-2 on entry.
    cdef Py_ssize_t k = x.shape[0]
    cdef Py_ssize_t n_mom = moment_w.shape[0]
    cdef Py_ssize_t i, p
    cdef double u, d, value, total

    cdef bint ok

    total = 0.0
    bad_node[0] = -1
    for i in range(i0, k):
        if i == k - 1:
            u = (3.0 * x[k - 1] - 4.0 * x[k - 2] + x[k - 3]) / (2.0 * h)
        else:
            u = (x[i + 1] - x[i - 1]) / (2.0 * h)
        d = state_w[i - 1] * x[i] + velocity_w[i - 1] * u
        for p in range(n_mom):
            running[p] += moment_lo[p, i - 1] * x[i - 1] + moment_hi[p, i - 1] * x[i]
            d += moment_w[p, i - 1] * running[p]
        if not isfinite(d):
            bad_node[0] = i
            return 0.0
        value = _run_program(ops, consts, t1[i - 1], x[i], d, stack, &ok)
        if not ok or not isfinite(value):
            bad_node[0] = i
            return 0.0
        total += quad_w[i - 1] * value
    if not isfinite(total):
        bad_node[0] = 1
        return 0.0
    return total


cdef double _objective_core(const double[::1] x,
                            const double[::1] t1,
                            const double[::1] state_w,
                            const double[::1] velocity_w,
                            const double[:, ::1] moment_w,
                            const double[:, ::1] moment_lo,
                            const double[:, ::1] moment_hi,
                            const double[::1] quad_w,
                            double h,
                            const int[:, ::1] ops,
                            const double[::1] consts,
                            double* stack,
                            double* running,
                            Py_ssize_t* bad_node) nogil:
    cdef Py_ssize_t p
    for p in range(moment_w.shape[0]):
        running[p] = 0.0
    return _objective_suffix(x, t1, state_w, velocity_w, moment_w, moment_lo,
                             moment_hi, quad_w, h, ops, consts, stack,
                             running, 1, bad_node)


cdef bint _prefix_pass(const double[::1] x,
                       const double[::1] t1,
                       const double[::1] state_w,
                       const double[::1] velocity_w,
                       const double[:, ::1] moment_w,
                       const double[:, ::1] moment_lo,
                       const double[:, ::1] moment_hi,
                       const double[::1] quad_w,
                       double h,
                       const int[:, ::1] ops,
                       const double[::1] consts,
                       double* stack,
                       double* prefix_total,
                       double* prefix_running) nogil:
    # prefix_total[i] and prefix_running[p*k + i] record the objective and
    # moment sums accumulated before node i is processed, i in 1..k-1.
    cdef Py_ssize_t k = x.shape[0]
    cdef Py_ssize_t n_mom = moment_w.shape[0]
    cdef Py_ssize_t i, p
    cdef double u, d, value, total
    cdef bint ok

    total = 0.0
    for p in range(n_mom):
        prefix_running[p * k + 1] = 0.0
    prefix_total[1] = 0.0
    for i in range(1, k - 1):
        u = (x[i + 1] - x[i - 1]) / (2.0 * h)
        d = state_w[i - 1] * x[i] + velocity_w[i - 1] * u
        for p in range(n_mom):
            prefix_running[p * k + i + 1] = (
                prefix_running[p * k + i]
                + moment_lo[p, i - 1] * x[i - 1] + moment_hi[p, i - 1] * x[i]
            )
            d += moment_w[p, i - 1] * prefix_running[p * k + i + 1]
        if not isfinite(d):
            return False
        value = _run_program(ops, consts, t1[i - 1], x[i], d, stack, &ok)
        if not ok or not isfinite(value):
            return False
        total += quad_w[i - 1] * value
        prefix_total[i + 1] = total
    return True


def eval_objective(const double[::1] x,
                   const double[::1] t1,
                   const double[::1] state_w,
                   const double[::1] velocity_w,
                   const double[:, ::1] moment_w,
                   const double[:, ::1] moment_lo,
                   const double[:, ::1] moment_hi,
                   const double[::1] quad_w,
                   double h,
                   const int[:, ::1] ops,
                   const double[::1] consts,
                   int max_stack):
    cdef Py_ssize_t bad_node = -1
    cdef double value
    cdef double* stack = <double*> malloc((max_stack + 1) * sizeof(double))
    cdef double* running = <double*> malloc((moment_w.shape[0] + 1) * sizeof(double))
    if stack == NULL or running == NULL:
        free(stack)
        free(running)
        raise MemoryError()
    try:
        value = _objective_core(x, t1, state_w, velocity_w, moment_w,
                                moment_lo, moment_hi, quad_w, h, ops, consts,
                                stack, running, &bad_node)
    finally:
        free(stack)
        free(running)
    if bad_node >= 0:
        return float("nan"), int(bad_node)
    return value, -1


def eval_gradient(const double[::1] x,
                  const double[::1] t1,
                  const double[::1] state_w,
                  const double[::1] velocity_w,
                  const double[:, ::1] moment_w,
                  const double[:, ::1] moment_lo,
                  const double[:, ::1] moment_hi,
                  const double[::1] quad_w,
                  double h,
                  const int[:, ::1] ops,
                  const double[::1] consts,
                  int max_stack,
                  double rel_step):
    cdef Py_ssize_t k = x.shape[0]
    cdef Py_ssize_t m = k - 2
    cdef Py_ssize_t n_mom = moment_w.shape[0]
    cdef Py_ssize_t j, p, i0, bad_node
    cdef double step, f_plus, f_minus, saved
    cdef bint have_prefix

    grad_arr = np.empty(m, dtype=np.float64)
    work_arr = np.asarray(x).copy()
    cdef double[::1] grad = grad_arr
    cdef double[::1] work = work_arr

    cdef double* stack = <double*> malloc((max_stack + 1) * sizeof(double))
    cdef double* running = <double*> malloc((n_mom + 1) * sizeof(double))
    cdef double* prefix_total = <double*> malloc(k * sizeof(double))
    cdef double* prefix_running = <double*> malloc((n_mom * k + 1) * sizeof(double))
    if stack == NULL or running == NULL or prefix_total == NULL or prefix_running == NULL:
        free(stack)
        free(running)
        free(prefix_total)
        free(prefix_running)
        raise MemoryError()

    bad_node = -1
    try:
        with nogil:
            # Perturbing interior sample j+1 leaves nodes before j
            # untouched, so the unperturbed prefix sums can be reused and
            # only the suffix re-evaluated.  If the base point itself
            # fails to evaluate the prefix is unusable; fall back to full
            # re-evaluation so the failing coordinate is still reported.
            have_prefix = _prefix_pass(work, t1, state_w, velocity_w,
                                       moment_w, moment_lo, moment_hi,
                                       quad_w, h, ops, consts, stack,
                                       prefix_total, prefix_running)
            for j in range(m):
                i0 = j if j >= 1 else 1
                saved = work[j + 1]
                step = rel_step * (1.0 + fabs(saved))

                work[j + 1] = saved + step
                if have_prefix:
                    for p in range(n_mom):
                        running[p] = prefix_running[p * k + i0]
                    f_plus = prefix_total[i0] + _objective_suffix(
                        work, t1, state_w, velocity_w, moment_w, moment_lo,
                        moment_hi, quad_w, h, ops, consts, stack, running,
                        i0, &bad_node)
                else:
                    f_plus = _objective_core(work, t1, state_w, velocity_w,
                                             moment_w, moment_lo, moment_hi,
                                             quad_w, h, ops, consts, stack,
                                             running, &bad_node)
                if bad_node >= 0:
                    work[j + 1] = saved
                    bad_node = j
                    break

                work[j + 1] = saved - step
                if have_prefix:
                    for p in range(n_mom):
                        running[p] = prefix_running[p * k + i0]
                    f_minus = prefix_total[i0] + _objective_suffix(
                        work, t1, state_w, velocity_w, moment_w, moment_lo,
                        moment_hi, quad_w, h, ops, consts, stack, running,
                        i0, &bad_node)
                else:
                    f_minus = _objective_core(work, t1, state_w, velocity_w,
                                              moment_w, moment_lo, moment_hi,
                                              quad_w, h, ops, consts, stack,
                                              running, &bad_node)
                work[j + 1] = saved
                if bad_node >= 0:
                    bad_node = j
                    break
                grad[j] = (f_plus - f_minus) / (2.0 * step)
    finally:
        free(stack)
        free(running)
        free(prefix_total)
        free(prefix_running)

    if bad_node >= 0:
        return grad_arr, int(bad_node)
    return grad_arr, -1
