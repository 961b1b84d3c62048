"""Hot loops: postfix-program evaluation and fixed-step RK4 geodesic integration.

A metric program holds m*m entries of g (row-major) followed by m*m*m
entries of dg_ij/dx_k, all as postfix code from :func:`expr.compile_program`.
"""
import math

import numpy as np

from ._accel import jit
from .errors import GeometryError

# keep in sync with expr.OP_*
_CONST, _VAR, _ADD, _SUB, _MUL, _DIV, _POW, _NEG = 0, 1, 2, 3, 4, 5, 6, 7
_EXP, _LOG, _SIN, _COS, _SQRT = 8, 9, 10, 11, 12


def _eval_one(ops, args, consts, start, stop, x, stack):
    sp = 0
    for pc in range(start, stop):
        op = ops[pc]
        if op == _CONST:
            stack[sp] = consts[args[pc]]
            sp += 1
        elif op == _VAR:
            stack[sp] = x[args[pc]]
            sp += 1
        elif op <= _POW:
            b = stack[sp - 1]
            a = stack[sp - 2]
            sp -= 1
            if op == _ADD:
                stack[sp - 1] = a + b
            elif op == _SUB:
                stack[sp - 1] = a - b
            elif op == _MUL:
                stack[sp - 1] = a * b
            elif op == _DIV:
                stack[sp - 1] = a / b if b != 0.0 else math.nan
            else:
                if a < 0.0 and b != math.floor(b):
                    stack[sp - 1] = math.nan
                else:
                    stack[sp - 1] = a ** b
        elif op == _NEG:
            stack[sp - 1] = -stack[sp - 1]
        elif op == _EXP:
            stack[sp - 1] = math.exp(stack[sp - 1])
        elif op == _LOG:
            a = stack[sp - 1]
            stack[sp - 1] = math.log(a) if a > 0.0 else math.nan
        elif op == _SIN:
            stack[sp - 1] = math.sin(stack[sp - 1])
        elif op == _COS:
            stack[sp - 1] = math.cos(stack[sp - 1])
        else:
            a = stack[sp - 1]
            stack[sp - 1] = math.sqrt(a) if a >= 0.0 else math.nan
    return stack[0]


def _eval_all(ops, args, consts, starts, x, stack, out):
    for e in range(starts.shape[0] - 1):
        out[e] = _eval_one(ops, args, consts, starts[e], starts[e + 1], x, stack)


def _christoffel_from(g, dg, m, out, work):
    """Gamma^k_ij into ``out[k, i, j]``; returns False if g is singular or non-finite."""
    # Gauss-Jordan inverse with partial pivoting
    for i in range(m):
        for j in range(m):
            work[i, j] = g[i, j]
            work[i, m + j] = 1.0 if i == j else 0.0
    scale = 0.0
    for i in range(m):
        for j in range(m):
            if not math.isfinite(g[i, j]):
                return False
            scale = max(scale, abs(g[i, j]))
    if scale == 0.0:
        return False
    for c in range(m):
        piv = c
        for r in range(c + 1, m):
            if abs(work[r, c]) > abs(work[piv, c]):
                piv = r
        if abs(work[piv, c]) <= 1e-14 * scale:
            return False
        if piv != c:
            for j in range(2 * m):
                tmp = work[c, j]
                work[c, j] = work[piv, j]
                work[piv, j] = tmp
        d = work[c, c]
        for j in range(2 * m):
            work[c, j] /= d
        for r in range(m):
            if r != c:
                fac = work[r, c]
                if fac != 0.0:
                    for j in range(2 * m):
                        work[r, j] -= fac * work[c, j]
    for k in range(m):
        for i in range(m):
            for j in range(i, m):
                s = 0.0
                for l in range(m):
                    s += work[k, m + l] * (dg[j, l, i] + dg[i, l, j] - dg[i, j, l])
                out[k, i, j] = 0.5 * s
                out[k, j, i] = 0.5 * s
    return True


def _metric_at(ops, args, consts, starts, m, x, stack, buf, g, dg):
    _eval_all(ops, args, consts, starts, x, stack, buf)
    mm = m * m
    for i in range(m):
        for j in range(m):
            g[i, j] = buf[i * m + j]
            for k in range(m):
                dg[i, j, k] = buf[mm + (i * m + j) * m + k]


def _accel(ops, args, consts, starts, m, x, v, stack, buf, g, dg, gam, work, out):
    _metric_at(ops, args, consts, starts, m, x, stack, buf, g, dg)
    if not _christoffel_from(g, dg, m, gam, work):
        return False
    for k in range(m):
        s = 0.0
        for i in range(m):
            for j in range(m):
                s += gam[k, i, j] * v[i] * v[j]
        out[k] = -s
    return True


def _speed2(ops, args, consts, starts, m, x, v, stack, buf, g, dg):
    _metric_at(ops, args, consts, starts, m, x, stack, buf, g, dg)
    s = 0.0
    for i in range(m):
        for j in range(m):
            s += g[i, j] * v[i] * v[j]
    return s


def _rk4(ops, args, consts, starts, stack_size, x0, v0, h, nsteps):
    """Returns (xs, vs, speed2, failed_step); failed_step is -1 on success."""
    m = x0.shape[0]
    xs = np.empty((nsteps + 1, m))
    vs = np.empty((nsteps + 1, m))
    sp2 = np.empty(nsteps + 1)
    stack = np.empty(stack_size)
    buf = np.empty(starts.shape[0] - 1)
    g = np.empty((m, m))
    dg = np.empty((m, m, m))
    gam = np.empty((m, m, m))
    work = np.empty((m, 2 * m))
    k1v = np.empty(m)
    k2v = np.empty(m)
    k3v = np.empty(m)
    k4v = np.empty(m)
    xt = np.empty(m)
    vt = np.empty(m)
    v2 = np.empty(m)
    v3 = np.empty(m)
    x = x0.copy()
    v = v0.copy()
    xs[0] = x
    vs[0] = v
    sp2[0] = _speed2(ops, args, consts, starts, m, x, v, stack, buf, g, dg)
    for n in range(nsteps):
        if not _accel(ops, args, consts, starts, m, x, v, stack, buf, g, dg, gam, work, k1v):
            return xs, vs, sp2, n
        for i in range(m):
            xt[i] = x[i] + 0.5 * h * v[i]
            v2[i] = v[i] + 0.5 * h * k1v[i]
        if not _accel(ops, args, consts, starts, m, xt, v2, stack, buf, g, dg, gam, work, k2v):
            return xs, vs, sp2, n
        for i in range(m):
            xt[i] = x[i] + 0.5 * h * v2[i]
            v3[i] = v[i] + 0.5 * h * k2v[i]
        if not _accel(ops, args, consts, starts, m, xt, v3, stack, buf, g, dg, gam, work, k3v):
            return xs, vs, sp2, n
        for i in range(m):
            xt[i] = x[i] + h * v3[i]
            vt[i] = v[i] + h * k3v[i]
        if not _accel(ops, args, consts, starts, m, xt, vt, stack, buf, g, dg, gam, work, k4v):
            return xs, vs, sp2, n
        for i in range(m):
            x[i] += h / 6.0 * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + vt[i])
            v[i] += h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i])
        xs[n + 1] = x
        vs[n + 1] = v
        sp2[n + 1] = _speed2(ops, args, consts, starts, m, x, v, stack, buf, g, dg)
        if not math.isfinite(sp2[n + 1]):
            return xs, vs, sp2, n + 1
    return xs, vs, sp2, -1


# jit in dependency order, rebinding the names the callers resolve
_eval_one = jit(_eval_one)
_eval_all = jit(_eval_all)
_christoffel_from = jit(_christoffel_from)
_metric_at = jit(_metric_at)
_accel = jit(_accel)
_speed2 = jit(_speed2)
_rk4 = jit(_rk4)

eval_all = _eval_all
christoffel_from = _christoffel_from
rk4_program = _rk4


def eval_program(program, x) -> np.ndarray:
    out = np.empty(program.count)
    stack = np.empty(program.stack_size)
    eval_all(program.ops, program.args, program.consts, program.starts, np.asarray(x, dtype=float), stack, out)
    return out


def rk4_numpy(christoffel_fn, metric_fn, x0, v0, h, nsteps):
    """Reference RK4 loop driven by numpy callables; same contract as ``rk4_program``."""
    m = len(x0)
    xs = np.empty((nsteps + 1, m))
    vs = np.empty((nsteps + 1, m))
    sp2 = np.empty(nsteps + 1)
    x = np.array(x0, dtype=float)
    v = np.array(v0, dtype=float)

    def acc(xp, vp):
        gam = christoffel_fn(xp)
        return -np.einsum("kij,i,j->k", gam, vp, vp)

    xs[0], vs[0] = x, v
    sp2[0] = v @ metric_fn(x) @ v
    for n in range(nsteps):
        try:
            k1 = acc(x, v)
            v2 = v + 0.5 * h * k1
            k2 = acc(x + 0.5 * h * v, v2)
            v3 = v + 0.5 * h * k2
            k3 = acc(x + 0.5 * h * v2, v3)
            v4 = v + h * k3
            k4 = acc(x + h * v3, v4)
        except (ArithmeticError, GeometryError):
            return xs, vs, sp2, n
        x = x + h / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4)
        v = v + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        xs[n + 1], vs[n + 1] = x, v
        sp2[n + 1] = v @ metric_fn(x) @ v
        if not np.isfinite(sp2[n + 1]):
            return xs, vs, sp2, n + 1
    return xs, vs, sp2, -1
