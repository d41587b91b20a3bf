"""Compiled geodesic kernels for metrics of the form

    phi(x, v) = w(x) * (sqrt(v^T G(x) v) + beta(x) . v)

which covers the Riemannian, conformal, Randers and scaled families and
their coefficient perturbations. Scalar fields from the catalog are lowered
to a small postfix program evaluated by a stack machine, so the kernels run
one lane at a time without Python overhead.

The numpy integrator in :mod:`finsler_lab.integrator` is the reference
implementation; these kernels reproduce it (same RK4 steps, same
renormalization, same event refinement) and are cross-checked in the tests.
"""

from __future__ import annotations

from functools import lru_cache
from math import cos, exp, log, sin, sqrt

import numpy as np
from numba import njit

from .fields import Affine, CapLog, Constant, Exp, Gaussian, Polynomial, Product, ScalarField, Sum

OP_CONST, OP_GAUSS, OP_CAPLOG, OP_POLY, OP_SUM, OP_AFFINE, OP_EXP, OP_PROD = range(8)
STACK = 64

RUNNING, EXIT, TARGET, STOP, OVERFLOW = 0, 1, 2, 3, 4


def _emit(f: ScalarField, ops, params):
    if isinstance(f, Constant):
        ops.append((OP_CONST, len(params), 0))
        params.append(float(f.value_))
    elif isinstance(f, Gaussian):
        ops.append((OP_GAUSS, len(params), 0))
        params.extend([f.amplitude, f.center[0], f.center[1], f.width])
    elif isinstance(f, CapLog):
        ops.append((OP_CAPLOG, len(params), 0))
        params.append(f.rho)
    elif isinstance(f, Polynomial):
        ops.append((OP_POLY, len(params), len(f.coeffs)))
        params.append(1.0 if f.cutoff else 0.0)
        for i, j, c in f.coeffs:
            params.extend([i, j, c])
    elif isinstance(f, Sum):
        for t in f.terms:
            _emit(t, ops, params)
        ops.append((OP_SUM, 0, len(f.terms)))
    elif isinstance(f, Affine):
        _emit(f.field, ops, params)
        ops.append((OP_AFFINE, len(params), 1))
        params.extend([f.scale, f.offset])
    elif isinstance(f, Exp):
        _emit(f.field, ops, params)
        ops.append((OP_EXP, 0, 1))
    elif isinstance(f, Product):
        _emit(f.left, ops, params)
        _emit(f.right, ops, params)
        ops.append((OP_PROD, 0, 2))
    else:
        raise TypeError(f"field {type(f).__name__} cannot be compiled")


def compile_fields(fields):
    """Lower a sequence of fields to one flat float64 program array.

    Layout: ``[starts (len(fields)+1) | pad to 11 | ops (3 per op) | params |
    scratch stack (3 x STACK)]`` with the ops/params/stack offsets stored in
    slots 8, 9 and 10. A single array keeps the kernels' calling convention
    cheap.
    """
    ops, params, starts = [], [], [0]
    for f in fields:
        _emit(f, ops, params)
        starts.append(len(ops))
    if len(starts) > 8:
        raise ValueError("at most 7 fields per program")
    head = np.zeros(12)
    head[: len(starts)] = starts
    o = len(head)
    p = o + 3 * len(ops)
    st = p + len(params)
    head[8], head[9], head[10] = o, p, st
    flat = np.array([v for op in ops for v in op], dtype=float)
    return np.concatenate([head, flat, np.array(params, dtype=float), np.zeros(3 * STACK)])


@lru_cache(maxsize=128)
def compile_metric(metric, integrand=None):
    """Return the compiled program for ``metric`` (plus an optional integrand
    field) or None when the metric has no normal form."""
    nf = metric.normal_form()
    if nf is None:
        return None
    try:
        return compile_fields(tuple(nf) + (integrand if integrand is not None else Constant(0.0),))
    except TypeError:
        return None


@njit(cache=True, error_model="numpy")
def _eval(prog, lo, hi, x, y):
    O = int(prog[8])
    P = int(prog[9])
    S = int(prog[10])
    S1 = S + STACK
    S2 = S + 2 * STACK
    sp = 0
    for k in range(lo, hi):
        op = int(prog[O + 3 * k])
        o = P + int(prog[O + 3 * k + 1])
        if op == OP_CONST:
            prog[S + sp] = prog[o]
            prog[S1 + sp] = 0.0
            prog[S2 + sp] = 0.0
            sp += 1
        elif op == OP_GAUSS:
            dx = x - prog[o + 1]
            dy = y - prog[o + 2]
            s2 = prog[o + 3] * prog[o + 3]
            val = prog[o] * exp(-0.5 * (dx * dx + dy * dy) / s2)
            prog[S + sp] = val
            prog[S1 + sp] = -val * dx / s2
            prog[S2 + sp] = -val * dy / s2
            sp += 1
        elif op == OP_CAPLOG:
            rho = prog[o]
            q = 1.0 + rho * rho * (x * x + y * y)
            prog[S + sp] = log(2.0 * rho) - log(q)
            prog[S1 + sp] = -2.0 * rho * rho * x / q
            prog[S2 + sp] = -2.0 * rho * rho * y / q
            sp += 1
        elif op == OP_POLY:
            n = int(prog[O + 3 * k + 2])
            val = 0.0
            gx = 0.0
            gy = 0.0
            for m in range(n):
                i = int(prog[o + 1 + 3 * m])
                j = int(prog[o + 2 + 3 * m])
                c = prog[o + 3 + 3 * m]
                xi_ = 1.0
                for _ in range(i - 1):
                    xi_ *= x
                yj_ = 1.0
                for _ in range(j - 1):
                    yj_ *= y
                xi1 = xi_ * x if i > 0 else 1.0
                yj1 = yj_ * y if j > 0 else 1.0
                val += c * xi1 * yj1
                if i > 0:
                    gx += c * i * xi_ * yj1
                if j > 0:
                    gy += c * j * xi1 * yj_
            if prog[o] != 0.0:
                wc = 1.0 - x * x - y * y
                gx = gx * wc - 2.0 * x * val
                gy = gy * wc - 2.0 * y * val
                val = val * wc
            prog[S + sp] = val
            prog[S1 + sp] = gx
            prog[S2 + sp] = gy
            sp += 1
        elif op == OP_SUM:
            n = int(prog[O + 3 * k + 2])
            b = sp - n
            for m in range(1, n):
                prog[S + b] += prog[S + b + m]
                prog[S1 + b] += prog[S1 + b + m]
                prog[S2 + b] += prog[S2 + b + m]
            sp = b + 1
        elif op == OP_AFFINE:
            a = prog[o]
            prog[S + sp - 1] = prog[o + 1] + a * prog[S + sp - 1]
            prog[S1 + sp - 1] *= a
            prog[S2 + sp - 1] *= a
        elif op == OP_EXP:
            e = exp(prog[S + sp - 1])
            prog[S + sp - 1] = e
            prog[S1 + sp - 1] *= e
            prog[S2 + sp - 1] *= e
        elif op == OP_PROD:
            a0, a1, a2 = prog[S + sp - 2], prog[S1 + sp - 2], prog[S2 + sp - 2]
            b0, b1, b2 = prog[S + sp - 1], prog[S1 + sp - 1], prog[S2 + sp - 1]
            prog[S + sp - 2] = a0 * b0
            prog[S1 + sp - 2] = a0 * b1 + b0 * a1
            prog[S2 + sp - 2] = a0 * b2 + b0 * a2
            sp -= 1
    return prog[S], prog[S1], prog[S2]


@njit(cache=True, error_model="numpy", inline="always")
def _field(prog, k, x, y):
    lo = int(prog[k])
    hi = int(prog[k + 1])
    if hi - lo == 1:
        O = int(prog[8])
        if int(prog[O + 3 * lo]) == OP_CONST:
            return prog[int(prog[9]) + int(prog[O + 3 * lo + 1])], 0.0, 0.0
    return _eval(prog, lo, hi, x, y)


@njit(cache=True, error_model="numpy", inline="always")
def _ham(prog, x, y, p1, p2):
    """Return ``(phi*, vhat, d_x phi(vhat))`` at ``(x, y; p1, p2)``."""
    w, wx, wy = _field(prog, 0, x, y)
    a, ax, ay = _field(prog, 1, x, y)
    b, bx, by = _field(prog, 2, x, y)
    c, cx, cy = _field(prog, 3, x, y)
    be1, be1x, be1y = _field(prog, 4, x, y)
    be2, be2x, be2y = _field(prog, 5, x, y)
    det = a * c - b * b
    i11 = c / det
    i12 = -b / det
    i22 = a / det
    bb = i11 * be1 * be1 + 2.0 * i12 * be1 * be2 + i22 * be2 * be2
    xb = i11 * p1 * be1 + i12 * (p1 * be2 + p2 * be1) + i22 * p2 * be2
    xx = i11 * p1 * p1 + 2.0 * i12 * p1 * p2 + i22 * p2 * p2
    s = sqrt(xb * xb + (1.0 - bb) * xx)
    if xb >= 0.0:
        dr = xx / (xb + s)
    else:
        dr = (s - xb) / (1.0 - bb)
    e1 = p1 / dr - be1
    e2 = p2 / dr - be2
    v1 = i11 * e1 + i12 * e2
    v2 = i12 * e1 + i22 * e2
    alpha = sqrt(a * v1 * v1 + 2.0 * b * v1 * v2 + c * v2 * v2)
    nr = alpha + be1 * v1 + be2 * v2
    v1 /= nr
    v2 /= nr
    alpha /= nr
    gx = wx / w + (ax * v1 * v1 + 2.0 * bx * v1 * v2 + cx * v2 * v2) / (2.0 * alpha) + be1x * v1 + be2x * v2
    gy = wy / w + (ay * v1 * v1 + 2.0 * by * v1 * v2 + cy * v2 * v2) / (2.0 * alpha) + be1y * v1 + be2y * v2
    return dr / w, v1 / w, v2 / w, gx, gy


@njit(cache=True, error_model="numpy")
def _legendre(prog, x, y, v1, v2):
    w = _field(prog, 0, x, y)[0]
    a = _field(prog, 1, x, y)[0]
    b = _field(prog, 2, x, y)[0]
    c = _field(prog, 3, x, y)[0]
    be1 = _field(prog, 4, x, y)[0]
    be2 = _field(prog, 5, x, y)[0]
    g1 = a * v1 + b * v2
    g2 = b * v1 + c * v2
    alpha = sqrt(g1 * v1 + g2 * v2)
    phi = w * (alpha + be1 * v1 + be2 * v2)
    return phi * w * (g1 / alpha + be1), phi * w * (g2 / alpha + be2)


@njit(cache=True, error_model="numpy", inline="always")
def _integrand(prog, x, y, vx, vy, sgn):
    """Integrand value and its derivative along the velocity ``(vx, vy)``."""
    f, gx, gy = _field(prog, 6, x, y)
    return f, sgn * (gx * vx + gy * vy)


@njit(cache=True, error_model="numpy")
def _rk4(prog, x, y, p1, p2, k1x, k1y, k1p, k1q, h):
    d, u1, u2, g1, g2 = _ham(prog, x + 0.5 * h * k1x, y + 0.5 * h * k1y, p1 + 0.5 * h * k1p, p2 + 0.5 * h * k1q)
    k2x, k2y, k2p, k2q = d * u1, d * u2, d * d * g1, d * d * g2
    d, u1, u2, g1, g2 = _ham(prog, x + 0.5 * h * k2x, y + 0.5 * h * k2y, p1 + 0.5 * h * k2p, p2 + 0.5 * h * k2q)
    k3x, k3y, k3p, k3q = d * u1, d * u2, d * d * g1, d * d * g2
    d, u1, u2, g1, g2 = _ham(prog, x + h * k3x, y + h * k3y, p1 + h * k3p, p2 + h * k3q)
    k4x, k4y, k4p, k4q = d * u1, d * u2, d * d * g1, d * d * g2
    return (
        x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y),
        p1 + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
        p2 + h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q),
    )


@njit(cache=True, error_model="numpy")
def _event(prog, kind, x, y, p1, p2, radius, tx, ty):
    if kind == EXIT:
        return x * x + y * y - radius * radius
    d, u1, u2, g1, g2 = _ham(prog, x, y, p1, p2)
    return u1 * (tx - x) + u2 * (ty - y)


@njit(cache=True, error_model="numpy")
def _refine(prog, kind, x, y, p1, p2, k1x, k1y, k1p, k1q, sgn, hmax, radius, tx, ty, g0, g1, lo0=0.0):
    # Illinois false position on tau in [lo0, hmax]
    lo = lo0
    hi = hmax
    glo = g0
    ghi = g1
    side = 0
    for _ in range(80):
        tau = (lo * ghi - hi * glo) / (ghi - glo)
        if not (tau > lo and tau < hi):
            tau = 0.5 * (lo + hi)
        xs, ys, q1, q2 = _rk4(prog, x, y, p1, p2, k1x, k1y, k1p, k1q, sgn * tau)
        g = _event(prog, kind, xs, ys, q1, q2, radius, tx, ty)
        if g == 0.0:
            return tau
        if (g > 0.0) == (glo > 0.0):
            lo = tau
            glo = g
            if side == 1:
                ghi *= 0.5
            side = 1
        else:
            hi = tau
            ghi = g
            if side == -1:
                glo *= 0.5
            side = -1
        if hi - lo < 1e-13:
            break
    if abs(glo) < abs(ghi):
        return lo
    return hi


@njit(cache=True, error_model="numpy")
def _flow_lane(prog, x, y, p1, p2, h, sgn, radius, use_exit, tx, ty, use_tgt, stop, use_stop,
               use_int, max_len, rec, rbuf):
    """Integrate one lane; returns (x, y, p1, p2, t, status, drift, integral, nrec)."""
    d, u1, u2, g1, g2 = _ham(prog, x, y, p1, p2)
    p1 /= d
    p2 /= d
    k1x, k1y, k1p, k1q = u1, u2, g1, g2
    t = 0.0
    drift = 0.0
    acc = 0.0
    f_old = 0.0
    df_old = 0.0
    if use_int:
        f_old, df_old = _integrand(prog, x, y, k1x, k1y, sgn)
    ge = x * x + y * y - radius * radius
    gt = k1x * (tx - x) + k1y * (ty - y)
    nrec = 0
    if rec:
        rbuf[0, 0] = 0.0
        rbuf[0, 1] = x
        rbuf[0, 2] = y
        rbuf[0, 3] = p1
        rbuf[0, 4] = p2
        nrec = 1
    first = True
    while True:
        hs = h
        if use_stop and stop - abs(t) < hs:
            hs = stop - abs(t)
        xn, yn, q1, q2 = _rk4(prog, x, y, p1, p2, k1x, k1y, k1p, k1q, sgn * hs)
        d, u1, u2, g1, g2 = _ham(prog, xn, yn, q1, q2)
        dd = abs(d - 1.0)
        if dd > drift:
            drift = dd
        q1 /= d
        q2 /= d
        n1x, n1y, n1p, n1q = u1, u2, g1, g2
        tn = t + sgn * hs

        tau = np.inf
        code = RUNNING
        if use_exit:
            gen = xn * xn + yn * yn - radius * radius
            if first and ge >= -1e-14 and gen >= 0.0:
                tau = 0.0
                code = EXIT
                if sgn * (x * k1x + y * k1y) < 0.0:
                    # heading inward from the circle: chord shorter than a step
                    sub = hs
                    for _ in range(60):
                        sub *= 0.5
                        xq, yq, _q1, _q2 = _rk4(prog, x, y, p1, p2, k1x, k1y, k1p, k1q, sgn * sub)
                        gq = xq * xq + yq * yq - radius * radius
                        if gq < 0.0:
                            tau = _refine(prog, EXIT, x, y, p1, p2, k1x, k1y, k1p, k1q, sgn, hs, radius,
                                          tx, ty, gq, gen, sub)
                            break
            elif ge < 0.0 and gen >= 0.0:
                ts = _refine(prog, EXIT, x, y, p1, p2, k1x, k1y, k1p, k1q, sgn, hs, radius,
                             tx, ty, ge, gen)
                if ts < tau:
                    tau = ts
                    code = EXIT
            ge = gen
        if use_tgt:
            gtn = n1x * (tx - xn) + n1y * (ty - yn)
            if first and gt <= 0.0:
                if 0.0 < tau:
                    tau = 0.0
                    code = TARGET
            elif gt > 0.0 and gtn <= 0.0:
                ts = _refine(prog, TARGET, x, y, p1, p2, k1x, k1y, k1p, k1q, sgn, hs, radius,
                             tx, ty, gt, gtn)
                if ts < tau:
                    tau = ts
                    code = TARGET
            gt = gtn
        if use_stop and abs(tn) >= stop - 1e-15 and hs < tau:
            tau = hs
            code = STOP
        if code == RUNNING and (abs(tn) > max_len or not np.isfinite(d)):
            tau = hs
            code = OVERFLOW

        if code != RUNNING:
            if tau < hs:
                xs, ys, s1, s2 = _rk4(prog, x, y, p1, p2, k1x, k1y, k1p, k1q, sgn * tau)
                d2, w1, w2, _g1, _g2 = _ham(prog, xs, ys, s1, s2)
                s1 /= d2
                s2 /= d2
                vsx, vsy = d2 * w1, d2 * w2
            else:
                xs, ys, s1, s2 = xn, yn, q1, q2
                vsx, vsy = n1x, n1y
            if use_int:
                fs, dfs = _integrand(prog, xs, ys, vsx, vsy, sgn)
                acc += 0.5 * (f_old + fs) * tau + tau * tau / 12.0 * (df_old - dfs)
            tf = t + sgn * tau
            if rec and nrec < rbuf.shape[0]:
                rbuf[nrec, 0] = tf
                rbuf[nrec, 1] = xs
                rbuf[nrec, 2] = ys
                rbuf[nrec, 3] = s1
                rbuf[nrec, 4] = s2
                nrec += 1
            return xs, ys, s1, s2, tf, code, drift, acc, nrec

        if use_int:
            f_new, df_new = _integrand(prog, xn, yn, n1x, n1y, sgn)
            acc += 0.5 * (f_old + f_new) * hs + hs * hs / 12.0 * (df_old - df_new)
            f_old = f_new
            df_old = df_new
        x, y, p1, p2, t = xn, yn, q1, q2, tn
        k1x, k1y, k1p, k1q = n1x, n1y, n1p, n1q
        if rec and nrec < rbuf.shape[0]:
            rbuf[nrec, 0] = t
            rbuf[nrec, 1] = x
            rbuf[nrec, 2] = y
            rbuf[nrec, 3] = p1
            rbuf[nrec, 4] = p2
            nrec += 1
        first = False


@njit(cache=True, error_model="numpy")
def flow_kernel(prog, x0, xi0, h, sgn, radius, use_exit, tgt, use_tgt, stop, use_stop, use_int,
                max_len):
    n = x0.shape[0]
    rbuf = np.empty((1, 5))
    out = np.empty((n, 8))
    for i in range(n):
        r = _flow_lane(prog, x0[i, 0], x0[i, 1], xi0[i, 0], xi0[i, 1], h, sgn, radius, use_exit,
                       tgt[i, 0], tgt[i, 1], use_tgt, stop[i], use_stop, use_int, max_len, False, rbuf)
        out[i, 0], out[i, 1], out[i, 2], out[i, 3] = r[0], r[1], r[2], r[3]
        out[i, 4], out[i, 5], out[i, 6], out[i, 7] = r[4], r[5], r[6], r[7]
    return out


@njit(cache=True, error_model="numpy")
def record_kernel(prog, x0, xi0, h, sgn, radius, use_exit, tgt, use_tgt, stop, use_stop, max_len,
                  nmax):
    rbuf = np.empty((nmax, 5))
    r = _flow_lane(prog, x0[0], x0[1], xi0[0], xi0[1], h, sgn, radius, use_exit, tgt[0], tgt[1],
                   use_tgt, stop, use_stop, False, max_len, True, rbuf)
    out = np.empty(8)
    out[0], out[1], out[2], out[3] = r[0], r[1], r[2], r[3]
    out[4], out[5], out[6], out[7] = r[4], r[5], r[6], r[7]
    return out, rbuf[: r[8]]


@njit(cache=True, error_model="numpy")
def _shoot(prog, rbuf, ax, ay, bx, by, psi, h, guard, max_len):
    v1 = cos(psi)
    v2 = sin(psi)
    p1, p2 = _legendre(prog, ax, ay, v1, v2)
    r = _flow_lane(prog, ax, ay, p1, p2, h, 1.0, guard, True, bx, by, True, 0.0, False, False,
                   max_len, False, rbuf)
    x, y, q1, q2, t, code = r[0], r[1], r[2], r[3], r[4], r[5]
    d, u1, u2, g1, g2 = _ham(prog, x, y, q1, q2)
    nu = sqrt(u1 * u1 + u2 * u2)
    mis = (u1 * (by - y) - u2 * (bx - x)) / nu
    return mis, t, code == TARGET, r[6], x, y, q1, q2


@njit(cache=True, error_model="numpy")
def _wrap(a):
    return (a + np.pi) % (2.0 * np.pi) - np.pi


@njit(cache=True, error_model="numpy")
def connect_kernel(prog, a, b, psi_init, chain, h, guard, tol, max_iter, restarts, max_len):
    """Secant shooting on the initial velocity angle, one lane at a time.

    ``chain[i]`` marks lanes whose problem continues lane ``i - 1`` (same
    source, neighbouring target); such lanes start from the extrapolated
    previous solutions and reuse the last secant slope. Restarts fall back to
    ``psi_init`` plus alternating offsets.

    Returns rows ``(psi, length, |mismatch|, ok, drift, shots, x_end, xi_end)``.
    """
    n = a.shape[0]
    rbuf = np.empty((1, 5))
    out = np.empty((n, 10))
    prev_ok = False
    prev2_ok = False
    prev_psi = 0.0
    prev2_psi = 0.0
    slope = 0.0
    for i in range(n):
        ax, ay, bx, by = a[i, 0], a[i, 1], b[i, 0], b[i, 1]
        base = psi_init[i]
        best_psi = base
        best_m = np.inf
        best_t = np.nan
        best_d = 0.0
        fx = fy = fp = fq = np.nan
        done = False
        shots = 0
        chained = chain[i] and prev_ok and i > 0
        for attempt in range(restarts + 1):
            if attempt == 0 and chained:
                psi0 = prev_psi
                if chain[i - 1] and prev2_ok:
                    psi0 = prev_psi + _wrap(prev_psi - prev2_psi)
            else:
                k = (attempt + 1) // 2
                sg = 1.0 if attempt % 2 == 0 else -1.0
                psi0 = base + sg * 0.15 * k
            m0, t0, ok0, d0, f0x, f0y, f0p, f0q = _shoot(prog, rbuf, ax, ay, bx, by, psi0, h, guard, max_len)
            shots += 1
            if ok0 and abs(m0) < tol:
                best_psi, best_m, best_t, best_d = psi0, abs(m0), t0, d0
                fx, fy, fp, fq = f0x, f0y, f0p, f0q
                done = True
                break
            if attempt == 0 and chained and ok0 and slope != 0.0:
                st = -m0 / slope
                if st > 0.05:
                    st = 0.05
                elif st < -0.05:
                    st = -0.05
                psi1 = psi0 + st
            else:
                psi1 = psi0 + 1e-4
            m1, t1, ok1, d1, f1x, f1y, f1p, f1q = _shoot(prog, rbuf, ax, ay, bx, by, psi1, h, guard, max_len)
            shots += 1
            for _ in range(max_iter):
                if ok1 and abs(m1) < tol:
                    break
                if ok1 and ok0 and m1 != m0:
                    step = -m1 * (psi1 - psi0) / (m1 - m0)
                elif ok1:
                    step = 0.05 if m1 < 0 else -0.05
                else:
                    step = 0.5 * _wrap(base - psi1)
                if step > 0.3:
                    step = 0.3
                elif step < -0.3:
                    step = -0.3
                if ok1 and ok0 and m1 != m0:
                    slope = (m1 - m0) / (psi1 - psi0)
                psi0, m0, ok0 = psi1, m1, ok1
                psi1 = psi1 + step
                m1, t1, ok1, d1, f1x, f1y, f1p, f1q = _shoot(prog, rbuf, ax, ay, bx, by, psi1, h, guard, max_len)
                shots += 1
            if ok1 and ok0 and m1 != m0 and psi1 != psi0:
                slope = (m1 - m0) / (psi1 - psi0)
            if ok1 and abs(m1) < best_m:
                best_psi, best_m, best_t, best_d = psi1, abs(m1), t1, d1
                fx, fy, fp, fq = f1x, f1y, f1p, f1q
            if ok1 and abs(m1) < tol:
                done = True
                break
        prev2_ok, prev2_psi = prev_ok, prev_psi
        prev_ok, prev_psi = done, best_psi
        out[i, 0] = best_psi
        out[i, 1] = best_t
        out[i, 2] = best_m
        out[i, 3] = 1.0 if done else 0.0
        out[i, 4] = best_d
        out[i, 5] = shots
        out[i, 6], out[i, 7], out[i, 8], out[i, 9] = fx, fy, fp, fq
    return out
