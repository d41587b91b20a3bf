"""Batched fixed-step RK4 for the cotangent geodesic flow.

All lanes (independent geodesics) advance together; lanes that hit a terminal
event are frozen and dropped from the working set. Event times are refined
inside the offending step by bracketed false position (Illinois variant) on a
partial RK4 step from the start of that step.

Momenta are renormalized onto ``phi* = 1`` after every step; the largest
pre-renormalization defect is kept per lane as ``energy_drift``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from ._fast import compile_metric, flow_kernel, record_kernel
from .metrics import FinslerMetric

DEFAULT_STEP = 1e-3
EVENT_TOL = 1e-13
MAX_LENGTH = 40.0

RUNNING, EXIT, TARGET, STOP, OVERFLOW = 0, 1, 2, 3, 4


@dataclass
class EventRecord:
    hit: np.ndarray
    t: np.ndarray
    x: np.ndarray
    xi: np.ndarray

    @classmethod
    def empty(cls, n):
        return cls(np.zeros(n, bool), np.full(n, np.nan), np.full((n, 2), np.nan), np.full((n, 2), np.nan))


@dataclass
class FlowResult:
    x: np.ndarray
    xi: np.ndarray
    t: np.ndarray
    status: np.ndarray
    energy_drift: np.ndarray
    integral: Optional[np.ndarray] = None
    enter: Optional[EventRecord] = None
    leave: Optional[EventRecord] = None
    path: Optional[Dict[str, np.ndarray]] = field(default=None, repr=False)


def rk4_step(metric: FinslerMetric, x, xi, h, k1=None):
    """One classical RK4 step; ``h`` may be a scalar or per-lane array."""
    h = np.asarray(h, dtype=float)
    hh = h[..., None] if h.ndim else h
    if k1 is None:
        k1 = metric.hamiltonian_field(x, xi)
    k1x, k1p = k1
    k2x, k2p = metric.hamiltonian_field(x + 0.5 * hh * k1x, xi + 0.5 * hh * k1p)
    k3x, k3p = metric.hamiltonian_field(x + 0.5 * hh * k2x, xi + 0.5 * hh * k2p)
    k4x, k4p = metric.hamiltonian_field(x + hh * k3x, xi + hh * k3p)
    xn = x + hh / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
    pn = xi + hh / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
    return xn, pn


def _renormalize(metric, x, xi):
    d = metric.dual_norm(x, xi)
    return xi / d[..., None], np.abs(d - 1.0)


def _integrand_slope(field, x, xdot, hsign):
    """Value of ``field`` along the lane and its derivative in arc length."""
    f, g = field.value_and_grad(x)
    f = np.broadcast_to(f, x.shape[:-1])
    g = np.broadcast_to(g, x.shape)
    return f, hsign * np.sum(g * xdot, axis=-1)


def _hermite(f0, d0, f1, d1, h):
    """Trapezoid rule with the end correction ``h^2 / 12 (f'(0) - f'(h))``
    (fourth order, exact for cubics)."""
    return 0.5 * (f0 + f1) * h + h * h / 12.0 * (d0 - d1)


def _event_values(kind, x, xdot, t, param):
    if kind == "exit":
        return x[:, 0] ** 2 + x[:, 1] ** 2 - param * param
    if kind == "target":
        d = param - x
        return xdot[:, 0] * d[:, 0] + xdot[:, 1] * d[:, 1]
    if kind == "inner":
        return x[:, 0] ** 2 + x[:, 1] ** 2 - param * param
    raise KeyError(kind)


def _refine(metric, kind, x, xi, t, hsign, hmax, param, g0, g1, lo0=None):
    """Illinois false position for the root of an event function over the
    partial step ``tau in [lo0, hmax]`` (per lane, ``lo0`` defaults to 0).
    Returns ``tau``."""
    lo = np.zeros_like(hmax) if lo0 is None else lo0.copy()
    hi = hmax.copy()
    glo, ghi = g0.copy(), g1.copy()
    side = np.zeros(len(lo), int)
    tau = hi.copy()
    for _ in range(80):
        with np.errstate(divide="ignore", invalid="ignore"):
            tau = (lo * ghi - hi * glo) / (ghi - glo)
        bad = ~np.isfinite(tau) | (tau <= lo) | (tau >= hi)
        tau = np.where(bad, 0.5 * (lo + hi), tau)
        xs, ps = rk4_step(metric, x, xi, hsign * tau)
        xdot = metric.velocity(xs, ps) if kind == "target" else None
        g = _event_values(kind, xs, xdot, t + hsign * tau, param)
        same = np.sign(g) == np.sign(glo)
        lo = np.where(same, tau, lo)
        glo = np.where(same, g, glo)
        hi = np.where(same, hi, tau)
        ghi = np.where(same, ghi, g)
        # Illinois: halve the stale endpoint's value when one side repeats
        glo = np.where(~same & (side == -1), 0.5 * glo, glo)
        ghi = np.where(same & (side == 1), 0.5 * ghi, ghi)
        side = np.where(same, 1, -1)
        if np.all((hi - lo) < EVENT_TOL) or np.all(g == 0):
            break
    return np.where(np.abs(glo) < np.abs(ghi), lo, hi)


def integrate(
    metric: FinslerMetric,
    x0,
    xi0,
    *,
    step: float = DEFAULT_STEP,
    radius: Optional[float] = None,
    direction: int = 1,
    target=None,
    stop_time=None,
    inner_radius: Optional[float] = None,
    integrand=None,
    max_length: float = MAX_LENGTH,
    record: bool = False,
    compiled: bool = True,
) -> FlowResult:
    """Integrate lanes of the geodesic flow until a terminal event.

    Terminal events: leaving the disc of ``radius`` (status ``EXIT``), passing
    the closest point to ``target`` (``TARGET``), reaching ``|t| = stop_time``
    (``STOP``) or exceeding ``max_length`` or leaving finite values (``OVERFLOW``). With
    ``inner_radius`` the first inward and outward crossings of that circle are
    recorded without stopping. ``integrand`` (a scalar field) is integrated
    along each lane in arc length by the end-corrected trapezoid rule
    (fourth order).

    ``direction=-1`` integrates the same Hamiltonian field backwards in time;
    reported times are then negative.

    Metrics with a normal form run through the compiled kernels unless
    ``compiled=False``; inner-radius events always use this numpy loop.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    xi0 = np.atleast_2d(np.asarray(xi0, dtype=float))
    n = max(len(x0), len(xi0))
    if compiled and inner_radius is None and (not record or n == 1):
        prog = compile_metric(metric, integrand)
        if prog is not None:
            return _integrate_compiled(prog, np.broadcast_to(x0, (n, 2)), np.broadcast_to(xi0, (n, 2)), step, radius,
                                       direction, target, stop_time, integrand is not None, max_length, record)
    x0 = np.broadcast_to(x0, (n, 2)).copy()
    xi0, _ = _renormalize(metric, x0, np.broadcast_to(xi0, (n, 2)).copy())
    hsign = float(direction)
    if target is not None:
        target = np.broadcast_to(np.asarray(target, float), (n, 2)).copy()
    if stop_time is not None:
        stop_time = np.broadcast_to(np.asarray(stop_time, float), (n,)).copy()

    out_x, out_xi = x0.copy(), xi0.copy()
    out_t = np.zeros(n)
    status = np.zeros(n, int)
    drift = np.zeros(n)
    integral = np.zeros(n) if integrand is not None else None
    enter = EventRecord.empty(n) if inner_radius is not None else None
    leave = EventRecord.empty(n) if inner_radius is not None else None

    idx = np.arange(n)
    x, xi, t = x0, xi0, np.zeros(n)
    k1 = metric.hamiltonian_field(x, xi)
    tgt = target
    stp = stop_time
    g_exit = _event_values("exit", x, None, t, radius) if radius is not None else None
    g_tgt = _event_values("target", x, k1[0], t, tgt) if tgt is not None else None
    g_in = _event_values("inner", x, None, t, inner_radius) if inner_radius is not None else None
    if integrand is not None:
        f_old, df_old = _integrand_slope(integrand, x, k1[0], hsign)
    acc = np.zeros(n) if integrand is not None else None
    dmax = np.zeros(n)

    if record:
        rec_t, rec_x, rec_p = [np.zeros(n)], [x0.copy()], [xi0.copy()]

    first = True
    while len(idx):
        h = np.full(len(idx), step)
        if stp is not None:
            h = np.minimum(h, stp - np.abs(t))
        xn, pn = rk4_step(metric, x, xi, hsign * h, k1=k1)
        pn, dd = _renormalize(metric, xn, pn)
        dmax = np.maximum(dmax, dd)
        tn = t + hsign * h
        k1n = metric.hamiltonian_field(xn, pn)

        tau = np.full(len(idx), np.inf)
        code = np.zeros(len(idx), int)
        if radius is not None:
            gn = _event_values("exit", xn, None, tn, radius)
            hit = (g_exit < 0) & (gn >= 0)
            if first:
                at_start = (g_exit >= -1e-14) & (gn >= 0)
                tau = np.where(at_start, 0.0, tau)
                code = np.where(at_start, EXIT, code)
                hit &= ~at_start
                # starting on the circle but heading inward: the chord is
                # shorter than one step, so look for an interior point first
                inward = at_start & (hsign * np.sum(x * k1[0], axis=-1) < 0)
                if np.any(inward):
                    s = np.flatnonzero(inward)
                    sub = h[s].copy()
                    gs = np.ones(len(s))
                    for _ in range(60):
                        todo = gs >= 0
                        if not np.any(todo):
                            break
                        sub[todo] *= 0.5
                        xq, _ = rk4_step(metric, x[s[todo]], xi[s[todo]], hsign * sub[todo])
                        gs[todo] = _event_values("exit", xq, None, None, radius)
                    ok = gs < 0
                    if np.any(ok):
                        s, sub, gs = s[ok], sub[ok], gs[ok]
                        tau[s] = _refine(metric, "exit", x[s], xi[s], t[s], hsign, h[s], radius, gs, gn[s], lo0=sub)
            if np.any(hit):
                s = np.flatnonzero(hit)
                ts = _refine(metric, "exit", x[s], xi[s], t[s], hsign, h[s], radius, g_exit[s], gn[s])
                better = ts < tau[s]
                tau[s[better]] = ts[better]
                code[s[better]] = EXIT
            g_exit = gn
        if tgt is not None:
            gn = _event_values("target", xn, k1n[0], tn, tgt)
            hit = (g_tgt > 0) & (gn <= 0)
            if first:
                at_start = (g_tgt <= 0)
                tau = np.where(at_start & (0.0 < tau), 0.0, tau)
                code = np.where(at_start & (tau == 0.0), TARGET, code)
                hit &= ~at_start
            if np.any(hit):
                s = np.flatnonzero(hit)
                ts = _refine(metric, "target", x[s], xi[s], t[s], hsign, h[s], tgt[s], g_tgt[s], gn[s])
                better = ts < tau[s]
                tau[s[better]] = ts[better]
                code[s[better]] = TARGET
            g_tgt = gn
        if stp is not None:
            done = np.abs(tn) >= stp - 1e-15
            better = done & (h < tau)
            tau = np.where(better, h, tau)
            code = np.where(better, STOP, code)
        if inner_radius is not None:
            gn = _event_values("inner", xn, None, tn, inner_radius)
            for rec, mask in ((enter, (g_in > 0) & (gn <= 0)), (leave, (g_in < 0) & (gn >= 0))):
                mask = mask & ~rec.hit[idx]
                if np.any(mask):
                    s = np.flatnonzero(mask)
                    ts = _refine(metric, "inner", x[s], xi[s], t[s], hsign, h[s], inner_radius, g_in[s], gn[s])
                    ok = ts <= tau[s]
                    s, ts = s[ok], ts[ok]
                    if len(s):
                        xs, ps = rk4_step(metric, x[s], xi[s], hsign * ts)
                        ps, _ = _renormalize(metric, xs, ps)
                        lanes = idx[s]
                        rec.hit[lanes] = True
                        rec.t[lanes] = t[s] + hsign * ts
                        rec.x[lanes] = xs
                        rec.xi[lanes] = ps
            g_in = gn

        # overlong or non-finite lanes stop with OVERFLOW
        over = ((np.abs(tn) > max_length) | ~np.all(np.isfinite(pn), axis=-1)) & ~np.isfinite(tau)
        if np.any(over):
            tau = np.where(over, h, tau)
            code = np.where(over, OVERFLOW, code)

        fin = np.isfinite(tau)
        if np.any(fin):
            s = np.flatnonzero(fin)
            partial = tau[s] < h[s]
            xs, ps = xn[s].copy(), pn[s].copy()
            vs = k1n[0][s].copy()
            if np.any(partial):
                q = s[partial]
                xq, pq = rk4_step(metric, x[q], xi[q], hsign * tau[q])
                pq, _ = _renormalize(metric, xq, pq)
                xs[partial], ps[partial] = xq, pq
                if integrand is not None:
                    vs[partial] = metric.hamiltonian_field(xq, pq)[0]
            lanes = idx[s]
            out_x[lanes], out_xi[lanes] = xs, ps
            out_t[lanes] = t[s] + hsign * tau[s]
            status[lanes] = code[s]
            drift[lanes] = dmax[s]
            if integrand is not None:
                fs, dfs = _integrand_slope(integrand, xs, vs, hsign)
                acc[s] += _hermite(f_old[s], df_old[s], fs, dfs, tau[s])
                integral[lanes] = acc[s]

        if integrand is not None:
            f_new, df_new = _integrand_slope(integrand, xn, k1n[0], hsign)
            acc = acc + _hermite(f_old, df_old, f_new, df_new, h)
            f_old, df_old = f_new, df_new

        if record:
            rt, rx, rp = rec_t[-1].copy(), rec_x[-1].copy(), rec_p[-1].copy()
            live = ~fin
            rt[idx[live]], rx[idx[live]], rp[idx[live]] = tn[live], xn[live], pn[live]
            if np.any(fin):
                rt[lanes], rx[lanes], rp[lanes] = out_t[lanes], out_x[lanes], out_xi[lanes]
            rec_t.append(rt)
            rec_x.append(rx)
            rec_p.append(rp)

        keep = ~fin
        idx = idx[keep]
        x, xi, t = xn[keep], pn[keep], tn[keep]
        k1 = (k1n[0][keep], k1n[1][keep])
        dmax = dmax[keep]
        if g_exit is not None:
            g_exit = g_exit[keep]
        if g_tgt is not None:
            g_tgt, tgt = g_tgt[keep], tgt[keep]
        if g_in is not None:
            g_in = g_in[keep]
        if stp is not None:
            stp = stp[keep]
        if integrand is not None:
            acc, f_old, df_old = acc[keep], f_old[keep], df_old[keep]
        first = False

    res = FlowResult(out_x, out_xi, out_t, status, drift, integral, enter, leave)
    if record:
        res.path = {"t": np.array(rec_t), "x": np.array(rec_x), "xi": np.array(rec_p)}
    return res


def _integrate_compiled(prog, x0, xi0, step, radius, direction, target, stop_time, use_int, max_length, record):
    n = len(x0)
    x0 = np.ascontiguousarray(x0, dtype=float)
    xi0 = np.ascontiguousarray(xi0, dtype=float)
    tgt = np.zeros((n, 2)) if target is None else np.ascontiguousarray(np.broadcast_to(np.asarray(target, float), (n, 2)))
    stp = np.zeros(n) if stop_time is None else np.ascontiguousarray(np.broadcast_to(np.asarray(stop_time, float), (n,)))
    rad = 0.0 if radius is None else float(radius)
    args = (float(step), float(direction), rad, radius is not None, tgt)
    if record:
        nmax = int(max_length / step) + 4
        out, buf = record_kernel(prog, x0[0], xi0[0], args[0], args[1], rad, radius is not None, tgt[0],
                                 target is not None, float(stp[0]), stop_time is not None, float(max_length), nmax)
        out = out[None, :]
    else:
        out = flow_kernel(prog, x0, xi0, args[0], args[1], rad, radius is not None, tgt,
                          target is not None, stp, stop_time is not None, use_int, float(max_length))
    res = FlowResult(
        x=out[:, 0:2].copy(),
        xi=out[:, 2:4].copy(),
        t=out[:, 4].copy(),
        status=out[:, 5].astype(int),
        energy_drift=out[:, 6].copy(),
        integral=out[:, 7].copy() if use_int else None,
    )
    if record:
        res.path = {"t": buf[:, 0:1].copy(), "x": buf[:, None, 1:3].copy(), "xi": buf[:, None, 3:5].copy()}
    return res
