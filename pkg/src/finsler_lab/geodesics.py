"""Geodesics, chords, two-point shooting, Jacobi fields and simplicity checks.

Everything is batched over lanes: ``connect_batch`` solves many two-point
problems at once and is what the table and envelope builders use. The single
point helpers (``flow``, ``connect``, ``exit_chord``) return richer records.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, NumericalError, SolverError
from ._fast import compile_metric, connect_kernel
from .integrator import DEFAULT_STEP, MAX_LENGTH, OVERFLOW, TARGET, integrate, rk4_step
from .metrics import FinslerMetric, _perp

SHOOT_TOL = 1e-11
SHOOT_MAX_ITER = 30
SHOOT_RESTARTS = 8
TANGENCY_ELL = 1e-4


def _as_points(p):
    return np.atleast_2d(np.asarray(p, dtype=float))


def _check_in_disc(x, radius, what="point"):
    r = np.hypot(x[..., 0], x[..., 1])
    if np.any(r > radius * (1 + 1e-12)) or not np.all(np.isfinite(x)):
        raise DomainError(f"{what} outside the disc of radius {radius}: max |x| = {np.max(r):.6g}")


def _unit(angle):
    return np.stack([np.cos(angle), np.sin(angle)], axis=-1)


def _unit_covector(metric, x, angle):
    """phi*-unit covector dual to the velocity direction ``angle``."""
    v = _unit(angle)
    return metric.legendre(x, v / metric.norm(x, v)[..., None])


@dataclass
class Geodesic:
    """Arc-length parametrized geodesic samples."""

    t: np.ndarray
    x: np.ndarray
    xi: np.ndarray
    energy_drift: float = 0.0

    @property
    def length(self) -> float:
        return float(self.t[-1])

    @property
    def start(self):
        return self.x[0]

    @property
    def end(self):
        return self.x[-1]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "x", "y", "alpha1", "alpha2"])
            for t, x, p in zip(self.t, self.x, self.xi):
                w.writerow([repr(float(t)), repr(float(x[0])), repr(float(x[1])), repr(float(p[0])), repr(float(p[1]))])


def _geodesic_from_path(res, lane=0):
    t = res.path["t"][:, lane]
    keep = np.concatenate([[True], np.diff(t) != 0])
    # backward runs have negative times; report |t| so samples increase
    return Geodesic(np.abs(t[keep]), res.path["x"][keep, lane], res.path["xi"][keep, lane], float(res.energy_drift[lane]))


def flow(metric: FinslerMetric, x0, xi0, radius: float = 1.0, step: float = DEFAULT_STEP) -> Geodesic:
    """Forward geodesic from ``x0`` with initial covector ``xi0`` up to the
    circle of ``radius``."""
    x0 = np.asarray(x0, float)
    xi0 = np.asarray(xi0, float)
    if radius > metric.radius + 1e-12:
        raise DomainError(f"radius {radius} exceeds the metric domain {metric.radius}")
    _check_in_disc(x0, radius)
    if np.hypot(*xi0) == 0:
        raise DomainError("zero covector")
    if abs(np.hypot(*x0) - radius) < 1e-12:
        v = metric.velocity(x0, xi0)
        if np.dot(v, x0) >= 0:
            raise DomainError("start on the boundary must point inward")
    res = integrate(metric, x0, xi0, step=step, radius=radius, record=True)
    if res.status[0] == OVERFLOW:
        raise NumericalError("geodesic did not leave the disc (trapped trajectory)", float(res.t[0]), res.x[0])
    return _geodesic_from_path(res)


@dataclass
class Chord:
    """Maximal geodesic through the unit vector ``u`` at ``x``."""

    x: np.ndarray
    u: np.ndarray
    p_minus: np.ndarray
    p_plus: np.ndarray
    tau_minus: float
    tau_plus: float
    xi: Optional[np.ndarray] = None

    @property
    def ell(self) -> float:
        return self.tau_plus - self.tau_minus

    @property
    def tangent(self) -> bool:
        return self.ell < TANGENCY_ELL

    @property
    def tau(self) -> float:
        return 0.5 * (self.tau_plus + self.tau_minus)

    @property
    def midpoint(self):
        return 0.5 * (self.p_plus + self.p_minus)

    @property
    def lam(self) -> float:
        if self.ell > 0:
            return float(np.linalg.norm(self.p_plus - self.p_minus) / self.ell)
        return float(np.linalg.norm(self.u))

    @property
    def w(self):
        d = self.p_plus - self.p_minus
        n = np.linalg.norm(d)
        if self.ell > 0 and n > 0:
            return d / n
        return self.u / np.linalg.norm(self.u)


@dataclass
class ChordBatch:
    p_minus: np.ndarray
    p_plus: np.ndarray
    tau_minus: np.ndarray
    tau_plus: np.ndarray
    xi: np.ndarray

    @property
    def ell(self):
        return self.tau_plus - self.tau_minus


def exit_chords(metric: FinslerMetric, x, v, radius: float = 1.0, step: float = DEFAULT_STEP) -> ChordBatch:
    """Batched chord computation: forward and backward runs of the same
    Hamiltonian field from ``(x, v)`` to the circle of ``radius``."""
    x = _as_points(x)
    v = _as_points(v)
    xi = metric.legendre(x, v)
    fw = integrate(metric, x, xi, step=step, radius=radius)
    bw = integrate(metric, x, xi, step=step, radius=radius, direction=-1)
    bad = (fw.status == OVERFLOW) | (bw.status == OVERFLOW)
    if np.any(bad):
        raise NumericalError("chord did not reach the boundary", float(np.sum(bad)), np.flatnonzero(bad))
    xi = xi / metric.dual_norm(x, xi)[:, None]
    return ChordBatch(bw.x, fw.x, bw.t, fw.t, xi)


def exit_chord(metric: FinslerMetric, x, v, radius: float = 1.0, step: float = DEFAULT_STEP) -> Chord:
    """Chord through the phi-unit vector ``v`` at ``x`` (``|x| <= radius``)."""
    x = np.asarray(x, float)
    v = np.asarray(v, float)
    _check_in_disc(x, radius)
    if np.hypot(*v) == 0:
        raise DomainError("zero vector")
    v = v / metric.norm(x, v)
    b = exit_chords(metric, x, v, radius, step)
    return Chord(x, v, b.p_minus[0], b.p_plus[0], float(b.tau_minus[0]), float(b.tau_plus[0]), b.xi[0])


# --- shooting ----------------------------------------------------------------


@dataclass
class ShootResult:
    psi: np.ndarray
    length: np.ndarray
    xi0: np.ndarray
    residual: np.ndarray
    drift: np.ndarray
    x_end: Optional[np.ndarray] = None
    xi_end: Optional[np.ndarray] = None


def _shoot(metric, a, b, psi, step, guard):
    xi0 = _unit_covector(metric, a, psi)
    res = integrate(metric, a, xi0, step=step, radius=guard, target=b)
    d = b - res.x
    vel = metric.velocity(res.x, res.xi)
    vel = vel / np.hypot(vel[:, 0], vel[:, 1])[:, None]
    mis = vel[:, 0] * d[:, 1] - vel[:, 1] * d[:, 0]
    ok = res.status == TARGET
    return mis, res.t, ok, res.energy_drift, res.x, res.xi


def connect_batch(metric: FinslerMetric, a, b, step: float = DEFAULT_STEP, tol: float = SHOOT_TOL,
                  max_iter: int = SHOOT_MAX_ITER, restarts: int = SHOOT_RESTARTS, psi_init=None,
                  chain=None, compiled: bool = True) -> ShootResult:
    """Solve ``len(a)`` two-point problems by secant iteration on the angle of
    the initial velocity. The mismatch is the signed distance of ``b`` from
    the geodesic at its point of closest approach. ``psi_init`` overrides the
    straight-chord initial angles; ``chain`` (compiled path only) marks lanes
    that continue the previous lane's problem, see
    :func:`finsler_lab._fast.connect_kernel`.
    """
    a = _as_points(a)
    b = _as_points(b)
    n = max(len(a), len(b))
    a = np.broadcast_to(a, (n, 2)).copy()
    b = np.broadcast_to(b, (n, 2)).copy()
    guard = metric.radius
    chord = b - a
    base = np.arctan2(chord[:, 1], chord[:, 0]) if psi_init is None else np.asarray(psi_init, float)
    prog = compile_metric(metric) if compiled else None
    if prog is not None:
        ch = np.zeros(n, np.bool_) if chain is None else np.ascontiguousarray(np.broadcast_to(chain, (n,)), np.bool_)
        out = connect_kernel(prog, a, b, np.ascontiguousarray(np.broadcast_to(base, (n,))), ch, float(step), guard,
                             float(tol), int(max_iter), int(restarts), MAX_LENGTH)
        bad = out[:, 3] == 0
        if np.any(bad):
            todo = np.flatnonzero(bad)
            raise SolverError(
                f"shooting failed for {len(todo)} of {n} pairs; the metric may not be simple",
                float(np.max(out[todo, 2])),
                np.stack([a[todo], b[todo]], axis=1),
                lanes=todo,
            )
        psi = out[:, 0]
        return ShootResult(psi, out[:, 1], _unit_covector(metric, a, psi), out[:, 2], out[:, 4],
                           out[:, 6:8].copy(), out[:, 8:10].copy())

    psi_out = np.full(n, np.nan)
    len_out = np.full(n, np.nan)
    res_out = np.full(n, np.inf)
    drift_out = np.zeros(n)
    x_out = np.full((n, 2), np.nan)
    xi_out = np.full((n, 2), np.nan)
    todo = np.arange(n)
    for attempt in range(restarts + 1):
        if not len(todo):
            break
        if attempt == 0:
            offset = np.zeros(len(todo))
        else:
            # deterministic spread of restart angles around the chord direction
            k = (attempt + 1) // 2
            offset = np.full(len(todo), (-1) ** attempt * 0.15 * k)
        p_a, p_b = a[todo], b[todo]
        psi0 = base[todo] + offset
        psi1 = psi0 + 1e-4
        m0, _, ok0, _, _, _ = _shoot(metric, p_a, p_b, psi0, step, guard)
        m1, t1, ok1, d1, xe, pe = _shoot(metric, p_a, p_b, psi1, step, guard)
        live = np.arange(len(todo))
        psi_c, m_c, t_c, ok_c, d_c = psi1.copy(), m1.copy(), t1.copy(), ok1.copy(), d1.copy()
        xe_c, pe_c = xe.copy(), pe.copy()
        psi_p, m_p = psi0.copy(), m0.copy()
        for _ in range(max_iter):
            conv = ok_c[live] & (np.abs(m_c[live]) < tol)
            live = live[~conv]
            if not len(live):
                break
            dm = m_c[live] - m_p[live]
            dpsi = psi_c[live] - psi_p[live]
            with np.errstate(divide="ignore", invalid="ignore"):
                stepv = -m_c[live] * dpsi / dm
            stepv = np.where(np.isfinite(stepv), stepv, 0.05)
            stepv = np.clip(stepv, -0.3, 0.3)
            # failed lanes (missed target) get pulled back toward the chord
            stepv = np.where(ok_c[live], stepv, 0.5 * (base[todo][live] - psi_c[live]))
            new = psi_c[live] + stepv
            psi_p[live], m_p[live] = psi_c[live], m_c[live]
            mm, tt, oo, dd, xe, pe = _shoot(metric, p_a[live], p_b[live], new, step, guard)
            psi_c[live], m_c[live], t_c[live], ok_c[live], d_c[live] = new, mm, tt, oo, dd
            xe_c[live], pe_c[live] = xe, pe
        good = ok_c & (np.abs(m_c) < tol)
        gi = todo[good]
        psi_out[gi], len_out[gi], res_out[gi], drift_out[gi] = psi_c[good], t_c[good], np.abs(m_c[good]), d_c[good]
        x_out[gi], xi_out[gi] = xe_c[good], pe_c[good]
        bad = ~good
        res_out[todo[bad]] = np.where(ok_c[bad], np.abs(m_c[bad]), np.inf)
        todo = todo[bad]
    if len(todo):
        raise SolverError(
            f"shooting failed for {len(todo)} of {n} pairs; the metric may not be simple",
            float(np.max(res_out[todo])),
            np.stack([a[todo], b[todo]], axis=1),
            lanes=todo,
        )
    xi0 = _unit_covector(metric, a, psi_out)
    return ShootResult(psi_out, len_out, xi0, res_out, drift_out, x_out, xi_out)


def connect(metric: FinslerMetric, a, b, radius: float = 1.0, step: float = DEFAULT_STEP) -> Geodesic:
    """Geodesic from ``a`` to ``b`` (both in the closed disc of ``radius``)."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if radius > metric.radius + 1e-12:
        raise DomainError(f"radius {radius} exceeds the metric domain {metric.radius}")
    _check_in_disc(a, radius, "a")
    _check_in_disc(b, radius, "b")
    if np.allclose(a, b, rtol=0, atol=1e-14):
        raise DomainError("a and b coincide")
    sol = connect_batch(metric, a, b, step=step)
    res = integrate(metric, a, sol.xi0, step=step, radius=metric.radius, target=b, record=True)
    g = _geodesic_from_path(res)
    return g


def distances(metric: FinslerMetric, a, b, step: float = DEFAULT_STEP) -> np.ndarray:
    """``d(a_i, b_i)`` for arrays of pairs (zero where ``a_i == b_i``)."""
    a = _as_points(a)
    b = _as_points(b)
    n = max(len(a), len(b))
    a = np.broadcast_to(a, (n, 2))
    b = np.broadcast_to(b, (n, 2))
    out = np.zeros(n)
    diff = np.hypot(*(b - a).T) > 1e-14
    if np.any(diff):
        out[diff] = connect_batch(metric, a[diff], b[diff], step=step).length
    return out


# --- Jacobi fields -----------------------------------------------------------


def _field_jvp(metric, x, xi, dx, dxi, eps=1e-6):
    fp = metric.hamiltonian_field(x + eps * dx, xi + eps * dxi)
    fm = metric.hamiltonian_field(x - eps * dx, xi - eps * dxi)
    return (fp[0] - fm[0]) / (2 * eps), (fp[1] - fm[1]) / (2 * eps)


def jacobi_transverse(metric: FinslerMetric, x0, xi0, t_end, step: float = 1e-2):
    """Integrate the linearized flow along lanes of geodesics.

    Initial variation: zero position, unit transverse momentum. Returns the
    sample times and the transverse component ``cross(xdot, dx)`` of the
    position variation, shapes ``(steps+1, lanes)``.
    """
    x = _as_points(x0).copy()
    xi = _as_points(xi0).copy()
    xi = xi / metric.dual_norm(x, xi)[:, None]
    n = len(x)
    t_end = np.broadcast_to(np.asarray(t_end, float), (n,))
    dx = np.zeros_like(x)
    dxi = _perp(xi) / np.hypot(xi[:, 0], xi[:, 1])[:, None]
    nsteps = int(np.ceil(np.max(t_end) / step)) if n else 0
    ts = [np.zeros(n)]
    js = [np.zeros(n)]
    t = np.zeros(n)
    for _ in range(nsteps):
        h = np.clip(t_end - t, 0.0, step)
        hh = h[:, None]

        def rhs(x_, p_, dx_, dp_):
            fx, fp = metric.hamiltonian_field(x_, p_)
            jx, jp = _field_jvp(metric, x_, p_, dx_, dp_)
            return fx, fp, jx, jp

        k1 = rhs(x, xi, dx, dxi)
        k2 = rhs(*(s + 0.5 * hh * k for s, k in zip((x, xi, dx, dxi), k1)))
        k3 = rhs(*(s + 0.5 * hh * k for s, k in zip((x, xi, dx, dxi), k2)))
        k4 = rhs(*(s + hh * k for s, k in zip((x, xi, dx, dxi), k3)))
        x, xi, dx, dxi = (
            s + hh / 6.0 * (a + 2 * b + 2 * c + d) for s, a, b, c, d in zip((x, xi, dx, dxi), k1, k2, k3, k4)
        )
        t = t + h
        v = metric.velocity(x, xi)
        ts.append(t.copy())
        js.append(v[:, 0] * dx[:, 1] - v[:, 1] * dx[:, 0])
    return np.array(ts), np.array(js)


def conjugate_point_check(metric: FinslerMetric, geod: Geodesic, step: float = 1e-2):
    """Return ``(free, t_conj)``: ``free`` is True iff the transverse Jacobi
    component keeps its sign on ``(0, T]``; ``t_conj`` is the first zero
    (linearly interpolated) or None."""
    free, tc = _conjugate_lanes(metric, geod.x[:1], geod.xi[:1], np.array([geod.length]), step)
    return bool(free[0]), (None if np.isnan(tc[0]) else float(tc[0]))


def _conjugate_lanes(metric, x0, xi0, lengths, step):
    ts, js = jacobi_transverse(metric, x0, xi0, lengths, step)
    n = js.shape[1]
    free = np.ones(n, bool)
    tconj = np.full(n, np.nan)
    if len(ts) < 3:
        return free, tconj
    sign = np.sign(js[1])
    for k in range(2, len(ts)):
        flip = (np.sign(js[k]) != sign) & free & (ts[k] > ts[k - 1])
        if np.any(flip):
            i = np.flatnonzero(flip)
            j0, j1 = js[k - 1, i], js[k, i]
            frac = j0 / (j0 - j1)
            tconj[i] = ts[k - 1, i] + frac * (ts[k, i] - ts[k - 1, i])
            free[i] = False
    return free, tconj


# --- simplicity ----------------------------------------------------------------


@dataclass
class SimplicityReport:
    convexity_margin: float
    conjugate_free: bool
    minimizing: bool
    worst: dict
    first_conjugate_time: Optional[float] = None

    @property
    def simple(self) -> bool:
        return self.convexity_margin > 0 and self.conjugate_free and self.minimizing

    def to_dict(self):
        return {
            "simple": self.simple,
            "convexity_margin": self.convexity_margin,
            "conjugate_free": self.conjugate_free,
            "minimizing": self.minimizing,
            "first_conjugate_time": self.first_conjugate_time,
            "worst": self.worst,
        }


def boundary_convexity(metric: FinslerMetric, n_boundary: int, radius: float = 1.0, dt: float = 2e-3):
    """Normal-curvature proxy of the circle of ``radius``: ``r''(0) * phi(nu)``
    along the geodesics tangent to it in both orientations (``nu`` is the
    outward Euclidean normal). Returns per-sample margins, shape (2, n)."""
    th = 2 * np.pi * np.arange(n_boundary) / n_boundary
    q = radius * _unit(th)
    nu = _unit(th)
    out = []
    for sgn in (1.0, -1.0):
        v = sgn * _perp(nu)
        v = v / metric.norm(q, v)[:, None]
        xi = metric.legendre(q, v)
        xp, _ = rk4_step(metric, q, xi, dt)
        xm, _ = rk4_step(metric, q, xi, -dt)
        rdd = (np.hypot(*xp.T) + np.hypot(*xm.T) - 2 * radius) / dt**2
        out.append(rdd * metric.norm(q, nu))
    return np.array(out)


def simplicity_report(metric: FinslerMetric, n_boundary: int = 32, n_directions: int = 32,
                      radius: float = 1.0, step: float = 1e-2, jacobi: bool = True) -> SimplicityReport:
    """Sampled simplicity diagnostics on the disc of ``radius``.

    Convexity margin from :func:`boundary_convexity`; conjugate points from the
    linearized flow along the fan of chords leaving each boundary sample;
    minimizing flag from monotonicity of the exit point along each fan (a fan
    of a simple metric sweeps the boundary once without folding).
    ``jacobi=False`` skips the conjugate-point scan (reported as free).
    """
    if n_boundary < 16 or n_directions < 16:
        raise DomainError("simplicity_report needs at least 16 boundary and direction samples")
    conv = boundary_convexity(metric, n_boundary, radius)
    margin = float(conv.min())
    wi = np.unravel_index(np.argmin(conv), conv.shape)
    worst = {"convexity_sample": int(wi[1]), "orientation": "ccw" if wi[0] == 0 else "cw"}

    th = 2 * np.pi * np.arange(n_boundary) / n_boundary
    q = radius * _unit(th)
    # inward velocity angles strictly inside the half-plane
    s = (np.arange(n_directions) + 0.5) / n_directions
    ang = th[:, None] + np.pi / 2 + np.pi * s[None, :]
    x0 = np.repeat(q, n_directions, axis=0)
    v = _unit(ang.ravel())
    xi0 = metric.legendre(x0, v)
    res = integrate(metric, x0, xi0, step=step, radius=radius)
    trapped = res.status == OVERFLOW
    exit_ang = np.arctan2(res.x[:, 1], res.x[:, 0]).reshape(n_boundary, n_directions)
    rel = np.mod(exit_ang - th[:, None], 2 * np.pi)
    mono = np.all(np.diff(rel, axis=1) > 0, axis=1) & ~trapped.reshape(n_boundary, n_directions).any(axis=1)
    minimizing = bool(np.all(mono))
    if not minimizing:
        worst["fold_boundary_sample"] = int(np.flatnonzero(~mono)[0])

    if not jacobi:
        return SimplicityReport(margin, True, minimizing, worst, None)
    lengths = np.where(trapped, 0.0, res.t)
    free, tc = _conjugate_lanes(metric, x0, xi0, lengths, step)
    conj_free = bool(np.all(free))
    first = None
    if not conj_free:
        k = int(np.nanargmin(tc))
        first = float(tc[k])
        worst["conjugate_geodesic"] = {"boundary_sample": k // n_directions, "direction_sample": k % n_directions}
    return SimplicityReport(margin, conj_free, minimizing, worst, first)
