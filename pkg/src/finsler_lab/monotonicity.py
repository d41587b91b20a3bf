"""Comparison of two nearby simple metrics through their chords.

``Psi`` sends a ``phi'``-unit vector ``v`` at ``x`` to the ``phi``-unit
velocity of the ``phi``-geodesic with the same boundary endpoints as the
``phi'``-chord through ``v``, at the linearly rescaled time ``t' T / T'``.
Combined with the gradient of a ``phi'`` distance field it gives maps
``H_p: D -> D`` that fix the boundary, and ``F''_p = F'_p o H_p^-1`` is a
family of distance-like functions for a metric ``phi'' >= phi`` whenever the
boundary distances satisfy ``bd' >= bd``.

The module also runs randomized trials of the resulting volume comparison
and a smoothness probe of the chord functions across tangency.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .envelope import (GRID_STEP, EnvelopingFunction, boundary_distance_table, distance_field,
                       enveloping_function, metric_from_envelope)
from .errors import FinslerLabError, NumericalError, SolverError
from .fiber import convexity_report
from .fields import Constant, Gaussian
from .geodesics import TANGENCY_ELL, connect_batch, exit_chords
from .grids import PolarGrid
from .integrator import DEFAULT_STEP, integrate
from .metrics import Bump, Conformal, FinslerMetric, PerturbationSum, euclidean, spherical_cap
from .volume import ht_volume_fiber, volume_from_bd


@dataclass(frozen=True)
class PsiContext:
    """Source metric ``phi'`` (chords are taken here) and target ``phi``."""

    source: FinslerMetric
    target: FinslerMetric
    step: float = DEFAULT_STEP
    tangency: float = TANGENCY_ELL


@dataclass
class PsiResult:
    x: np.ndarray          # base points of the images
    v: np.ndarray          # phi-unit image vectors
    tangent: np.ndarray    # lanes handled by the proportionality branch
    ell_source: np.ndarray
    ell_target: np.ndarray
    p_minus: np.ndarray
    p_plus: np.ndarray


def psi_batch(ctx: PsiContext, x, v) -> PsiResult:
    x = np.atleast_2d(np.asarray(x, float))
    v = np.atleast_2d(np.asarray(v, float))
    n = max(len(x), len(v))
    x = np.broadcast_to(x, (n, 2)).copy()
    v = np.broadcast_to(v, (n, 2)).copy()
    if np.any(np.hypot(x[:, 0], x[:, 1]) > 1 + 1e-12):
        raise ValueError("base points must lie in the closed unit disc")
    v = v / ctx.source.norm(x, v)[:, None]
    ch = exit_chords(ctx.source, x, v, radius=1.0, step=ctx.step)
    ell = ch.ell
    tan = ell < ctx.tangency
    out_x = x.copy()
    out_v = v / ctx.target.norm(x, v)[:, None]
    ell_t = np.zeros(n)
    live = np.flatnonzero(~tan)
    if len(live):
        a, b = ch.p_minus[live], ch.p_plus[live]
        sol = connect_batch(ctx.target, a, b, step=ctx.step)
        T = sol.length
        ell_t[live] = T
        s = np.clip(-ch.tau_minus[live] * T / ell[live], 0.0, T)
        go = s > 0
        xs = a.copy()
        xis = sol.xi0.copy()
        if np.any(go):
            res = integrate(ctx.target, a[go], sol.xi0[go], step=ctx.step, radius=ctx.target.radius,
                            stop_time=s[go])
            xs[go], xis[go] = res.x, res.xi
        out_x[live] = xs
        out_v[live] = ctx.target.legendre_inverse(xs, xis)
    return PsiResult(out_x, out_v, tan, ell, ell_t, ch.p_minus, ch.p_plus)


def psi(ctx: PsiContext, x, v):
    """``Psi(v)`` for a single ``phi'``-unit vector ``v`` at ``x``: returns
    ``(base point, phi-unit vector)``."""
    r = psi_batch(ctx, x, v)
    return r.x[0], r.v[0]


def psi_displacement(ctx: PsiContext, x, v) -> float:
    """Largest ``|pi Psi(v) - x| + |Psi(v) - v / phi(v)|`` over the samples."""
    r = psi_batch(ctx, x, v)
    x = np.atleast_2d(x)
    v = np.atleast_2d(v)
    v0 = v / ctx.target.norm(x, v)[:, None]
    return float(np.max(np.hypot(*(r.x - x).T) + np.hypot(*(r.v - v0).T)))


# --- H_p and its inverse ---------------------------------------------------------------


def gradient_field(metric: FinslerMetric, x, dx):
    """``grad F = legendre_inverse(d_x F)``."""
    return metric.legendre_inverse(np.atleast_2d(x), np.atleast_2d(dx))


def h_map(ctx: PsiContext, env: EnvelopingFunction, i: int, nodes=None) -> np.ndarray:
    """``H_p(x)`` for ``p = p_i`` of the ``phi'`` enveloping function ``env`` at
    the given node indices (all nodes by default). Boundary nodes are fixed."""
    nodes = np.arange(len(env.points)) if nodes is None else np.atleast_1d(nodes)
    x = env.points[nodes]
    out = x.copy()
    inner = np.hypot(x[:, 0], x[:, 1]) < 1 - 1e-12
    if np.any(inner):
        g = gradient_field(ctx.source, x[inner], env.dx[i, nodes[inner]])
        out[inner] = psi_batch(ctx, x[inner], g).x
    return out


def h_at(ctx: PsiContext, p, x) -> np.ndarray:
    """``H_p(x)`` for an arbitrary source point ``p`` and points ``x``."""
    df = distance_field(ctx.source, p, x, step=GRID_STEP)
    return psi_batch(ctx, x, gradient_field(ctx.source, x, df.differential)).x


def invert_h(grid: PolarGrid, h_values, y, tol: float = 1e-8, max_iter: int = 100) -> np.ndarray:
    """Solve ``H(x) = y`` by ``x <- y - (H(x) - x)`` with ``H`` interpolated
    bilinearly from its values at the grid nodes."""
    disp = np.asarray(h_values, float) - grid.points
    y = np.atleast_2d(np.asarray(y, float))
    x = y.copy()
    for _ in range(max_iter):
        d = grid.interpolate(disp, x)
        res = np.hypot(*(x + d - y).T)
        if np.all(res < tol):
            return x
        x = y - d
    raise NumericalError("H_p inversion did not converge; the metrics are not close enough",
                         float(res.max()), x)


def _jacobian(ctx, p, x, h):
    """Central-difference Jacobian of ``H_p`` at points ``x``, shape ``(n, 2, 2)``."""
    n = len(x)
    e = np.array([[h, 0.0], [0.0, h]])
    pts = np.concatenate([x + e[0], x - e[0], x + e[1], x - e[1]])
    hv = h_at(ctx, p, pts).reshape(4, n, 2)
    jac = np.empty((n, 2, 2))
    jac[:, :, 0] = (hv[0] - hv[1]) / (2 * h)
    jac[:, :, 1] = (hv[2] - hv[3]) / (2 * h)
    return jac


@dataclass
class FDoublePrime:
    """``F''`` sampled like an enveloping function, with the maps ``H_p`` at
    the grid nodes (``h[i, k] = H_{p_i}(node k)``)."""

    envelope: EnvelopingFunction
    source: EnvelopingFunction
    h: np.ndarray
    preimages: np.ndarray

    def boundary_defect(self) -> float:
        b = self.envelope.boundary
        return float(np.max(np.abs(self.envelope.values[:, b] - self.source.values[:, b])))

    def neighborhood_status(self) -> dict:
        """Convexity of the sampled covector curves ``p -> d_y F''_p``. A
        failure means the pair is outside the neighborhood where ``phi''``
        is a metric."""
        env = self.envelope
        inner = np.flatnonzero(~env.grid.boundary) if env.grid is not None else np.arange(len(env.points))
        c = env.dx[:, inner]
        nxt = np.roll(c, -1, 0)
        ang = np.arctan2(c[..., 0] * nxt[..., 1] - c[..., 1] * nxt[..., 0], np.sum(c * nxt, -1))
        winding = np.rint(ang.sum(0) / (2 * np.pi)).astype(int)
        e = nxt - c
        en = np.roll(e, -1, 0)
        turn = float((e[..., 0] * en[..., 1] - e[..., 1] * en[..., 0]).min())
        ok = turn > 0 and bool(np.all(winding == 1))
        return {"convex": ok, "min_turn": turn, "status": "inside" if ok else "outside neighborhood U"}


def build_f_double_prime(phi: FinslerMetric, phi_prime: FinslerMetric, delta: Optional[float] = None,
                         m: int = 64, grid: Optional[PolarGrid] = None, step: float = GRID_STEP,
                         fd_step: float = 1e-4, source: Optional[EnvelopingFunction] = None,
                         psi_step: float = GRID_STEP) -> FDoublePrime:
    """Assemble ``F''_p = F'_p o H_p^-1`` on the grid.

    At an interior node ``y`` with ``x = H_p^-1(y)``: ``F''_p(y) = d'(p, x)``
    and ``d_y F''_p = d_x F'_p o (dH_p(x))^-1``, with ``dH_p`` by central
    differences of the exact map. Boundary nodes are copied from ``F'``.
    """
    grid = grid or PolarGrid(8, 32)
    env1 = source or enveloping_function(phi_prime, delta, m, grid, step=step)
    ctx = PsiContext(phi_prime, phi, step=psi_step)
    pts = env1.points
    inner = np.flatnonzero(~grid.boundary)
    vals = env1.values.copy()
    dx = env1.dx.copy()
    hs = np.empty((env1.m, len(pts), 2))
    pre = np.broadcast_to(pts, hs.shape).copy()
    for i, p in enumerate(env1.s_points):
        hs[i] = h_map(ctx, env1, i)
        x = invert_h(grid, hs[i], pts[inner])
        pre[i, inner] = x
        df = distance_field(phi_prime, p, x, step=step)
        jac = _jacobian(ctx, p, x, fd_step)
        vals[i, inner] = df.values
        dx[i, inner] = np.linalg.solve(np.transpose(jac, (0, 2, 1)), df.differential[..., None])[..., 0]
    env2 = EnvelopingFunction(env1.delta, pts, vals, dx, env1.boundary, grid, None, step,
                              {"kind": "f_double_prime"})
    return FDoublePrime(env2, env1, hs, pre)


@dataclass
class MajorizationReport:
    min_ratio: float               # min over samples of phi''(v) / phi(v)
    worst: tuple
    n_samples: int
    chord_max_error: float = float("nan")   # max |d F''_p(v) - T'/T|
    chord_tracking: float = float("nan")    # max |H_p(gamma'(t')) - gamma(t' T / T')|
    chords_checked: int = 0
    chords_skipped: int = 0
    ratios: list = field(default_factory=list)

    def passed(self, tol: float = 2e-3) -> bool:
        ok = self.min_ratio >= 1 - tol
        if self.chords_checked:
            ok = ok and self.chord_max_error <= tol
        return bool(ok)

    def to_dict(self):
        return asdict(self)


def majorization_check(fdp: FDoublePrime, phi: FinslerMetric, n_directions: int = 32,
                       nodes=None) -> MajorizationReport:
    """``phi''(v) = sup_p d F''_p(v)`` against ``phi(v) = 1`` on interior nodes."""
    env = fdp.envelope
    if nodes is None:
        nodes = np.flatnonzero(~env.grid.boundary) if env.grid is not None else np.arange(len(env.points))
    a = 2 * np.pi * np.arange(n_directions) / n_directions
    e = np.stack([np.cos(a), np.sin(a)], -1)
    worst = (np.inf, None, None)
    for k in nodes:
        x = env.points[k]
        v = e / phi.norm(x, e)[:, None]
        r = metric_from_envelope(env, int(k), v)
        j = int(np.argmin(r))
        if r[j] < worst[0]:
            worst = (float(r[j]), tuple(map(float, x)), float(a[j]))
    return MajorizationReport(worst[0], worst[1:], len(nodes) * n_directions)


def chord_ratio_check(phi: FinslerMetric, phi_prime: FinslerMetric, n_chords: int = 100, delta: Optional[float] = None,
                      fd_step: float = 1e-4, step: float = DEFAULT_STEP, min_length: float = 1e-4) -> dict:
    """Along ``n_chords`` boundary pairs: ``d_y F''_p(v) = T'/T`` at the
    midpoint ``y`` of the ``phi``-chord, for the ``p`` on the backward
    extension of the ``phi'``-chord, with ``dH_p`` by central differences.
    Also tracks ``H_p(gamma'(t')) = gamma(t' T / T')``."""
    delta = phi_prime.delta if delta is None else delta
    k = np.arange(n_chords)
    ta = 2 * np.pi * k / n_chords
    tb = ta + np.pi * (0.35 + 1.3 * ((k * 0.6180339887498949) % 1.0))
    a = np.stack([np.cos(ta), np.sin(ta)], -1)
    b = np.stack([np.cos(tb), np.sin(tb)], -1)
    s1 = connect_batch(phi_prime, a, b, step=step)
    s0 = connect_batch(phi, a, b, step=step)
    T1, T0 = s1.length, s0.length
    back = integrate(phi_prime, a, s1.xi0, step=step, radius=1.0 + delta, direction=-1)
    ps = back.x
    mid1 = integrate(phi_prime, a, s1.xi0, step=step, radius=phi_prime.radius, stop_time=0.5 * T1)
    mid0 = integrate(phi, a, s0.xi0, step=step, radius=phi.radius, stop_time=0.5 * T0)
    ctx = PsiContext(phi_prime, phi, step=step)
    errs, track, skipped = [], [], 0
    for c in range(n_chords):
        if T0[c] < min_length:
            skipped += 1
            continue
        x = mid1.x[c:c + 1]
        y = mid0.x[c]
        vel = phi.legendre_inverse(mid0.x[c:c + 1], mid0.xi[c:c + 1])[0]
        df = distance_field(phi_prime, ps[c], x, step=GRID_STEP)
        jac = _jacobian(ctx, ps[c], x, fd_step)[0]
        w = np.linalg.solve(jac, vel)
        val = float(df.differential[0] @ w)
        errs.append(abs(val - T1[c] / T0[c]))
        track.append(float(np.hypot(*(h_at(ctx, ps[c], x)[0] - y))))
    return {"max_error": float(max(errs)), "tracking": float(max(track)), "checked": len(errs),
            "skipped": skipped, "ratio_min": float(np.min(T1 / T0)), "ratio_max": float(np.max(T1 / T0))}


# --- randomized trials -----------------------------------------------------------------

BASES = {"euclidean": lambda: euclidean(), "cap": lambda: spherical_cap(np.pi / 3)}


def _random_bumps(rng, base, amplitude, targets=None, nonneg=False):
    if targets is None:
        targets = ("u", "g11", "g12", "g22") if isinstance(base, Conformal) else ("scale", "g11", "g12", "g22")
    out = []
    for _ in range(int(rng.integers(1, 5))):
        r = 0.8 * np.sqrt(rng.uniform())
        t = rng.uniform(0, 2 * np.pi)
        amp = rng.uniform(0, amplitude) if nonneg else rng.uniform(-amplitude, amplitude)
        g = Gaussian(float(amp), (float(r * np.cos(t)), float(r * np.sin(t))), float(rng.uniform(0.2, 0.5)))
        out.append(Bump(str(targets[int(rng.integers(len(targets)))]), g))
    return out


def trial_metrics(base: FinslerMetric, amplitude: float, seed: int):
    """The pair ``(phi, phi')`` of a trial. Half of the seeds produce a
    dominated pair ``phi' = e^h phi`` with ``h >= 0`` (so ``bd' >= bd``); the
    others perturb independently."""
    rng = np.random.default_rng(seed)
    b0 = _random_bumps(rng, base, amplitude)
    dominated = bool(rng.uniform() < 0.5)
    if dominated:
        c = float(rng.uniform(0.1 * amplitude, amplitude))
        extra = [Bump("scale", Constant(c))] + _random_bumps(rng, base, amplitude, targets=("scale",), nonneg=True)
    else:
        extra = _random_bumps(rng, base, amplitude)
    phi = PerturbationSum(base, tuple(b0))
    phi_p = PerturbationSum(base, tuple(b0 + extra))
    return phi, phi_p, ("dominated" if dominated else "independent")


def _quick_simple(metric, n=16):
    """Boundary convexity, fiber convexity and the monotone exit-angle fan."""
    from .geodesics import simplicity_report
    try:
        rep = simplicity_report(metric, n_boundary=n, n_directions=n, jacobi=False)
    except (FinslerLabError, ArithmeticError):
        return False
    return rep.simple and convexity_report(metric, n_fiber=32, base_rings=6, base_angles=12).strongly_convex


# Trials only need bd to well below the 1e-6 margin floor.
TRIAL_STEP = 2e-2
TRIAL_TOL = 1e-8


def monotonicity_trial(base="euclidean", amplitude: float = 1e-2, seed: int = 0, n_table: int = 32,
                       n_r: int = 24, n_theta: int = 48, n_fiber: int = 64, margin_floor: float = 1e-6,
                       step: float = TRIAL_STEP) -> dict:
    """One trial: boundary margin ``min(bd' - bd)`` and ``vol(phi') - vol(phi)``."""
    base_name = base if isinstance(base, str) else type(base).__name__
    base_m = BASES[base]() if isinstance(base, str) else base
    phi, phi_p, kind = trial_metrics(base_m, amplitude, seed)
    rec = {"seed": int(seed), "base": base_name, "amplitude": amplitude, "kind": kind,
           "phi": phi.to_config(), "phi_prime": phi_p.to_config()}
    valid = _quick_simple(phi) and _quick_simple(phi_p)
    rec["valid"] = bool(valid)
    if not valid:
        rec.update(margin=None, dvol=None, violation=False)
        return rec
    try:
        t0 = boundary_distance_table(phi, n_table, step=step, tol=TRIAL_TOL)
        t1 = boundary_distance_table(phi_p, n_table, step=step, warm_start=t0, tol=TRIAL_TOL)
    except SolverError:
        rec.update(valid=False, margin=None, dvol=None, violation=False)
        return rec
    off = ~np.eye(n_table, dtype=bool)
    margin = float(np.min((t1.values - t0.values)[off]))
    kw = dict(n_r=n_r, n_theta=n_theta, n_fiber=n_fiber)
    v0 = ht_volume_fiber(phi, **kw)
    v1 = ht_volume_fiber(phi_p, **kw)
    dvol = v1.value - v0.value
    err = v0.error + v1.error
    rec.update(margin=margin, dvol=dvol, error=err,
               vol={"fiber": [v0.value, v1.value], "bd": [volume_from_bd(t0).value, volume_from_bd(t1).value]},
               assessed=bool(margin >= margin_floor), violation=bool(margin >= margin_floor and dvol < -err))
    return rec


def monotonicity_sweep(base="euclidean", n_trials: int = 200, amplitude: float = 1e-2, seed: int = 0,
                       jsonl=None, summary_csv=None, **kw):
    """Run trials with seeds ``seed, seed + 1, ...``; optionally write the
    JSON-lines ledger and a one-row-per-trial summary CSV."""
    recs = [monotonicity_trial(base, amplitude, seed + k, **kw) for k in range(n_trials)]
    if jsonl is not None:
        with open(jsonl, "w") as fh:
            for r in recs:
                fh.write(json.dumps(r, sort_keys=True) + "\n")
    if summary_csv is not None:
        with open(summary_csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["seed", "base", "kind", "valid", "margin", "dvol", "error", "assessed", "violation"])
            for r in recs:
                w.writerow([r["seed"], r["base"], r["kind"], int(r["valid"]),
                            "" if r["margin"] is None else repr(r["margin"]),
                            "" if r["dvol"] is None else repr(r["dvol"]),
                            repr(r.get("error", "")) if r.get("error") is not None else "",
                            int(r.get("assessed", False)), int(r["violation"])])
    return recs


def sweep_summary(recs) -> dict:
    valid = [r for r in recs if r["valid"]]
    assessed = [r for r in valid if r.get("assessed")]
    return {"trials": len(recs), "valid": len(valid), "assessed": len(assessed),
            "violations": sum(r["violation"] for r in recs)}


def amplitude_scan(base="euclidean", amplitudes=(1e-2, 2e-2, 4e-2, 8e-2), n_trials: int = 8, seed: int = 0,
                   **kw) -> dict:
    """Empirical amplitude at which the checks start to fail: the smallest
    scanned amplitude with an invalid trial or a violation. This is a
    property of the generator and the checks, not a size for the
    neighborhood on which volume monotonicity is guaranteed."""
    rows = []
    threshold = None
    for a in amplitudes:
        s = sweep_summary([monotonicity_trial(base, a, seed + k, **kw) for k in range(n_trials)])
        s["amplitude"] = float(a)
        rows.append(s)
        if threshold is None and (s["valid"] < s["trials"] or s["violations"] > 0):
            threshold = float(a)
    return {"base": base if isinstance(base, str) else type(base).__name__, "rows": rows, "threshold": threshold}


# --- smoothness across tangency ---------------------------------------------------------


@dataclass
class ProbeReport:
    alpha: list
    second_differences: dict      # quantity -> max |second difference|
    first_differences: dict
    continuity: list              # (ell, |Psi - tangency branch|)
    series: dict = field(default_factory=dict)   # column -> values per alpha

    def bounded(self, bound: float = 10.0) -> bool:
        return all(v < bound for v in self.second_differences.values())

    def to_dict(self):
        return asdict(self)

    def to_csv(self, path=None) -> str:
        cols = ["alpha"] + list(self.series)
        rows = zip(self.alpha, *self.series.values())
        text = ",".join(cols) + "\n" + "".join(",".join(repr(float(c)) for c in r) + "\n" for r in rows)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _rot(v, a):
    c, s = np.cos(a), np.sin(a)
    return np.stack([c * v[..., 0] - s * v[..., 1], s * v[..., 0] + c * v[..., 1]], -1)


def psi_smoothness_probe(ctx: PsiContext, q_angle: float = 0.0, half_width: float = 0.05,
                         h: float = 1e-3) -> ProbeReport:
    """Chord functions along the family ``u(alpha)`` of ``phi'``-unit vectors at
    the boundary point ``q``, at angle ``alpha`` from the counterclockwise
    tangent (``alpha > 0`` points inward). The family crosses the tangency
    set at ``alpha = 0``.

    Reported quantities: ``lam = |p+ - p-| / ell``, the unit direction ``w``
    of ``p+ - p-``, the midpoint ``tau`` of the chord's parameter interval,
    the midpoint ``p`` of its endpoints, and the image ``Psi(u)``.
    """
    q = np.array([np.cos(q_angle), np.sin(q_angle)])
    tang = np.array([-q[1], q[0]])
    k = int(round(half_width / h))
    alpha = h * np.arange(-k, k + 1)
    u = _rot(np.broadcast_to(tang, (len(alpha), 2)), alpha)
    X = np.broadcast_to(q, u.shape)
    u = u / ctx.source.norm(X, u)[:, None]
    ch = exit_chords(ctx.source, X, u, radius=1.0, step=ctx.step)
    ell = ch.ell
    d = ch.p_plus - ch.p_minus
    nd = np.hypot(*d.T)
    small = ell < 1e-12
    lam = np.where(small, np.hypot(*u.T), nd / np.where(small, 1.0, ell))
    w = np.where(small[:, None], u / np.hypot(*u.T)[:, None], d / np.where(nd > 0, nd, 1.0)[:, None])
    tau = 0.5 * (ch.tau_plus + ch.tau_minus)
    pm = 0.5 * (ch.p_plus + ch.p_minus)
    ps = psi_batch(ctx, X, u)
    series = {"lam": lam[:, None], "w": w, "tau": tau[:, None], "p": pm, "psi_x": ps.x, "psi_v": ps.v}
    sec = {n: float(np.max(np.abs(s[2:] - 2 * s[1:-1] + s[:-2]))) / (h * h) for n, s in series.items()}
    fst = {n: float(np.max(np.abs(np.diff(s, axis=0)))) / h for n, s in series.items()}
    cont = []
    for target in (1e-2, 1e-3, 1e-4):
        a = target / 2
        for _ in range(3):  # secant-free rescaling: ell is ~ linear in alpha near 0
            uu = _rot(tang, a)[None]
            uu = uu / ctx.source.norm(q[None], uu)[:, None]
            e = exit_chords(ctx.source, q[None], uu, radius=1.0, step=ctx.step).ell[0]
            if e > 0:
                a *= target * 1.01 / e
        r = psi_batch(ctx, q[None], uu)
        vt = uu[0] / ctx.target.norm(q[None], uu)[0]
        gap = float(np.hypot(*(r.x[0] - q)) + np.hypot(*(r.v[0] - vt)))
        cont.append((float(e), gap))
    cols = {"ell": ell, "lam": lam, "w_x": w[:, 0], "w_y": w[:, 1], "tau": tau, "p_x": pm[:, 0], "p_y": pm[:, 1],
            "psi_x": ps.x[:, 0], "psi_y": ps.x[:, 1], "psi_vx": ps.v[:, 0], "psi_vy": ps.v[:, 1]}
    return ProbeReport(alpha.tolist(), sec, fst, cont, {k: v.tolist() for k, v in cols.items()})
