"""Boundary distance tables and enveloping functions.

A boundary distance table samples ``d(x_i, x_j)`` on ``N`` equally spaced
points of the unit circle. An enveloping function samples
``F(p, x) = d(p, x)`` for ``p`` on the circle ``S`` of radius ``1 + delta``
and ``x`` on a polar grid of the unit disc, together with the spatial
differential ``d_x F`` (the arrival covector of the connecting geodesic).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, ValidationError
from .geodesics import SHOOT_TOL, connect_batch
from .grids import PolarGrid, circle_points, periodic_derivative
from .metrics import FinslerMetric

GRID_STEP = 1e-2  # RK4 step for table and envelope builds


def _metric_cfg(metric):
    try:
        return metric.to_config()
    except NotImplementedError:
        return None


# --- boundary distance tables -------------------------------------------------


@dataclass
class BoundaryDistanceTable:
    """``values[i, j] = d(x_i, x_j)`` with ``x_i = (cos 2 pi i/N, sin 2 pi i/N)``."""

    values: np.ndarray
    step: float = GRID_STEP
    metric: Optional[dict] = None
    residual: float = 0.0
    psi: Optional[np.ndarray] = field(default=None, repr=False, compare=False)  # initial angles, not serialized

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def points(self):
        return circle_points(self.n)

    def asymmetry(self) -> float:
        return float(np.max(np.abs(self.values - self.values.T)))

    def triangle_defect(self) -> float:
        """Largest violation of ``d(i, k) <= d(i, j) + d(j, k)``."""
        d = self.values
        worst = 0.0
        for j in range(self.n):
            worst = max(worst, float(np.max(d - (d[:, j, None] + d[None, j, :]))))
        return worst

    def subsample(self, k: int) -> "BoundaryDistanceTable":
        if self.n % k:
            raise ValueError(f"N={self.n} is not divisible by {k}")
        return BoundaryDistanceTable(self.values[::k, ::k].copy(), self.step, self.metric, self.residual)

    def meta(self):
        return {"kind": "boundary_distance_table", "N": self.n, "step": self.step,
                "residual": self.residual, "metric": self.metric}

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write("# " + json.dumps(self.meta(), sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        for row in self.values:
            w.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "BoundaryDistanceTable":
        with open(path) as fh:
            head = fh.readline()
            if not head.startswith("# "):
                raise ValueError("missing metadata header")
            meta = json.loads(head[2:])
            vals = np.array([[float(v) for v in row] for row in csv.reader(fh) if row])
        if vals.shape != (meta["N"], meta["N"]):
            raise ValueError(f"table shape {vals.shape} does not match N={meta['N']}")
        return cls(vals, meta.get("step", GRID_STEP), meta.get("metric"), meta.get("residual", 0.0))

    def to_json(self, path=None) -> str:
        d = dict(self.meta(), values=self.values.tolist())
        text = json.dumps(d, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, path) -> "BoundaryDistanceTable":
        with open(path) as fh:
            d = json.load(fh)
        return cls(np.asarray(d["values"], float), d.get("step", GRID_STEP), d.get("metric"), d.get("residual", 0.0))


def boundary_distance_table(metric: FinslerMetric, n: int, step: float = GRID_STEP,
                            check_simple: bool = False, warm_start=None,
                            tol: float = SHOOT_TOL) -> BoundaryDistanceTable:
    """Sample the boundary distance function on ``n`` boundary points.

    Pairs are solved source by source, sweeping the target counterclockwise
    so that each shot starts from the previous solution. ``warm_start`` (a
    table of a nearby metric with the same ``n``) supplies initial angles
    instead.
    """
    if n < 3:
        raise ValueError("need at least three boundary points")
    if check_simple:
        from .geodesics import simplicity_report
        rep = simplicity_report(metric)
        if not rep.simple:
            raise ValidationError(f"metric failed the simplicity check: {rep.to_dict()}")
    pts = circle_points(n)
    i = np.repeat(np.arange(n), n - 1)
    off = np.tile(np.arange(1, n), n)
    j = (i + off) % n
    if warm_start is not None and warm_start.psi is not None and warm_start.n == n:
        sol = connect_batch(metric, pts[i], pts[j], step=step, psi_init=warm_start.psi[i, j], tol=tol)
    else:
        sol = connect_batch(metric, pts[i], pts[j], step=step, chain=off > 1, tol=tol)
    vals = np.zeros((n, n))
    vals[i, j] = sol.length
    psi = np.zeros((n, n))
    psi[i, j] = sol.psi
    return BoundaryDistanceTable(vals, step, _metric_cfg(metric), float(np.max(sol.residual)), psi)


# --- distance fields and enveloping functions -------------------------------------


@dataclass
class DistanceField:
    """``F_p(x) = d(p, x)`` and its differential at the given points."""

    p: np.ndarray
    points: np.ndarray
    values: np.ndarray
    differential: np.ndarray


def _ring_chain(n_points, ring_len):
    if ring_len is None:
        return None
    return (np.arange(n_points) % ring_len) != 0


def distance_field(metric: FinslerMetric, p, points, step: float = GRID_STEP, ring_len: Optional[int] = None,
                   psi_init=None) -> DistanceField:
    """Distances from ``p`` (on or inside the metric's outer circle) to
    ``points`` and the arrival covectors ``d_x F_p``.

    ``ring_len`` declares that consecutive runs of that length are
    neighbouring points on a circle, which lets the solver chain guesses.
    """
    p = np.asarray(p, float)
    pts = np.atleast_2d(np.asarray(points, float))
    if np.hypot(*p) > metric.radius * (1 + 1e-12):
        raise DomainError("source point outside the metric domain")
    if np.any(np.hypot(pts[:, 0] - p[0], pts[:, 1] - p[1]) < 1e-12):
        raise DomainError("a target coincides with the source")
    sol = connect_batch(metric, p[None], pts, step=step, chain=_ring_chain(len(pts), ring_len), psi_init=psi_init)
    return DistanceField(p, pts, sol.length, sol.xi_end)


def parabolic_max(s, axis=0):
    """Maximum of periodic samples along ``axis`` refined by the parabola
    through the discrete maximum and its two neighbours. Returns
    ``(value, fractional index)``."""
    s = np.moveaxis(np.asarray(s, float), axis, 0)
    m = s.shape[0]
    k = np.argmax(s, axis=0)
    s0 = np.take_along_axis(s, k[None], 0)[0]
    sm = np.take_along_axis(s, ((k - 1) % m)[None], 0)[0]
    sp = np.take_along_axis(s, ((k + 1) % m)[None], 0)[0]
    den = sm - 2 * s0 + sp
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(den < 0, 0.5 * (sm - sp) / den, 0.0)
    val = s0 - 0.25 * (sm - sp) * d
    return val, k + d


@dataclass
class EnvelopeValidity:
    distance_like: float   # max |phi*(d_x F_p) - 1|
    min_turn: float        # min cross product of successive covector-curve edges
    winding: np.ndarray    # winding number of the covector curve at each point

    @property
    def ok(self) -> bool:
        return self.min_turn > 0 and bool(np.all(self.winding == 1))

    def to_dict(self):
        return {"distance_like": self.distance_like, "min_turn": self.min_turn,
                "winding_min": int(self.winding.min()), "winding_max": int(self.winding.max())}


@dataclass
class EnvelopingFunction:
    """Samples of ``F(p_i, x)`` for ``p_i`` on the circle of radius
    ``1 + delta`` (``M`` points) and ``x`` at ``points``.

    ``boundary`` lists, in angular order, the indices of the points that lie
    on the unit circle.
    """

    delta: float
    points: np.ndarray
    values: np.ndarray          # (M, n)
    dx: np.ndarray              # (M, n, 2)
    boundary: np.ndarray
    grid: Optional[PolarGrid] = None
    metric: Optional[dict] = None
    step: float = GRID_STEP
    extra: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def s_points(self):
        return circle_points(self.m, 1.0 + self.delta)

    @property
    def sigma(self):
        return 2 * np.pi * np.arange(self.m) / self.m

    def dp(self) -> np.ndarray:
        """``dF/d sigma`` along ``S`` (spectral; ``F`` is periodic in ``sigma``)."""
        return periodic_derivative(self.values, 0)

    def boundary_values(self) -> np.ndarray:
        return self.values[:, self.boundary]

    def boundary_tangential(self) -> np.ndarray:
        """``dF/d theta`` at the boundary points from the exact differential."""
        xb = self.points[self.boundary]
        t = np.stack([-xb[:, 1], xb[:, 0]], -1)
        return np.einsum("mkc,kc->mk", self.dx[:, self.boundary], t)

    def validity(self, metric: FinslerMetric) -> EnvelopeValidity:
        dual = metric.dual_norm(np.broadcast_to(self.points, self.dx.shape), self.dx)
        c = self.dx
        nxt = np.roll(c, -1, 0)
        ang = np.arctan2(c[..., 0] * nxt[..., 1] - c[..., 1] * nxt[..., 0], np.sum(c * nxt, -1))
        winding = np.rint(ang.sum(0) / (2 * np.pi)).astype(int)
        e = nxt - c
        en = np.roll(e, -1, 0)
        turn = e[..., 0] * en[..., 1] - e[..., 1] * en[..., 0]
        return EnvelopeValidity(float(np.max(np.abs(dual - 1))), float(turn.min()), winding)

    def meta(self):
        return {"kind": "enveloping_function", "M": self.m, "n_points": len(self.points), "delta": self.delta,
                "step": self.step, "metric": self.metric,
                "grid": None if self.grid is None else [self.grid.rings, self.grid.angles]}

    def to_json(self, path=None) -> str:
        d = dict(self.meta(), points=self.points.tolist(), boundary=self.boundary.tolist(),
                 values=self.values.tolist(), dx=self.dx.tolist())
        text = json.dumps(d, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, path) -> "EnvelopingFunction":
        with open(path) as fh:
            d = json.load(fh)
        grid = None if d["grid"] is None else PolarGrid(*d["grid"])
        return cls(d["delta"], np.asarray(d["points"], float), np.asarray(d["values"], float),
                   np.asarray(d["dx"], float), np.asarray(d["boundary"], int), grid, d["metric"], d["step"])

    def to_csv(self, path=None) -> str:
        meta = self.meta()
        buf = io.StringIO()
        buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "k", "px", "py", "x", "y", "F", "dFx", "dFy"])
        sp = self.s_points
        for i in range(self.m):
            for k in range(len(self.points)):
                w.writerow([i, k] + [repr(float(v)) for v in (sp[i, 0], sp[i, 1], self.points[k, 0], self.points[k, 1],
                                                               self.values[i, k], self.dx[i, k, 0], self.dx[i, k, 1])])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def enveloping_function(metric: FinslerMetric, delta: Optional[float] = None, m: int = 256,
                        grid: Optional[PolarGrid] = None, boundary_angles: Optional[int] = None,
                        step: float = GRID_STEP) -> EnvelopingFunction:
    """Sample ``F(p, x) = d(p, x)`` for ``p`` on ``m`` points of the circle of
    radius ``1 + delta`` and ``x`` on ``grid``.

    With ``boundary_angles`` instead of a grid only the unit circle is
    sampled, which is all the boundary-data constructions need.
    """
    delta = metric.delta if delta is None else float(delta)
    if not 0 < delta <= metric.delta + 1e-12:
        raise DomainError(f"delta={delta} must lie in (0, {metric.delta}]")
    if grid is None and boundary_angles is None:
        grid = PolarGrid()
    if grid is not None:
        pts = grid.points
        bidx = np.flatnonzero(grid.boundary)
        ring_len = grid.angles
    else:
        pts = circle_points(boundary_angles)
        bidx = np.arange(boundary_angles)
        ring_len = boundary_angles
    sp = circle_points(m, 1.0 + delta)
    vals = np.empty((m, len(pts)))
    dx = np.empty((m, len(pts), 2))
    chain = _ring_chain(len(pts), ring_len)
    res = 0.0
    for i in range(m):
        sol = connect_batch(metric, sp[i][None], pts, step=step, chain=chain)
        vals[i] = sol.length
        dx[i] = sol.xi_end
        res = max(res, float(np.max(sol.residual)))
    return EnvelopingFunction(delta, pts, vals, dx, bidx, grid, _metric_cfg(metric), step, {"residual": res})


def metric_from_envelope(env: EnvelopingFunction, point, v) -> np.ndarray:
    """``phi_x(v) = sup_p d_x F_p(v)`` at a sampled point.

    ``point`` is a node index or coordinates of a node; ``v`` has shape
    ``(..., 2)``. The discrete maximum over ``p`` is refined parabolically.
    """
    if np.ndim(point) == 0:
        k = int(point)
    else:
        d = np.hypot(*(env.points - np.asarray(point, float)).T)
        k = int(np.argmin(d))
        if d[k] > 1e-12:
            raise DomainError("point is not a node of the enveloping function")
    v = np.asarray(v, float)
    s = np.tensordot(env.dx[:, k], v, axes=([1], [-1]))  # (M, ...)
    return parabolic_max(s, 0)[0]


def bd_from_envelope(env: EnvelopingFunction) -> np.ndarray:
    """Boundary distances ``d(x_j, x_k) = sup_p F_p(x_k) - F_p(x_j)`` between
    the sampled boundary points."""
    b = env.boundary_values()
    out = np.empty((b.shape[1], b.shape[1]))
    for j in range(b.shape[1]):
        out[j] = parabolic_max(b - b[:, j, None], 0)[0]
    np.fill_diagonal(out, 0.0)
    return out
