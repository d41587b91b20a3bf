"""Geodesic ray transform, conformal perturbations and the injectivity chain.

``I f(a, b)`` integrates ``f`` along the geodesic from ``a`` to ``b`` against
arc length. Under ``phi_eps = (1 + eps f) phi`` the boundary distances move
by ``eps I f`` to first order, and the Holmes-Thompson area by
``int ((1 + eps f)^2 - 1) dvol``; the experiment below evaluates each link.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DomainError, ValidationError
from .fiber import convexity_report, disc_samples
from .fields import Affine, ScalarField
from .geodesics import connect_batch
from .grids import circle_points
from .integrator import integrate
from .metrics import FinslerMetric, Scaled
from .volume import ht_volume_fiber

RAY_STEP = 1e-3


@dataclass
class RaySample:
    i: int
    j: int
    length: float
    value: float


def ray_transform_pairs(metric: FinslerMetric, f: ScalarField, a, b, step: float = RAY_STEP, chain=None):
    """Lengths and transforms ``(T, I f)`` for arrays of point pairs."""
    a = np.atleast_2d(np.asarray(a, float))
    b = np.atleast_2d(np.asarray(b, float))
    n = max(len(a), len(b))
    a = np.broadcast_to(a, (n, 2)).copy()
    b = np.broadcast_to(b, (n, 2)).copy()
    if np.any(np.hypot(*(a - b).T) < 1e-12):
        raise DomainError("a and b must differ")
    sol = connect_batch(metric, a, b, step=step, chain=chain)
    res = integrate(metric, a, sol.xi0, step=step, radius=metric.radius, target=b, integrand=f)
    return res.t, res.integral


def ray_transform(metric: FinslerMetric, f: ScalarField, a, b, step: float = RAY_STEP) -> float:
    """``int f(gamma(t)) dt`` along the geodesic from ``a`` to ``b`` (end-corrected
    trapezoid rule on the integrator's steps)."""
    return float(ray_transform_pairs(metric, f, a, b, step)[1][0])


def sinogram(metric: FinslerMetric, f: ScalarField, n: int, step: float = RAY_STEP):
    """Transform over all ordered pairs of ``n`` boundary points."""
    pts = circle_points(n)
    i = np.repeat(np.arange(n), n - 1)
    off = np.tile(np.arange(1, n), n)
    j = (i + off) % n
    T, I = ray_transform_pairs(metric, f, pts[i], pts[j], step, chain=off > 1)
    return [RaySample(int(a), int(b), float(t), float(v)) for a, b, t, v in zip(i, j, T, I)]


def sinogram_csv(samples, path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["a_index", "b_index", "T", "If"])
    for s in samples:
        w.writerow([s.i, s.j, repr(s.length), repr(s.value)])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def field_sup(f: ScalarField, radius: float = 1.0, rings: int = 16, angles: int = 64) -> float:
    pts = disc_samples(radius, rings, angles)
    return float(np.max(np.abs(np.broadcast_to(f.value(pts), len(pts)))))


def conformal_metric(metric: FinslerMetric, f: ScalarField, eps: float, check: bool = True) -> FinslerMetric:
    """``phi_eps(v) = (1 + eps f(x)) phi(v)``."""
    if eps == 0:
        return metric
    if check:
        if abs(eps) * field_sup(f, metric.radius) >= 1:
            raise ValidationError("1 + eps f is not positive on the disc")
    m = Scaled(metric, Affine(f, float(eps), 1.0))
    if check:
        rep = convexity_report(m, n_fiber=32, base_rings=6, base_angles=12)
        if not rep.strongly_convex:
            raise ValidationError(f"perturbed metric is not strongly convex (min eigenvalue {rep.min_eigenvalue:.3g})")
    return m


def _pairs_to_points(pairs, n):
    pairs = np.asarray(pairs)
    if pairs.ndim == 2 and pairs.shape[1] == 2 and np.issubdtype(pairs.dtype, np.integer):
        pts = circle_points(n)
        return pts[pairs[:, 0]], pts[pairs[:, 1]]
    pairs = np.asarray(pairs, float)
    return pairs[:, 0], pairs[:, 1]


@dataclass
class VariationReport:
    eps: list
    residuals: list       # [pair][eps]
    exponents: list
    transforms: list
    max_residual: float

    @property
    def min_exponent(self) -> float:
        return float(np.min(self.exponents))

    def to_dict(self):
        return asdict(self)


def distance_variation_check(metric: FinslerMetric, f: ScalarField, pairs, eps_list=(1e-2, 5e-3, 2.5e-3),
                             n: int = 64, step: float = RAY_STEP, floor: float = 1e-12) -> VariationReport:
    """``r(eps) = d_eps(a, b) - d(a, b) - eps I f`` for each pair, with the
    least-squares exponent of ``|r| ~ C eps^q``.

    Rows whose residuals all sit below ``floor`` (round-off, as on diameters of
    a rotationally symmetric problem where the first-order expansion is exact)
    get ``q = inf``.

    ``pairs`` are index pairs into ``n`` boundary points or an array of
    point pairs of shape ``(P, 2, 2)``.
    """
    a, b = _pairs_to_points(pairs, n)
    T, I = ray_transform_pairs(metric, f, a, b, step)
    eps = np.asarray(eps_list, float)
    r = np.empty((len(a), len(eps)))
    for k, e in enumerate(eps):
        d = connect_batch(conformal_metric(metric, f, e), a, b, step=step).length
        r[:, k] = d - T - e * I
    with np.errstate(divide="ignore"):
        le = np.log(eps)
        lr = np.log(np.abs(r))
    exact = np.max(np.abs(r), axis=1) < floor * np.maximum(1.0, T)
    q = np.array([np.inf if ex or not np.all(np.isfinite(row)) else np.polyfit(le, row, 1)[0]
                  for ex, row in zip(exact, lr)])
    return VariationReport(eps.tolist(), r.tolist(), q.tolist(), I.tolist(), float(np.abs(r).max()))


@dataclass
class InjectivityReport:
    eps: float
    vol: float
    a_plus: float
    a_minus: float
    b: float
    b_direct: float
    f_l2: float
    identity_defect: float
    transform_max: float
    quadrature_error: float

    @property
    def b_positive(self) -> bool:
        return self.b > 0

    @property
    def ratio(self) -> float:
        return self.transform_max / self.f_l2 if self.f_l2 > 0 else float("inf")

    def to_dict(self):
        d = asdict(self)
        d.update(b_positive=self.b_positive, ratio=self.ratio)
        return d


def injectivity_experiment(metric: FinslerMetric, f: ScalarField, eps: float = 1e-2, n: int = 32,
                           n_r: int = 48, n_theta: int = 96, n_fiber: int = 128,
                           step: float = RAY_STEP) -> InjectivityReport:
    """Evaluate the chain ``A+ + A- = B = 2 eps^2 int f^2 dvol > 0`` and the size
    of the transform over the ``n``-point boundary pair grid."""
    kw = dict(n_r=n_r, n_theta=n_theta, n_fiber=n_fiber)
    v0 = ht_volume_fiber(metric, **kw)
    vp = ht_volume_fiber(conformal_metric(metric, f, eps), **kw)
    vm = ht_volume_fiber(conformal_metric(metric, f, -eps), **kw)

    def fv(p):
        return np.broadcast_to(f.value(p), len(p))

    b_int = ht_volume_fiber(metric, weight=lambda p: (1 + eps * fv(p)) ** 2 + (1 - eps * fv(p)) ** 2 - 2, **kw)
    f2 = ht_volume_fiber(metric, weight=lambda p: fv(p) ** 2, **kw)
    pts = disc_samples(1.0, 32, 64)
    fx = fv(pts)
    defect = float(np.max(np.abs((1 + eps * fx) ** 2 + (1 - eps * fx) ** 2 - 2 - 2 * eps * eps * fx * fx)))
    sino = sinogram(metric, f, n, step)
    tmax = max(abs(s.value) for s in sino)
    return InjectivityReport(eps, v0.value, vp.value - v0.value, vm.value - v0.value, b_int.value,
                             2 * eps * eps * f2.value, float(np.sqrt(f2.value)), defect, tmax,
                             v0.error + vp.error + vm.error)


def report_json(rep) -> str:
    return json.dumps(rep.to_dict(), sort_keys=True)
