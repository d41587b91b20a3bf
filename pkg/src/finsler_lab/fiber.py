"""Checked pointwise operations on a metric's fibers.

These wrap the vectorised metric methods with domain checks: base points
must lie in the closed disc of radius ``1 + delta`` and vectors or covectors
passed to the Legendre maps must be non-zero.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DomainError, ValidationError
from .metrics import FinslerMetric

ZERO_TOL = 1e-300


def _prep(metric, x, w, what):
    x = np.asarray(x, float)
    w = np.asarray(w, float)
    if x.shape[-1:] != (2,) or w.shape[-1:] != (2,):
        raise DomainError("points and (co)vectors must have a trailing axis of length 2")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
        raise DomainError("non-finite input")
    r = np.hypot(x[..., 0], x[..., 1])
    if np.any(r > metric.radius * (1 + 1e-12)):
        raise DomainError(f"base point outside the disc of radius {metric.radius}")
    return x, w


def _nonzero(w, what):
    if np.any(np.hypot(w[..., 0], w[..., 1]) <= ZERO_TOL):
        raise DomainError(f"zero {what}")


def norm(metric: FinslerMetric, x, v):
    x, v = _prep(metric, x, v, "vector")
    return metric.norm(x, v)


def dual_norm(metric: FinslerMetric, x, xi):
    x, xi = _prep(metric, x, xi, "covector")
    zero = np.hypot(xi[..., 0], xi[..., 1]) <= ZERO_TOL
    if not np.any(zero):
        return metric.dual_norm(x, xi)
    x, xi = np.broadcast_arrays(x, xi)
    out = np.zeros(zero.shape)
    out[~zero] = metric.dual_norm(x[~zero], xi[~zero])
    return out if out.ndim else float(out)


def legendre(metric: FinslerMetric, x, v):
    """Covector ``d_v (phi^2 / 2)``; satisfies ``alpha(v) = phi(v)^2``."""
    x, v = _prep(metric, x, v, "vector")
    _nonzero(v, "vector")
    return metric.legendre(x, v)


def legendre_inverse(metric: FinslerMetric, x, xi):
    """Vector ``v`` with ``phi(v) = phi*(xi)`` and ``xi(v) = phi*(xi)^2``."""
    x, xi = _prep(metric, x, xi, "covector")
    _nonzero(xi, "covector")
    return metric.legendre_inverse(x, xi)


def disc_samples(radius: float, base_rings: int, base_angles: int) -> np.ndarray:
    """Centre plus ``base_rings`` circles up to ``radius``."""
    r = radius * np.arange(1, base_rings + 1) / base_rings
    t = 2 * np.pi * np.arange(base_angles) / base_angles
    pts = (r[:, None, None] * np.stack([np.cos(t), np.sin(t)], -1)[None]).reshape(-1, 2)
    return np.vstack([np.zeros((1, 2)), pts])


@dataclass
class ConvexityReport:
    min_eigenvalue: float
    worst_point: tuple
    worst_direction: float
    n_samples: int

    @property
    def strongly_convex(self) -> bool:
        return self.min_eigenvalue > 0

    def to_dict(self):
        return asdict(self)


def convexity_report(metric: FinslerMetric, n_fiber: int = 64, base_rings: int = 8,
                     base_angles: int = 16) -> ConvexityReport:
    """Smallest eigenvalue of the fiber Hessian of ``phi^2`` on unit
    directions, over a polar sample of the disc of radius ``1 + delta``."""
    xs = disc_samples(metric.radius, base_rings, base_angles)
    ang = 2 * np.pi * np.arange(n_fiber) / n_fiber
    v = np.stack([np.cos(ang), np.sin(ang)], -1)
    X = np.broadcast_to(xs[:, None, :], (len(xs), n_fiber, 2))
    V = np.broadcast_to(v[None], (len(xs), n_fiber, 2))
    hess = metric.fiber_hessian(X, V)
    ev = np.linalg.eigvalsh(hess)[..., 0]
    if not np.all(np.isfinite(ev)):
        ev = np.where(np.isfinite(ev), ev, -np.inf)
    i, j = np.unravel_index(np.argmin(ev), ev.shape)
    return ConvexityReport(float(ev[i, j]), tuple(map(float, xs[i])), float(ang[j]), int(ev.size))


def validate(metric: FinslerMetric, **kw) -> ConvexityReport:
    """Raise :class:`ValidationError` unless the metric is positive and
    strongly convex on the sample used by :func:`convexity_report`."""
    rep = convexity_report(metric, **kw)
    xs = disc_samples(metric.radius, kw.get("base_rings", 8), kw.get("base_angles", 16))
    n = kw.get("n_fiber", 64)
    ang = 2 * np.pi * np.arange(n) / n
    v = np.stack([np.cos(ang), np.sin(ang)], -1)
    with np.errstate(invalid="ignore"):
        vals = metric.norm(xs[:, None, :], v[None])
    if not np.all(vals > 0):
        raise ValidationError("metric is not positive on unit vectors")
    if not rep.strongly_convex:
        raise ValidationError(
            f"metric is not strongly convex: min fiber Hessian eigenvalue {rep.min_eigenvalue:.3g} "
            f"at x={rep.worst_point}")
    return rep
