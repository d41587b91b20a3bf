"""Holmes-Thompson area of the unit disc, computed four independent ways.

* ``ht_volume_fiber``: integrate the symplectic volume of the unit co-disc
  bundle, ``(1/pi) int_D area(B*_x) dx`` with
  ``area(B*_x) = 1/2 oint phi*_x(theta)^-2 d theta``.
* ``ht_volume_envelope_boundary``: ``-(1/2pi) int int F_theta F_sigma`` over
  ``S x dD`` for an enveloping function ``F``.
* ``volume_from_bd``: ``-(1/2pi) int int d_1 bd * d_2 bd`` over the torus,
  read off a boundary distance table.
* ``volume_rotinv``: ``2 int_0^pi f0'(t)^2 dt`` for rotation-invariant
  boundary data ``bd(theta_1, theta_2) = f0(|theta_1 - theta_2|)``.

Each returns a :class:`VolumeResult` whose ``error`` compares against the
same rule at half the resolution.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .grids import periodic_derivative
from .metrics import FinslerMetric


@dataclass
class VolumeResult:
    value: float
    method: str
    error: float
    resolution: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


# --- unit co-disc bundle -------------------------------------------------------


def density(metric: FinslerMetric, x, n_fiber: int = 128) -> np.ndarray:
    """Holmes-Thompson density ``area(B*_x) / pi`` at points ``x``."""
    x = np.atleast_2d(np.asarray(x, float))
    t = 2 * np.pi * np.arange(n_fiber) / n_fiber
    e = np.stack([np.cos(t), np.sin(t)], -1)
    dual = metric.dual_norm(x[:, None, :], e[None])
    return np.mean(dual ** -2, axis=1)


def _fiber_rule(metric, n_r, n_theta, n_fiber, f=None):
    r, wr = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * (r + 1)
    wr = 0.5 * wr
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    pts = (r[:, None, None] * np.stack([np.cos(th), np.sin(th)], -1)[None]).reshape(-1, 2)
    w = (wr * r)[:, None].repeat(n_theta, 1).ravel() * (2 * np.pi / n_theta)
    dens = density(metric, pts, n_fiber)
    if f is not None:
        dens = dens * f(pts)
    return float(np.sum(w * dens))


def ht_volume_fiber(metric: FinslerMetric, n_r: int = 48, n_theta: int = 96, n_fiber: int = 128,
                    weight=None) -> VolumeResult:
    """Gauss-Legendre in the radius, trapezoid in both angles.

    ``weight`` (a callable on points) integrates ``weight * dvol`` instead.
    """
    v = _fiber_rule(metric, n_r, n_theta, n_fiber, weight)
    v2 = _fiber_rule(metric, max(n_r // 2, 2), max(n_theta // 2, 4), max(n_fiber // 2, 4), weight)
    return VolumeResult(v, "fiber", abs(v - v2), {"n_r": n_r, "n_theta": n_theta, "n_fiber": n_fiber})


# --- enveloping function on S x dD -------------------------------------------


def _envelope_rule(f_theta, f_values):
    m, k = f_values.shape
    f_sigma = periodic_derivative(f_values, 0)
    return float(-np.sum(f_theta * f_sigma) * (2 * np.pi / m) * (2 * np.pi / k) / (2 * np.pi))


def ht_volume_envelope_boundary(env) -> VolumeResult:
    """Area from the restriction of an enveloping function to ``S x dD``.

    The tangential derivative along the unit circle comes from the sampled
    differential, the one along ``S`` from the discrete Fourier series
    (``F`` is smooth and periodic in ``p``).
    """
    fv = env.boundary_values()
    ft = env.boundary_tangential()
    m, k = fv.shape
    v = _envelope_rule(ft, fv)
    if m % 2 == 0 and k % 2 == 0:
        v2 = _envelope_rule(ft[::2, ::2], fv[::2, ::2])
        err = abs(v - v2)
    else:
        err = float("nan")
    return VolumeResult(v, "envelope", err, {"M": m, "K": k})


# --- boundary distance tables ------------------------------------------------------


def _bd_rule(d):
    """``-(h^2 / 2pi) sum d_1 bd * d_2 bd`` on the periodic N x N table.

    ``bd`` is smooth on each side of the diagonal but has a kink across it,
    so no stencil may straddle the diagonal. Centred differences are used
    away from it; next to it (``|i - j| = 1``) each derivative is taken
    one-sided, second order, pointing away from the diagonal. On the
    diagonal the product is the mean of the two one-sided products.
    """
    n = d.shape[0]
    h = 2 * np.pi / n
    off = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n

    def cen(ax):
        return (np.roll(d, -1, ax) - np.roll(d, 1, ax)) / (2 * h)

    def fwd(ax):
        return (-3 * d + 4 * np.roll(d, -1, ax) - np.roll(d, -2, ax)) / (2 * h)

    def bwd(ax):
        return (3 * d - 4 * np.roll(d, 1, ax) + np.roll(d, 2, ax)) / (2 * h)

    f1b, f1f, f2b, f2f = bwd(0), fwd(0), bwd(1), fwd(1)
    d1, d2 = cen(0), cen(1)
    up = off == 1          # j = i + 1: move i down, j up
    lo = off == n - 1      # j = i - 1: move i up, j down
    d1 = np.where(up, f1b, np.where(lo, f1f, d1))
    d2 = np.where(up, f2f, np.where(lo, f2b, d2))
    prod = d1 * d2
    k = np.arange(n)
    prod[k, k] = 0.5 * (f1b[k, k] * f2f[k, k] + f1f[k, k] * f2b[k, k])
    return float(-h * h * np.sum(prod) / (2 * np.pi))


def volume_from_bd(table) -> VolumeResult:
    """Area from a boundary distance table (``BoundaryDistanceTable`` or array)."""
    d = np.asarray(getattr(table, "values", table), float)
    n = d.shape[0]
    v = _bd_rule(d)
    err = abs(v - _bd_rule(d[::2, ::2])) if n % 2 == 0 and n >= 16 else float("nan")
    return VolumeResult(v, "bd", err, {"N": n})


# --- rotation-invariant data -------------------------------------------------------


def _rotinv_rule(f0):
    n = len(f0) - 1
    h = np.pi / n
    g = np.gradient(f0, h, edge_order=2)
    return float(2 * np.trapezoid(g * g, dx=h))


def volume_rotinv(f0) -> VolumeResult:
    """Area from ``f0`` sampled uniformly on ``[0, pi]`` (``f0[0] = 0``)."""
    f0 = np.asarray(f0, float)
    if f0.ndim != 1 or len(f0) < 5:
        raise ValueError("f0 must be a 1-d sample with at least five points")
    v = _rotinv_rule(f0)
    err = abs(v - _rotinv_rule(f0[::2])) if (len(f0) - 1) % 2 == 0 else float("nan")
    return VolumeResult(v, "rotinv", err, {"n": len(f0)})
