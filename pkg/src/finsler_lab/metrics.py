"""Finsler metric families on the disc of radius ``1 + delta``.

All methods are vectorised: ``x`` and ``v`` (or covectors ``xi``) are arrays of
shape ``(..., 2)`` that broadcast against each other. The methods here do no
domain checking; the public wrappers in :mod:`finsler_lab.fiber` do.

Each family supplies the norm together with its first/second fiber
derivatives, its base-point gradient, and the dual norm with the maximizing
unit vector. The geodesic vector field of ``H = 1/2 (phi*)^2`` is assembled
from these pieces generically in :meth:`FinslerMetric.hamiltonian_field`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Tuple

import numpy as np

from .errors import NumericalError, ValidationError
from .fields import Affine, Constant, Exp, Product, ScalarField, Sum, field_from_config

DEFAULT_DELTA = 0.2

# Newton on the fiber angle (generic dual norm).
DUAL_TOL = 1e-10
DUAL_MAX_ITER = 50


def _perp(v):
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def _dot(a, b):
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1]


class FinslerMetric:
    """Common interface; see the module docstring."""

    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        # plain numbers are accepted wherever a field is expected
        for name, val in vars(self).items():
            if isinstance(val, (int, float, np.floating)) and name != "delta":
                object.__setattr__(self, name, Constant(float(val)))

    @property
    def radius(self) -> float:
        return 1.0 + self.delta

    @property
    def reversible(self) -> bool:
        return False

    # --- family-specific ------------------------------------------------
    def norm(self, x, v):
        raise NotImplementedError

    def norm_grad_v(self, x, v):
        raise NotImplementedError

    def norm_hess_v(self, x, v):
        raise NotImplementedError

    def norm_grad_x(self, x, v):
        raise NotImplementedError

    def dual_argmax(self, x, xi):
        """Return ``(phi*(xi), vhat)`` where ``vhat`` is the phi-unit vector
        maximizing ``xi(v)``."""
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError

    def normal_form(self):
        """Fields ``(w, g11, g12, g22, beta1, beta2)`` with
        ``phi(v) = w (sqrt(g(v, v)) + beta(v))``, or None if the family has no
        such form. Used by the compiled integrator."""
        return None

    # --- derived ----------------------------------------------------------
    def dual_norm(self, x, xi):
        return self.dual_argmax(x, xi)[0]

    def legendre(self, x, v):
        """Fiber derivative of ``1/2 phi^2`` at ``v``."""
        return self.norm(x, v)[..., None] * self.norm_grad_v(x, v)

    def legendre_inverse(self, x, xi):
        dual, vhat = self.dual_argmax(x, xi)
        return dual[..., None] * vhat

    def hamiltonian_field(self, x, xi):
        """``(dx/dt, dxi/dt)`` for ``H(x, xi) = 1/2 phi*_x(xi)^2``.

        By the envelope theorem ``d_xi phi* = vhat`` and
        ``d_x phi* = -phi* d_x phi(vhat)``.
        """
        dual, vhat = self.dual_argmax(x, xi)
        gx = self.norm_grad_x(x, vhat)
        return dual[..., None] * vhat, (dual * dual)[..., None] * gx

    def velocity(self, x, xi):
        dual, vhat = self.dual_argmax(x, xi)
        return dual[..., None] * vhat

    def fiber_hessian(self, x, v):
        """Hessian of ``phi^2`` restricted to the fiber, shape ``(..., 2, 2)``."""
        phi = self.norm(x, v)
        g = self.norm_grad_v(x, v)
        h = self.norm_hess_v(x, v)
        return 2.0 * (g[..., :, None] * g[..., None, :] + phi[..., None, None] * h)

    def scaled(self, weight: ScalarField) -> "Scaled":
        return Scaled(self, weight)


def _sym_inv(a11, a12, a22):
    det = a11 * a22 - a12 * a12
    return a22 / det, -a12 / det, a11 / det, det


@dataclass(frozen=True)
class Riemannian(FinslerMetric):
    """``phi(v) = sqrt(g(v, v))`` with coefficient fields ``g11, g12, g22``."""

    g11: ScalarField = Constant(1.0)
    g12: ScalarField = Constant(0.0)
    g22: ScalarField = Constant(1.0)
    delta: float = DEFAULT_DELTA

    @property
    def reversible(self):
        return True

    def _g(self, x):
        return self.g11.value(x), self.g12.value(x), self.g22.value(x)

    def norm(self, x, v):
        a, b, c = self._g(x)
        vx, vy = v[..., 0], v[..., 1]
        return np.sqrt(a * vx * vx + 2 * b * vx * vy + c * vy * vy)

    def norm_grad_v(self, x, v):
        a, b, c = self._g(x)
        vx, vy = v[..., 0], v[..., 1]
        gv = np.stack([a * vx + b * vy, b * vx + c * vy], axis=-1)
        phi = np.sqrt(_dot(gv, v))
        return gv / phi[..., None]

    def norm_hess_v(self, x, v):
        a, b, c = self._g(x)
        vx, vy = v[..., 0], v[..., 1]
        gv = np.stack([a * vx + b * vy, b * vx + c * vy], axis=-1)
        phi = np.sqrt(_dot(gv, v))
        a, b, c = np.broadcast_arrays(a, b, c)
        g = np.stack([np.stack([a, b], -1), np.stack([b, c], -1)], -2)
        g = np.broadcast_to(g, gv.shape + (2,))
        return (g - gv[..., :, None] * gv[..., None, :] / (phi * phi)[..., None, None]) / phi[..., None, None]

    def norm_grad_x(self, x, v):
        vx, vy = v[..., 0], v[..., 1]
        if self.g11.is_constant and self.g12.is_constant and self.g22.is_constant:
            return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(v)))
        a, da = self.g11.value_and_grad(x)
        b, db = self.g12.value_and_grad(x)
        c, dc = self.g22.value_and_grad(x)
        phi = np.sqrt(a * vx * vx + 2 * b * vx * vy + c * vy * vy)
        q = (da * (vx * vx)[..., None] + 2 * db * (vx * vy)[..., None] + dc * (vy * vy)[..., None])
        return q / (2 * phi)[..., None]

    def normal_form(self):
        return (Constant(1.0), self.g11, self.g12, self.g22, Constant(0.0), Constant(0.0))

    def dual_argmax(self, x, xi):
        a, b, c = self._g(x)
        i11, i12, i22, _ = _sym_inv(a, b, c)
        v = np.stack([i11 * xi[..., 0] + i12 * xi[..., 1], i12 * xi[..., 0] + i22 * xi[..., 1]], axis=-1)
        dual = np.sqrt(_dot(v, xi))
        return dual, v / dual[..., None]

    def to_config(self):
        return {
            "family": "riemannian",
            "delta": self.delta,
            "g11": self.g11.to_config(),
            "g12": self.g12.to_config(),
            "g22": self.g22.to_config(),
        }


def euclidean(delta: float = DEFAULT_DELTA) -> Riemannian:
    return Riemannian(delta=delta)


@dataclass(frozen=True)
class Conformal(FinslerMetric):
    """``phi(v) = exp(u(x)) |v|``."""

    u: ScalarField = Constant(0.0)
    delta: float = DEFAULT_DELTA

    @property
    def reversible(self):
        return True

    def norm(self, x, v):
        return np.exp(self.u.value(x)) * np.hypot(v[..., 0], v[..., 1])

    def norm_grad_v(self, x, v):
        e = np.exp(self.u.value(x))
        return (e / np.hypot(v[..., 0], v[..., 1]))[..., None] * v

    def norm_hess_v(self, x, v):
        e = np.exp(self.u.value(x))
        r = np.hypot(v[..., 0], v[..., 1])
        vh = v / r[..., None]
        eye = np.broadcast_to(np.eye(2), vh.shape + (2,))
        return (e / r)[..., None, None] * (eye - vh[..., :, None] * vh[..., None, :])

    def norm_grad_x(self, x, v):
        u, du = self.u.value_and_grad(x)
        return (np.exp(u) * np.hypot(v[..., 0], v[..., 1]))[..., None] * du

    def dual_argmax(self, x, xi):
        e = np.exp(self.u.value(x))
        r = np.hypot(xi[..., 0], xi[..., 1])
        return r / e, xi / (r * e)[..., None]

    def normal_form(self):
        return (Exp(self.u), Constant(1.0), Constant(0.0), Constant(1.0), Constant(0.0), Constant(0.0))

    def to_riemannian(self) -> Riemannian:
        e2u = Exp(Affine(self.u, 2.0))
        return Riemannian(e2u, Constant(0.0), e2u, delta=self.delta)

    def to_config(self):
        return {"family": "conformal", "delta": self.delta, "u": self.u.to_config()}


def spherical_cap(alpha0: float, delta: float = DEFAULT_DELTA) -> Conformal:
    """Round-sphere cap of angular radius ``alpha0`` mapped onto the unit disc
    by scaled stereographic projection. Needs ``0 < alpha0 < pi``."""
    from .fields import CapLog

    if not 0 < alpha0 < np.pi:
        raise ValidationError(f"alpha0={alpha0} must lie in (0, pi)")
    return Conformal(CapLog(float(np.tan(alpha0 / 2.0))), delta=delta)


@dataclass(frozen=True)
class Randers(FinslerMetric):
    """``phi(v) = sqrt(a(v, v)) + beta(v)`` with ``|beta|_a* < 1``."""

    beta1: ScalarField = Constant(0.0)
    beta2: ScalarField = Constant(0.0)
    g11: ScalarField = Constant(1.0)
    g12: ScalarField = Constant(0.0)
    g22: ScalarField = Constant(1.0)
    delta: float = DEFAULT_DELTA

    @property
    def reversible(self):
        return all(f.is_constant and f.value(np.zeros(2)) == 0.0 for f in (self.beta1, self.beta2))

    def _parts(self, x):
        return (self.g11.value(x), self.g12.value(x), self.g22.value(x), self.beta1.value(x), self.beta2.value(x))

    def norm(self, x, v):
        a, b, c, b1, b2 = self._parts(x)
        vx, vy = v[..., 0], v[..., 1]
        return np.sqrt(a * vx * vx + 2 * b * vx * vy + c * vy * vy) + b1 * vx + b2 * vy

    def norm_grad_v(self, x, v):
        a, b, c, b1, b2 = self._parts(x)
        vx, vy = v[..., 0], v[..., 1]
        av = np.stack([a * vx + b * vy, b * vx + c * vy], axis=-1)
        alpha = np.sqrt(_dot(av, v))
        return av / alpha[..., None] + np.stack(np.broadcast_arrays(b1, b2), axis=-1)

    def norm_hess_v(self, x, v):
        a, b, c, _, _ = self._parts(x)
        vx, vy = v[..., 0], v[..., 1]
        av = np.stack([a * vx + b * vy, b * vx + c * vy], axis=-1)
        alpha = np.sqrt(_dot(av, v))
        a, b, c = np.broadcast_arrays(a, b, c)
        g = np.stack([np.stack([a, b], -1), np.stack([b, c], -1)], -2)
        g = np.broadcast_to(g, av.shape + (2,))
        return (g - av[..., :, None] * av[..., None, :] / (alpha * alpha)[..., None, None]) / alpha[..., None, None]

    def norm_grad_x(self, x, v):
        fields_ = (self.g11, self.g12, self.g22, self.beta1, self.beta2)
        if all(f.is_constant for f in fields_):
            return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(v)))
        a, da = self.g11.value_and_grad(x)
        b, db = self.g12.value_and_grad(x)
        c, dc = self.g22.value_and_grad(x)
        _, dbeta1 = self.beta1.value_and_grad(x)
        _, dbeta2 = self.beta2.value_and_grad(x)
        vx, vy = v[..., 0], v[..., 1]
        alpha = np.sqrt(a * vx * vx + 2 * b * vx * vy + c * vy * vy)
        q = da * (vx * vx)[..., None] + 2 * db * (vx * vy)[..., None] + dc * (vy * vy)[..., None]
        return q / (2 * alpha)[..., None] + dbeta1 * vx[..., None] + dbeta2 * vy[..., None]

    def normal_form(self):
        return (Constant(1.0), self.g11, self.g12, self.g22, self.beta1, self.beta2)

    def beta_dual_norm(self, x):
        """``|beta|`` measured in the dual of the Riemannian part."""
        a, b, c, b1, b2 = self._parts(x)
        i11, i12, i22, _ = _sym_inv(a, b, c)
        return np.sqrt(i11 * b1 * b1 + 2 * i12 * b1 * b2 + i22 * b2 * b2)

    def dual_argmax(self, x, xi):
        # The dual unit ball is the a*-unit ball translated by beta.
        a, b, c, b1, b2 = self._parts(x)
        i11, i12, i22, _ = _sym_inv(a, b, c)
        x1, x2 = xi[..., 0], xi[..., 1]
        bb = i11 * b1 * b1 + 2 * i12 * b1 * b2 + i22 * b2 * b2
        xb = i11 * x1 * b1 + i12 * (x1 * b2 + x2 * b1) + i22 * x2 * b2
        xx = i11 * x1 * x1 + 2 * i12 * x1 * x2 + i22 * x2 * x2
        s = np.sqrt(xb * xb + (1.0 - bb) * xx)
        with np.errstate(divide="ignore", invalid="ignore"):
            dual = np.where(xb >= 0, xx / (xb + s), (s - xb) / (1.0 - bb))
        # vhat is parallel to a^{-1}(xi/dual - beta), scaled to phi = 1.
        e1 = x1 / dual - b1
        e2 = x2 / dual - b2
        w = np.stack([i11 * e1 + i12 * e2, i12 * e1 + i22 * e2], axis=-1)
        return dual, w / self.norm(x, w)[..., None]

    def to_config(self):
        return {
            "family": "randers",
            "delta": self.delta,
            "beta1": self.beta1.to_config(),
            "beta2": self.beta2.to_config(),
            "g11": self.g11.to_config(),
            "g12": self.g12.to_config(),
            "g22": self.g22.to_config(),
        }


@dataclass(frozen=True)
class Scaled(FinslerMetric):
    """``phi(v) = w(x) * base(v)`` for a positive weight field ``w``.

    Covers conformal perturbations ``(1 + eps f) phi`` of any base metric.
    """

    base: FinslerMetric
    weight: ScalarField

    @property
    def delta(self):  # type: ignore[override]
        return self.base.delta

    @property
    def reversible(self):
        return self.base.reversible

    def norm(self, x, v):
        return self.weight.value(x) * self.base.norm(x, v)

    def norm_grad_v(self, x, v):
        return np.asarray(self.weight.value(x))[..., None] * self.base.norm_grad_v(x, v)

    def norm_hess_v(self, x, v):
        return np.asarray(self.weight.value(x))[..., None, None] * self.base.norm_hess_v(x, v)

    def norm_grad_x(self, x, v):
        w, dw = self.weight.value_and_grad(x)
        return self.base.norm(x, v)[..., None] * dw + w[..., None] * self.base.norm_grad_x(x, v)

    def dual_argmax(self, x, xi):
        w = self.weight.value(x)
        dual, vhat = self.base.dual_argmax(x, xi)
        return dual / w, vhat / np.asarray(w)[..., None]

    def to_config(self):
        return {"family": "scaled", "base": self.base.to_config(), "weight": self.weight.to_config()}

    def normal_form(self):
        nf = self.base.normal_form()
        if nf is None:
            return None
        w = self.weight if nf[0] == Constant(1.0) else Product(nf[0], self.weight)
        return (w,) + tuple(nf[1:])


@dataclass(frozen=True)
class FiberHarmonic:
    """Fiber term ``A(x) |v| cos(k arg(v) - phase)``.

    Added to a norm it keeps strong convexity while ``|A| (k^2 - 1)`` stays
    well below the base norm's angular curvature.
    """

    amplitude: ScalarField
    order: int = 3
    phase: float = 0.0

    def _angle(self, v):
        return self.order * np.arctan2(v[..., 1], v[..., 0]) - self.phase

    def value(self, x, v):
        return self.amplitude.value(x) * np.hypot(v[..., 0], v[..., 1]) * np.cos(self._angle(v))

    def grad_v(self, x, v):
        A = self.amplitude.value(x)
        r = np.hypot(v[..., 0], v[..., 1])
        ang = self._angle(v)
        er = v / r[..., None]
        et = _perp(er)
        return (A * np.cos(ang))[..., None] * er - (self.order * A * np.sin(ang))[..., None] * et

    def hess_v(self, x, v):
        A = self.amplitude.value(x)
        r = np.hypot(v[..., 0], v[..., 1])
        ang = self._angle(v)
        et = _perp(v / r[..., None])
        coef = A * (1.0 - self.order**2) * np.cos(ang) / r
        return coef[..., None, None] * et[..., :, None] * et[..., None, :]

    def grad_x(self, x, v):
        _, dA = self.amplitude.value_and_grad(x)
        return (np.hypot(v[..., 0], v[..., 1]) * np.cos(self._angle(v)))[..., None] * dA

    def to_config(self):
        return {"amplitude": self.amplitude.to_config(), "order": int(self.order), "phase": float(self.phase)}


@dataclass(frozen=True)
class FiberPerturbed(FinslerMetric):
    """``inner(v) + sum of FiberHarmonic terms``: no closed-form dual, so the
    dual norm is computed by damped Newton on the fiber angle."""

    inner: FinslerMetric
    terms: Tuple[FiberHarmonic, ...]

    @property
    def delta(self):  # type: ignore[override]
        return self.inner.delta

    @property
    def reversible(self):
        return self.inner.reversible and all(t.order % 2 == 0 for t in self.terms)

    def norm(self, x, v):
        out = self.inner.norm(x, v)
        for t in self.terms:
            out = out + t.value(x, v)
        return out

    def norm_grad_v(self, x, v):
        out = self.inner.norm_grad_v(x, v)
        for t in self.terms:
            out = out + t.grad_v(x, v)
        return out

    def norm_hess_v(self, x, v):
        out = self.inner.norm_hess_v(x, v)
        for t in self.terms:
            out = out + t.hess_v(x, v)
        return out

    def norm_grad_x(self, x, v):
        out = self.inner.norm_grad_x(x, v)
        for t in self.terms:
            out = out + t.grad_x(x, v)
        return out

    def dual_argmax(self, x, xi):
        return newton_dual_argmax(self, x, xi, start=self.inner.dual_argmax(x, xi)[1])

    def to_config(self):
        return {"family": "fiber_perturbed", "inner": self.inner.to_config(),
                "terms": [t.to_config() for t in self.terms]}


def newton_dual_argmax(metric: FinslerMetric, x, xi, start=None, tol=DUAL_TOL, max_iter=DUAL_MAX_ITER):
    """Maximize ``xi(e)/phi(e)`` over the fiber angle by damped Newton.

    Works for any metric that provides ``norm``, ``norm_grad_v`` and
    ``norm_hess_v``; ``start`` is a vector whose angle seeds the iteration
    (the Euclidean maximizer ``xi`` by default).
    """
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    shape = np.broadcast_shapes(x.shape, xi.shape)
    x = np.broadcast_to(x, shape)
    xi = np.broadcast_to(xi, shape)
    s = xi if start is None else np.broadcast_to(start, shape)
    theta = np.arctan2(s[..., 1], s[..., 0])
    step = np.full(theta.shape, np.inf)
    resid = np.full(theta.shape, np.inf)
    for _ in range(max_iter):
        e = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        ep = _perp(e)
        phi = metric.norm(x, e)
        g = metric.norm_grad_v(x, e)
        h = metric.norm_hess_v(x, e)
        a = _dot(xi, e)
        ap = _dot(xi, ep)
        phi_t = _dot(g, ep)
        phi_tt = np.einsum("...i,...ij,...j->...", ep, h, ep) - phi
        # stationarity of log(xi(e)) - log(phi(e)) in theta
        r = ap / a - phi_t / phi
        dr = -1.0 - (ap / a) ** 2 - phi_tt / phi + (phi_t / phi) ** 2
        resid = np.abs(r)
        newton = np.where(dr < 0, -r / np.where(dr < 0, dr, -1.0), 0.1 * np.sign(r))
        step = np.clip(newton, -0.3, 0.3)
        step = np.where(a > 0, step, np.pi / 2 * np.sign(ap + (ap == 0)))
        theta = theta + step
        if np.all(np.abs(step) < tol):
            break
    else:
        if np.any(np.abs(step) >= tol * 10):
            raise NumericalError("dual norm Newton did not converge", float(np.max(resid)), theta)
    e = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    phi = metric.norm(x, e)
    return _dot(xi, e) / phi, e / phi[..., None]


@dataclass(frozen=True)
class Bump:
    """A Gaussian perturbation of one coefficient.

    ``target`` is one of ``scale`` (multiplies the whole norm by ``exp(bump)``),
    ``u`` (conformal exponent), ``g11``/``g12``/``g22`` (Riemannian entries) or
    ``beta1``/``beta2`` (Randers one-form).
    """

    target: str
    field: ScalarField

    def to_config(self):
        return {"target": self.target, "field": self.field.to_config()}


_TARGETS = {"scale", "u", "g11", "g12", "g22", "beta1", "beta2"}


@dataclass(frozen=True)
class PerturbationSum(FinslerMetric):
    """A base family plus coefficient bumps plus optional fiber harmonics.

    Coefficient bumps are folded into the base family's own closed form, so
    those metrics keep analytic dual norms; fiber harmonics switch to the
    Newton dual norm.
    """

    base: FinslerMetric
    bumps: Tuple[Bump, ...] = ()
    fiber_terms: Tuple[FiberHarmonic, ...] = ()
    realized: FinslerMetric = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "realized", _realize(self.base, self.bumps, self.fiber_terms))

    @property
    def delta(self):  # type: ignore[override]
        return self.base.delta

    @property
    def reversible(self):
        return self.realized.reversible

    def norm(self, x, v):
        return self.realized.norm(x, v)

    def norm_grad_v(self, x, v):
        return self.realized.norm_grad_v(x, v)

    def norm_hess_v(self, x, v):
        return self.realized.norm_hess_v(x, v)

    def norm_grad_x(self, x, v):
        return self.realized.norm_grad_x(x, v)

    def dual_argmax(self, x, xi):
        return self.realized.dual_argmax(x, xi)

    def hamiltonian_field(self, x, xi):
        return self.realized.hamiltonian_field(x, xi)

    def normal_form(self):
        return self.realized.normal_form()

    def to_config(self):
        return {
            "family": "perturbation_sum",
            "base": self.base.to_config(),
            "bumps": [b.to_config() for b in self.bumps],
            "fiber_terms": [t.to_config() for t in self.fiber_terms],
        }


def _add(f: ScalarField, extra) -> ScalarField:
    return Sum((f,) + tuple(extra)) if extra else f


def _realize(base, bumps, fiber_terms):
    by_target = {}
    for b in bumps:
        if b.target not in _TARGETS:
            raise ValidationError(f"unknown bump target {b.target!r}")
        by_target.setdefault(b.target, []).append(b.field)
    m = base.realized if isinstance(base, PerturbationSum) else base
    coeff = {k: v for k, v in by_target.items() if k != "scale"}
    if coeff:
        if isinstance(m, Conformal) and set(coeff) <= {"u"}:
            m = replace(m, u=_add(m.u, coeff["u"]))
        else:
            if isinstance(m, Conformal):
                m = m.to_riemannian()
            if "u" in coeff:
                by_target.setdefault("scale", []).extend(coeff.pop("u"))
            if not isinstance(m, (Riemannian, Randers)):
                raise ValidationError(f"coefficient bumps {sorted(coeff)} need a Riemannian or Randers base")
            if isinstance(m, Riemannian) and ({"beta1", "beta2"} & set(coeff)):
                m = Randers(g11=m.g11, g12=m.g12, g22=m.g22, delta=m.delta)
            m = replace(m, **{k: _add(getattr(m, k), v) for k, v in coeff.items()})
    if "scale" in by_target:
        m = Scaled(m, Exp(Sum(tuple(by_target["scale"]))))
    if fiber_terms:
        m = FiberPerturbed(m, tuple(fiber_terms))
    return m


def metric_from_config(cfg: dict) -> FinslerMetric:
    """Build a metric from a plain mapping (see README for the schema)."""
    family = cfg["family"]
    delta = float(cfg.get("delta", DEFAULT_DELTA))

    def fld(name, default):
        return field_from_config(cfg[name]) if name in cfg else Constant(default)

    if family == "euclidean":
        return euclidean(delta)
    if family == "riemannian":
        return Riemannian(fld("g11", 1.0), fld("g12", 0.0), fld("g22", 1.0), delta=delta)
    if family == "conformal":
        return Conformal(fld("u", 0.0), delta=delta)
    if family == "spherical_cap":
        return spherical_cap(float(cfg["alpha0"]), delta=delta)
    if family == "randers":
        return Randers(fld("beta1", 0.0), fld("beta2", 0.0), fld("g11", 1.0), fld("g12", 0.0), fld("g22", 1.0), delta=delta)
    if family == "scaled":
        return Scaled(metric_from_config(cfg["base"]), field_from_config(cfg["weight"]))
    if family == "perturbation_sum":
        bumps = tuple(Bump(b["target"], field_from_config(b["field"])) for b in cfg.get("bumps", ()))
        terms = tuple(
            FiberHarmonic(field_from_config(t["amplitude"]), int(t.get("order", 3)), float(t.get("phase", 0.0)))
            for t in cfg.get("fiber_terms", ())
        )
        return PerturbationSum(metric_from_config(cfg["base"]), bumps, terms)
    if family == "fiber_perturbed":
        return FiberPerturbed(metric_from_config(cfg["inner"]), tuple(
            FiberHarmonic(field_from_config(t["amplitude"]), int(t.get("order", 3)), float(t.get("phase", 0.0)))
            for t in cfg.get("terms", ())))
    raise ValidationError(f"unknown metric family {family!r}")
