"""Closed-form scalar fields on the plane.

Every metric coefficient and every ray-transform integrand is drawn from this
fixed catalog, so values and gradients are analytic. Points are arrays of
shape ``(..., 2)``; values have shape ``(...)`` and gradients ``(..., 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np


class ScalarField:
    """Base class: subclasses implement :meth:`value_and_grad`."""

    is_constant = False

    def value_and_grad(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def value(self, x: np.ndarray) -> np.ndarray:
        return self.value_and_grad(x)[0]

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.value_and_grad(x)[1]

    def __call__(self, x) -> np.ndarray:
        return self.value(np.asarray(x, dtype=float))

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return Sum((self, other))

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(ScalarField):
    value_: float = 0.0
    is_constant = True

    def value_and_grad(self, x):
        shape = np.shape(x)[:-1]
        return np.full(shape, float(self.value_)), np.zeros(shape + (2,))

    def value(self, x):
        # a bare float broadcasts everywhere and skips an allocation
        return float(self.value_)

    def to_config(self):
        return {"kind": "constant", "value": float(self.value_)}


@dataclass(frozen=True)
class Gaussian(ScalarField):
    """``amplitude * exp(-|x - center|^2 / (2 width^2))``."""

    amplitude: float
    center: Tuple[float, float] = (0.0, 0.0)
    width: float = 0.3

    def value_and_grad(self, x):
        d = x - np.asarray(self.center, dtype=float)
        s2 = self.width * self.width
        val = self.amplitude * np.exp(-0.5 * (d[..., 0] ** 2 + d[..., 1] ** 2) / s2)
        return val, (-val / s2)[..., None] * d

    def to_config(self):
        return {
            "kind": "gaussian",
            "amplitude": float(self.amplitude),
            "center": [float(c) for c in self.center],
            "width": float(self.width),
        }


@dataclass(frozen=True)
class CapLog(ScalarField):
    """Log conformal factor of the round unit sphere in stereographic
    coordinates scaled by ``rho``: ``log(2 rho) - log(1 + rho^2 |x|^2)``.

    The unit disc is then a spherical cap of angular radius ``2 atan(rho)``.
    """

    rho: float

    def value_and_grad(self, x):
        r2 = x[..., 0] ** 2 + x[..., 1] ** 2
        q = 1.0 + self.rho**2 * r2
        val = np.log(2.0 * self.rho) - np.log(q)
        return val, (-2.0 * self.rho**2 / q)[..., None] * x

    def to_config(self):
        return {"kind": "cap_log", "rho": float(self.rho)}


@dataclass(frozen=True)
class Polynomial(ScalarField):
    """``sum c * x^i * y^j``, optionally multiplied by the cutoff ``1 - |x|^2``
    which vanishes on the unit circle."""

    coeffs: Tuple[Tuple[int, int, float], ...]
    cutoff: bool = False

    def value_and_grad(self, x):
        px, py = x[..., 0], x[..., 1]
        val = np.zeros(np.shape(px))
        gx = np.zeros(np.shape(px))
        gy = np.zeros(np.shape(px))
        for i, j, c in self.coeffs:
            val = val + c * px**i * py**j
            if i:
                gx = gx + c * i * px ** (i - 1) * py**j
            if j:
                gy = gy + c * j * px**i * py ** (j - 1)
        if self.cutoff:
            w = 1.0 - px * px - py * py
            gx = gx * w - 2.0 * px * val
            gy = gy * w - 2.0 * py * val
            val = val * w
        return val, np.stack([gx, gy], axis=-1)

    def to_config(self):
        return {
            "kind": "polynomial",
            "coeffs": [[int(i), int(j), float(c)] for i, j, c in self.coeffs],
            "cutoff": bool(self.cutoff),
        }


@dataclass(frozen=True)
class Sum(ScalarField):
    terms: Tuple[ScalarField, ...]

    @property
    def is_constant(self):  # type: ignore[override]
        return all(t.is_constant for t in self.terms)

    def value_and_grad(self, x):
        val, grad = self.terms[0].value_and_grad(x)
        for t in self.terms[1:]:
            v, g = t.value_and_grad(x)
            val = val + v
            grad = grad + g
        return val, grad

    def to_config(self):
        return {"kind": "sum", "terms": [t.to_config() for t in self.terms]}


@dataclass(frozen=True)
class Affine(ScalarField):
    """``offset + scale * field``."""

    field: ScalarField
    scale: float = 1.0
    offset: float = 0.0

    @property
    def is_constant(self):  # type: ignore[override]
        return self.field.is_constant

    def value_and_grad(self, x):
        v, g = self.field.value_and_grad(x)
        return self.offset + self.scale * v, self.scale * g

    def to_config(self):
        return {
            "kind": "affine",
            "field": self.field.to_config(),
            "scale": float(self.scale),
            "offset": float(self.offset),
        }


@dataclass(frozen=True)
class Exp(ScalarField):
    """``exp(field)``; used for multiplicative conformal perturbations."""

    field: ScalarField

    @property
    def is_constant(self):  # type: ignore[override]
        return self.field.is_constant

    def value_and_grad(self, x):
        v, g = self.field.value_and_grad(x)
        e = np.exp(v)
        return e, e[..., None] * g

    def to_config(self):
        return {"kind": "exp", "field": self.field.to_config()}


@dataclass(frozen=True)
class Product(ScalarField):
    left: ScalarField
    right: ScalarField

    @property
    def is_constant(self):  # type: ignore[override]
        return self.left.is_constant and self.right.is_constant

    def value_and_grad(self, x):
        a, da = self.left.value_and_grad(x)
        b, db = self.right.value_and_grad(x)
        return a * b, np.asarray(a)[..., None] * db + np.asarray(b)[..., None] * da

    def to_config(self):
        return {"kind": "product", "left": self.left.to_config(), "right": self.right.to_config()}


def constant(c: float) -> Constant:
    return Constant(float(c))


def field_from_config(cfg) -> ScalarField:
    """Build a field from a plain mapping (or a bare number for a constant)."""
    if isinstance(cfg, (int, float)):
        return Constant(float(cfg))
    kind = cfg["kind"]
    if kind == "constant":
        return Constant(float(cfg["value"]))
    if kind == "gaussian":
        return Gaussian(float(cfg["amplitude"]), tuple(float(c) for c in cfg["center"]), float(cfg["width"]))
    if kind == "cap_log":
        return CapLog(float(cfg["rho"]))
    if kind == "polynomial":
        coeffs = tuple((int(i), int(j), float(c)) for i, j, c in cfg["coeffs"])
        return Polynomial(coeffs, bool(cfg.get("cutoff", False)))
    if kind == "sum":
        return Sum(tuple(field_from_config(t) for t in cfg["terms"]))
    if kind == "affine":
        return Affine(field_from_config(cfg["field"]), float(cfg.get("scale", 1.0)), float(cfg.get("offset", 0.0)))
    if kind == "exp":
        return Exp(field_from_config(cfg["field"]))
    if kind == "product":
        return Product(field_from_config(cfg["left"]), field_from_config(cfg["right"]))
    raise KeyError(f"unknown field kind {kind!r}")
