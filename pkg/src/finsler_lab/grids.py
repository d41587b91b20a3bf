"""Sampling grids on the disc and on the outer circle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def circle_points(n: int, radius: float = 1.0) -> np.ndarray:
    """``n`` equally spaced points ``radius * (cos s_i, sin s_i)``, ``s_i = 2 pi i / n``."""
    s = 2 * np.pi * np.arange(n) / n
    return radius * np.stack([np.cos(s), np.sin(s)], axis=-1)


def periodic_derivative(f, axis=0):
    """Spectral derivative of samples on a uniform periodic grid over ``2 pi``."""
    m = f.shape[axis]
    k = np.fft.rfftfreq(m, 1.0 / m)
    if m % 2 == 0:
        k[-1] = 0.0   # Nyquist mode has no odd part
    shape = [1] * f.ndim
    shape[axis] = len(k)
    return np.fft.irfft(1j * k.reshape(shape) * np.fft.rfft(f, axis=axis), n=m, axis=axis)


@dataclass(frozen=True)
class PolarGrid:
    """``rings`` interior circles of radius ``k / (rings + 1)`` plus the unit
    circle, each sampled at ``angles`` equally spaced angles.

    Node arrays are ring-major: node ``k * angles + j`` sits on ring ``k``
    (the last ring is the boundary) at angle ``2 pi j / angles``.
    """

    rings: int = 48
    angles: int = 192

    def __post_init__(self):
        if self.rings < 1 or self.angles < 4:
            raise ValueError("need at least one interior ring and four angles")

    @property
    def radii(self) -> np.ndarray:
        return np.r_[np.arange(1, self.rings + 1) / (self.rings + 1), 1.0]

    @property
    def theta(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.angles) / self.angles

    @property
    def shape(self):
        return (self.rings + 1, self.angles)

    @property
    def size(self) -> int:
        return (self.rings + 1) * self.angles

    @property
    def points(self) -> np.ndarray:
        r, t = np.meshgrid(self.radii, self.theta, indexing="ij")
        return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1).reshape(-1, 2)

    @property
    def boundary(self) -> np.ndarray:
        m = np.zeros(self.shape, bool)
        m[-1] = True
        return m.ravel()

    @property
    def boundary_points(self) -> np.ndarray:
        return self.points[self.boundary]

    def interpolate(self, values, x) -> np.ndarray:
        """Bilinear interpolation in ``(r, theta)`` of node ``values`` (shape
        ``(size, ...)``) at points ``x`` of the closed unit disc.

        Inside the first ring the value at the centre is taken to be the
        mean over the first ring.
        """
        v = np.asarray(values, float).reshape(self.shape + np.shape(values)[1:])
        v = np.concatenate([np.broadcast_to(v[:1].mean(axis=1, keepdims=True), v[:1].shape), v], axis=0)
        x = np.atleast_2d(np.asarray(x, float))
        r = np.minimum(np.hypot(x[:, 0], x[:, 1]), 1.0)
        th = np.mod(np.arctan2(x[:, 1], x[:, 0]), 2 * np.pi)
        # ring coordinate: centre is 0, interior ring k is k, boundary is rings + 1
        s = r * (self.rings + 1)
        k0 = np.minimum(np.floor(s).astype(int), self.rings)
        a = s - k0
        u = th * self.angles / (2 * np.pi)
        j0 = np.floor(u).astype(int) % self.angles
        b = u - np.floor(u)
        j1 = (j0 + 1) % self.angles
        ex = (slice(None),) + (None,) * (v.ndim - 2)
        a = a[ex]
        b = b[ex]
        return ((1 - a) * ((1 - b) * v[k0, j0] + b * v[k0, j1])
                + a * ((1 - b) * v[k0 + 1, j0] + b * v[k0 + 1, j1]))
