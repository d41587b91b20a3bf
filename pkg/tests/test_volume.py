import numpy as np
import pytest
from hypothesis import given, strategies as st

from finsler_lab import (Conformal, Constant, Gaussian, Randers, boundary_distance_table, circle_points,
                         enveloping_function, euclidean, ht_volume_envelope_boundary, ht_volume_fiber,
                         spherical_cap, volume_from_bd, volume_rotinv)
from finsler_lab.grids import periodic_derivative
from finsler_lab.volume import density

E = euclidean()


def cap_area(a):
    return 2 * np.pi * (1 - np.cos(a))


def test_fiber_euclidean_and_randers():
    assert ht_volume_fiber(E).value == pytest.approx(np.pi, abs=1e-12)
    # constant beta translates the dual ball, leaving its area unchanged
    assert ht_volume_fiber(Randers(Constant(0.5), Constant(0.0))).value == pytest.approx(np.pi, abs=1e-10)


def test_fiber_conformal_closed_form():
    g = Gaussian(0.3, (0.2, -0.1), 0.4)
    m = Conformal(g)
    # int e^{2u} over the disc by an independent polar rule
    r, w = np.polynomial.legendre.leggauss(200)
    r = 0.5 * (r + 1)
    w = 0.5 * w
    t = 2 * np.pi * np.arange(400) / 400
    x = r[:, None, None] * np.stack([np.cos(t), np.sin(t)], -1)[None]
    ref = np.sum(w[:, None] * r[:, None] * np.exp(2 * g.value(x))) * 2 * np.pi / 400
    assert ht_volume_fiber(m).value == pytest.approx(ref, rel=1e-4)


def test_fiber_cap():
    assert ht_volume_fiber(spherical_cap(np.pi / 3)).value == pytest.approx(cap_area(np.pi / 3), rel=1e-10)


def test_density_weight():
    # weight 1 reproduces the plain value, weight 2 doubles it
    m = Conformal(Gaussian(0.2, (0, 0), 0.5))
    a = ht_volume_fiber(m).value
    b = ht_volume_fiber(m, weight=lambda p: 2.0 * np.ones(len(p))).value
    assert b == pytest.approx(2 * a, rel=1e-14)
    assert density(E, [[0.0, 0.0]])[0] == pytest.approx(1.0)


@pytest.mark.parametrize("n", [64, 128, 256])
def test_bd_rule_on_chord_table(n):
    p = circle_points(n)
    d = np.hypot(*(p[None] - p[:, None]).transpose(2, 0, 1))
    v = volume_from_bd(d)
    assert v.value == pytest.approx(np.pi, abs=2e-3 if n == 64 else 1e-3)


def test_bd_rule_second_order():
    errs = []
    for n in (64, 128, 256):
        p = circle_points(n)
        d = np.hypot(*(p[None] - p[:, None]).transpose(2, 0, 1))
        errs.append(abs(volume_from_bd(d).value - np.pi))
    assert errs[0] / errs[1] > 3 and errs[1] / errs[2] > 3


def test_bd_rule_cap_table():
    a = np.pi / 3
    n = 256
    th = 2 * np.pi * np.arange(n) / n
    dth = th[None] - th[:, None]
    d = np.arccos(np.clip(np.cos(a) ** 2 + np.sin(a) ** 2 * np.cos(dth), -1, 1))
    assert volume_from_bd(d).value == pytest.approx(cap_area(a), rel=1e-3)


def test_bd_rule_randers_table():
    t = boundary_distance_table(Randers(Constant(0.5), Constant(0.0)), 128)
    assert volume_from_bd(t).value == pytest.approx(np.pi, abs=2e-3)


def test_rotinv_analytic():
    t = np.linspace(0, np.pi, 1001)
    assert volume_rotinv(2 * np.sin(t / 2)).value == pytest.approx(np.pi, rel=1e-5)
    a = np.pi / 3
    f0 = np.arccos(np.cos(a) ** 2 + np.sin(a) ** 2 * np.cos(t))
    assert volume_rotinv(f0).value == pytest.approx(cap_area(a), rel=1e-3)


def test_rotinv_rejects_short_input():
    with pytest.raises(ValueError):
        volume_rotinv([0.0, 1.0])


def witness(t, amp=0.05):
    g0 = 2 * np.sin(t / 2)
    f0 = g0 - amp * np.sin(np.pi * np.clip((t - 2) / 0.4, 0, 1)) ** 2
    return f0, g0


def test_non_monotone_witness():
    """A pointwise smaller profile with larger area: the rotation-invariant
    area is not monotone in the boundary distances outside the class of
    profiles coming from actual metrics."""
    t = np.linspace(0, np.pi, 4001)
    f0, g0 = witness(t)
    assert np.all(f0 <= g0) and np.any(f0 < g0)
    assert np.all(np.diff(f0) > 0)
    vf, vg = volume_rotinv(f0).value, volume_rotinv(g0).value
    assert vf - vg > 0.04


def _subadditive_on_circle(f, t):
    """f(s + u) <= f(s) + f(u) on a grid, with the circle distance folded to [0, pi]."""
    n = len(t) - 1
    idx = np.arange(n + 1)
    s = idx[:, None] + idx[None, :]
    s = np.where(s > n, 2 * n - s, s)
    return np.max(f[s] - f[:, None] - f[None, :])


def test_witness_is_a_metric_profile():
    t = np.linspace(0, np.pi, 401)
    f0, _ = witness(t)
    assert _subadditive_on_circle(f0, t) <= 1e-12


@pytest.mark.parametrize("profile", ["euclid", "cap"])
def test_rotation_invariant_profiles_concave(profile):
    m = E if profile == "euclid" else spherical_cap(np.pi / 3)
    tab = boundary_distance_table(m, 64)
    f0 = tab.values[0, :33]
    assert np.all(np.diff(f0, 2) < 0)


def test_envelope_boundary_rule_spectral():
    env = enveloping_function(E, m=32, boundary_angles=32)
    assert ht_volume_envelope_boundary(env).value == pytest.approx(np.pi, abs=5e-3)
    env = enveloping_function(E, m=96, boundary_angles=48)
    assert ht_volume_envelope_boundary(env).value == pytest.approx(np.pi, abs=1e-5)


@given(k=st.integers(1, 20), n=st.sampled_from([64, 65, 128]))
def test_periodic_derivative_exact_for_trig(k, n):
    s = 2 * np.pi * np.arange(n) / n
    f = np.sin(k * s) + np.cos(3 * s)
    d = periodic_derivative(f)
    assert np.allclose(d, k * np.cos(k * s) - 3 * np.sin(3 * s), atol=1e-9 * k)
