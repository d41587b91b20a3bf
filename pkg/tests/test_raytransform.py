import numpy as np
import pytest
from hypothesis import given, strategies as st

from finsler_lab import (Constant, Gaussian, Polynomial, Sum, ValidationError, circle_points, conformal_metric,
                         connect_batch, distance_variation_check, euclidean, ht_volume_fiber, injectivity_experiment,
                         ray_transform, sinogram, spherical_cap)
from finsler_lab.fields import Affine
from finsler_lab.raytransform import ray_transform_pairs, sinogram_csv

E = euclidean()
BUBBLE = Polynomial(((0, 0, 1.0), (2, 0, -1.0), (0, 2, -1.0)))   # 1 - |x|^2
X = Polynomial(((1, 0, 1.0),))


def test_odd_field_on_vertical_diameter():
    assert abs(ray_transform(E, X, [0, -1], [0, 1])) < 1e-14


def test_bubble_on_horizontal_diameter():
    assert ray_transform(E, BUBBLE, [-1, 0], [1, 0]) == pytest.approx(4 / 3, abs=1e-6)


def test_bubble_on_chords():
    # chord at distance h from the centre: int (1 - h^2 - s^2) ds over |s| <= c, c = sqrt(1 - h^2)
    th = np.array([0.4, 1.2, 2.5])
    a = np.stack([np.ones(3), np.zeros(3)], -1)
    b = np.stack([np.cos(th), np.sin(th)], -1)
    _, I = ray_transform_pairs(E, BUBBLE, a, b)
    c = np.sin(th / 2)
    assert np.allclose(I, 4 / 3 * c**3, atol=1e-6)


def test_unit_field_gives_length():
    m = spherical_cap(np.pi / 3)
    a = circle_points(8)
    b = np.roll(a, 3, 0)
    T, I = ray_transform_pairs(m, Constant(1.0), a, b)
    assert np.max(np.abs(I - T)) < 1e-8


@given(c1=st.floats(-3, 3), c2=st.floats(-3, 3))
def test_linearity(c1, c2):
    f = Gaussian(1.0, (0.2, 0.1), 0.3)
    a, b = np.array([1.0, 0.0]), np.array([-0.6, 0.8])
    comb = Sum((Affine(BUBBLE, c1), Affine(f, c2)))
    lhs = ray_transform(E, comb, a, b)
    rhs = c1 * ray_transform(E, BUBBLE, a, b) + c2 * ray_transform(E, f, a, b)
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_sinogram_layout():
    s = sinogram(E, BUBBLE, 6)
    assert len(s) == 30
    text = sinogram_csv(s)
    assert text.splitlines()[0] == "a_index,b_index,T,If"
    # reversible metric: symmetric transform
    d = {(r.i, r.j): r.value for r in s}
    assert all(abs(d[i, j] - d[j, i]) < 1e-9 for i, j in d)


def test_conformal_metric_checks():
    with pytest.raises(ValidationError):
        conformal_metric(E, BUBBLE, 1.5)
    m = conformal_metric(E, BUBBLE, 0.01)
    x = np.array([[0.3, 0.1]])
    v = np.array([[1.0, 2.0]])
    assert m.norm(x, v)[0] == pytest.approx((1 + 0.01 * (1 - 0.1)) * np.sqrt(5), rel=1e-14)


def test_first_variation_quadratic():
    rep = distance_variation_check(E, BUBBLE, [(0, 20), (3, 35), (10, 42)], n=64)
    assert rep.exponents[0] == pytest.approx(2.0, abs=0.05)
    r = np.abs(rep.residuals[0]) / np.asarray(rep.eps) ** 2
    assert np.ptp(r) < 0.02 * r.max()
    # diameters of a radial problem: first-order expansion is exact
    assert rep.exponents[1:] == [np.inf, np.inf]
    assert np.max(np.abs(rep.residuals[1:])) < 1e-12


def test_injectivity_polynomial_oracle():
    rep = injectivity_experiment(E, BUBBLE, eps=1e-2, n=8, n_r=24, n_theta=32, n_fiber=16)
    assert rep.b == pytest.approx(2e-4 * np.pi / 3, rel=1e-10)
    assert rep.b_direct == pytest.approx(rep.b, rel=1e-10)
    assert rep.a_plus + rep.a_minus == pytest.approx(rep.b, rel=1e-8)
    assert rep.identity_defect < 1e-15
    assert rep.b_positive
    assert rep.f_l2 == pytest.approx(np.sqrt(np.pi / 3), rel=1e-10)


def test_conformal_volume_identity():
    m = spherical_cap(np.pi / 3)
    f = Gaussian(1.0, (0.3, -0.2), 0.4)
    eps = 1e-2
    v = ht_volume_fiber(conformal_metric(m, f, eps)).value
    w = ht_volume_fiber(m, weight=lambda p: (1 + eps * f.value(p)) ** 2).value
    assert v == pytest.approx(w, rel=1e-12)


def test_variation_lengths_use_connect():
    # sanity: eps = 0 perturbation has zero residual
    a, b = circle_points(8)[0], circle_points(8)[3]
    d0 = connect_batch(E, a, b).length[0]
    assert d0 == pytest.approx(2 * np.sin(3 * np.pi / 8), abs=1e-10)
