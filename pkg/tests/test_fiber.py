import numpy as np
import pytest
from hypothesis import given, strategies as st

from finsler_lab import (Conformal, Constant, DomainError, Gaussian, Randers, ValidationError, convexity_report,
                         dual_norm, euclidean, legendre, legendre_inverse, metric_from_config, norm, spherical_cap,
                         validate)
from finsler_lab.metrics import FiberHarmonic, FiberPerturbed, PerturbationSum, Bump, newton_dual_argmax

E = euclidean()
BUMP = Conformal(Gaussian(0.3, (0.2, -0.1), 0.4))
RANDERS = Randers(Constant(0.3), Constant(-0.2), Constant(1.2), Constant(0.1), Constant(0.9))
WOBBLE = FiberPerturbed(euclidean(), (FiberHarmonic(Constant(0.02), 3),))
METRICS = [E, BUMP, RANDERS, spherical_cap(np.pi / 3), WOBBLE]

pts = st.tuples(st.floats(-0.8, 0.8), st.floats(-0.8, 0.8))
angles = st.floats(0, 2 * np.pi)


def test_euclidean_norm():
    assert norm(E, [0.1, 0.2], [3.0, 4.0]) == pytest.approx(5.0, abs=1e-15)
    assert dual_norm(E, [0.0, 0.0], [0.0, 2.0]) == pytest.approx(2.0, abs=1e-15)
    assert np.allclose(legendre(E, [0.0, 0.0], [1.0, 0.0]), [1.0, 0.0])
    assert np.allclose(legendre_inverse(E, [0.0, 0.0], [0.0, 1.0]), [0.0, 1.0])


def test_zero_has_zero_norms():
    assert norm(RANDERS, [0.1, 0.0], [0.0, 0.0]) == 0.0
    assert dual_norm(RANDERS, [0.1, 0.0], [0.0, 0.0]) == 0.0
    out = dual_norm(E, np.zeros((3, 2)), np.array([[0.0, 0.0], [3.0, 4.0], [0.0, 0.0]]))
    assert np.array_equal(out, [0.0, 5.0, 0.0])


HALF = Randers(Constant(0.5), Constant(0.0))


def test_randers_hand_values():
    x = np.zeros(2)
    assert norm(HALF, x, [1.0, 0.0]) == pytest.approx(1.5, abs=1e-15)
    assert norm(HALF, x, [-1.0, 0.0]) == pytest.approx(0.5, abs=1e-15)
    assert dual_norm(HALF, x, [1.0, 0.0]) == pytest.approx(2 / 3, abs=1e-14)
    v = np.array([2 / 3, 0.0])
    a = legendre(HALF, x, v)
    assert a @ v == pytest.approx(1.0, abs=1e-14)
    assert dual_norm(HALF, x, a) == pytest.approx(1.0, abs=1e-14)


def test_randers_legendre_inverse_against_fiber_grid():
    x = np.zeros(2)
    a = np.array([1.0, 0.0]) * 1.5   # phi*-unit
    v = legendre_inverse(HALF, x, a)
    t = np.linspace(0, 2 * np.pi, 200001)
    e = np.stack([np.cos(t), np.sin(t)], -1)
    u = e / HALF.norm(x, e)[:, None]
    best = u[np.argmax(u @ a)]
    assert np.allclose(v, best, atol=1e-4)
    assert np.allclose(v, [2 / 3, 0.0], atol=1e-12)


def test_riemannian_matrix_formulas(rng):
    from finsler_lab import Riemannian
    for _ in range(100):
        L = rng.normal(size=(2, 2))
        g = L @ L.T + 0.1 * np.eye(2)
        m = Riemannian(Constant(g[0, 0]), Constant(g[0, 1]), Constant(g[1, 1]))
        x = np.zeros(2)
        v = rng.normal(size=2)
        v = v / np.sqrt(v @ g @ v)
        a = legendre(m, x, v)
        assert np.allclose(a, g @ v, atol=1e-12)
        assert a @ v == pytest.approx(1.0, abs=1e-12)
        al = rng.normal(size=2)
        assert dual_norm(m, x, al) == pytest.approx(np.sqrt(al @ np.linalg.solve(g, al)), rel=1e-10)


def test_round_trip_thousand(rng):
    ms = [BUMP, RANDERS, spherical_cap(1.0), WOBBLE, HALF]
    worst = 0.0
    for k in range(1000):
        m = ms[k % len(ms)]
        x = rng.uniform(-0.7, 0.7, 2)
        a = rng.normal(size=2)
        v = legendre_inverse(m, x, a)
        a2 = legendre(m, x, v)
        worst = max(worst, np.linalg.norm(a2 - a) / np.linalg.norm(a))
    assert worst < 1e-8


@pytest.mark.parametrize("m", METRICS, ids=["euclid", "bump", "randers", "cap", "wobble"])
def test_homogeneity_grid(m, rng):
    x = rng.uniform(-0.7, 0.7, (50, 2))
    v = rng.normal(size=(50, 2))
    base = norm(m, x, v)
    for t in (0.5, 2.0, 10.0):
        assert np.all(np.abs(norm(m, x, t * v) - t * base) <= 1e-12 * t * base)


def test_conformal_zero_is_euclidean(rng):
    x = rng.uniform(-0.7, 0.7, (100, 2))
    v = rng.normal(size=(100, 2))
    assert np.allclose(Conformal(Constant(0.0)).norm(x, v), np.hypot(*v.T), atol=1e-15)


def test_conformal_dual_closed_form(rng):
    x = rng.uniform(-0.7, 0.7, (50, 2))
    a = rng.normal(size=(50, 2))
    u = BUMP.u.value(x)
    assert np.allclose(BUMP.dual_norm(x, a), np.exp(-u) * np.hypot(*a.T), rtol=1e-14)


def test_randers_dual_closed_form(rng):
    # phi = |v| + b.v has dual ball the unit disc translated by b
    b = np.array([0.5, 0.0])
    m = Randers(Constant(b[0]), Constant(b[1]))
    a = rng.normal(size=(200, 2))
    x = np.zeros((200, 2))
    # phi*(a) = 1 on {b + e}, so solve |a/s - b| = 1 for s > 0
    bb = b @ b
    ab = a @ b
    aa = np.sum(a * a, 1)
    s = (-ab + np.sqrt(ab**2 + (1 - bb) * aa)) / (1 - bb)
    assert np.allclose(m.dual_norm(x, a), s, rtol=1e-12)


def test_generic_newton_dual_matches_closed_form(rng):
    x = rng.uniform(-0.6, 0.6, (40, 2))
    a = rng.normal(size=(40, 2))
    dual, _ = newton_dual_argmax(RANDERS, x, a)
    assert np.allclose(dual, RANDERS.dual_norm(x, a), rtol=1e-10)


@pytest.mark.parametrize("m", METRICS, ids=["euclid", "bump", "randers", "cap", "wobble"])
@given(p=pts, t=angles)
def test_legendre_round_trip(m, p, t):
    x = np.array(p)
    v = np.array([np.cos(t), np.sin(t)])
    xi = legendre(m, x, v)
    assert np.allclose(legendre_inverse(m, x, xi), v, atol=1e-9)
    # pairing identity xi(v) = phi(v)^2 and phi*(xi) = phi(v)
    assert xi @ v == pytest.approx(norm(m, x, v) ** 2, rel=1e-10)
    assert dual_norm(m, x, xi) == pytest.approx(norm(m, x, v), rel=1e-9)


@pytest.mark.parametrize("m", METRICS, ids=["euclid", "bump", "randers", "cap", "wobble"])
@given(p=pts, t=angles, s=st.floats(0.01, 100.0))
def test_positive_homogeneity_and_fenchel(m, p, t, s):
    x = np.array(p)
    v = np.array([np.cos(t), np.sin(t)])
    assert norm(m, x, s * v) == pytest.approx(s * norm(m, x, v), rel=1e-12)
    w = np.array([np.cos(2 * t + 1), np.sin(2 * t + 1)])
    # |xi(w)| <= phi*(xi) phi(w) style inequality
    xi = legendre(m, x, v)
    assert xi @ w <= dual_norm(m, x, xi) * norm(m, x, w) * (1 + 1e-9)


def test_domain_errors():
    with pytest.raises(DomainError):
        norm(E, [2.0, 0.0], [1.0, 0.0])
    with pytest.raises(DomainError):
        legendre(E, [0.0, 0.0], [0.0, 0.0])
    with pytest.raises(DomainError):
        legendre_inverse(E, [0.0, 0.0], [np.nan, 1.0])


def test_convexity_euclidean_is_two():
    rep = convexity_report(E)
    assert rep.min_eigenvalue == pytest.approx(2.0, rel=1e-6)
    assert rep.strongly_convex


def fd_min_eigenvalue(m, x, n=64, h=1e-4):
    """Independent finite-difference Hessian of phi^2 on the unit fiber."""
    lo = np.inf
    for t in 2 * np.pi * np.arange(n) / n:
        v = np.array([np.cos(t), np.sin(t)])
        v = v / m.norm(x, v)

        def f(w):
            return m.norm(x, w) ** 2

        H = np.empty((2, 2))
        for i in range(2):
            for j in range(2):
                ei = np.eye(2)[i] * h
                ej = np.eye(2)[j] * h
                H[i, j] = (f(v + ei + ej) - f(v + ei - ej) - f(v - ei + ej) + f(v - ei - ej)) / (4 * h * h)
        lo = min(lo, np.linalg.eigvalsh(H)[0])
    return lo


def test_randers_eigenvalue_decreases_with_beta():
    vals = []
    for b in (0.3, 0.6, 0.9):
        m = Randers(Constant(b), Constant(0.0))
        rep = convexity_report(m)
        fd = fd_min_eigenvalue(m, np.zeros(2))
        assert rep.min_eigenvalue == pytest.approx(fd, rel=1e-3)
        assert rep.min_eigenvalue == pytest.approx(2 * (1 - b) ** 2, rel=1e-3)
        vals.append(rep.min_eigenvalue)
    assert vals[0] > vals[1] > vals[2] > 0


def test_nonconvex_metric_rejected():
    m = FiberPerturbed(euclidean(), (FiberHarmonic(Constant(0.3), 3),))
    rep = convexity_report(m)
    assert rep.min_eigenvalue < 0 and not rep.strongly_convex
    with pytest.raises(ValidationError):
        validate(m)


@pytest.mark.parametrize("m", [E, BUMP, RANDERS, spherical_cap(1.0), WOBBLE,
                               PerturbationSum(E, (Bump("g12", Gaussian(0.05, (0.1, 0.1), 0.3)),))])
def test_config_round_trip(m, rng):
    m2 = metric_from_config(m.to_config())
    x = rng.uniform(-1, 1, (30, 2)) * 0.7
    v = rng.normal(size=(30, 2))
    assert np.array_equal(m.norm(x, v), m2.norm(x, v))
