import numpy as np
import pytest

from finsler_lab import PolarGrid, euclidean, spherical_cap
from finsler_lab.envelope import enveloping_function, metric_from_envelope
from finsler_lab.errors import NumericalError
from finsler_lab.fields import Affine, Constant, Gaussian
from finsler_lab.metrics import Scaled
from finsler_lab.monotonicity import (PsiContext, amplitude_scan, build_f_double_prime, h_map, invert_h,
                                      majorization_check, monotonicity_sweep, monotonicity_trial, psi,
                                      psi_batch, psi_displacement, psi_smoothness_probe, sweep_summary,
                                      trial_metrics)
from finsler_lab.volume import ht_volume_fiber

E = euclidean()
STEP = 1e-2


def _interior(rng, n, rmax=0.8):
    r = rmax * np.sqrt(rng.uniform(size=n))
    t = rng.uniform(0, 2 * np.pi, n)
    return np.stack([r * np.cos(t), r * np.sin(t)], -1)


def test_psi_identity_for_equal_metrics(rng):
    ctx = PsiContext(E, E, step=STEP)
    x = _interior(rng, 12)
    a = rng.uniform(0, 2 * np.pi, 12)
    v = np.stack([np.cos(a), np.sin(a)], -1)
    r = psi_batch(ctx, x, v)
    assert np.max(np.abs(r.x - x)) < 1e-10
    assert np.max(np.abs(r.v - v)) < 1e-10
    # straight chords: endpoint distance equals chord length
    assert np.allclose(np.hypot(*(r.p_plus - r.p_minus).T), r.ell_source, atol=1e-10)


def test_psi_constant_scaling_is_normalization(rng):
    # phi' = (1 + c) phi: chords coincide and the time rescaling undoes the factor
    c = 0.2
    src = Scaled(E, Constant(1 + c))
    ctx = PsiContext(src, E, step=STEP)
    x = _interior(rng, 8)
    a = rng.uniform(0, 2 * np.pi, 8)
    v = np.stack([np.cos(a), np.sin(a)], -1) / (1 + c)
    y, w = psi(ctx, x[0], v[0])
    assert np.allclose(y, x[0], atol=1e-10)
    assert np.allclose(w, v[0] * (1 + c), atol=1e-10)
    assert psi_displacement(ctx, x, v) < 1e-9


def test_psi_displacement_linear_in_perturbation(rng):
    x = _interior(rng, 8, 0.6)
    a = rng.uniform(0, 2 * np.pi, 8)
    v = np.stack([np.cos(a), np.sin(a)], -1)
    g = Gaussian(1.0, (0.3, 0.1), 0.4)
    d = [psi_displacement(PsiContext(Scaled(E, Affine(g, e, 1.0)), E, step=STEP), x, v) for e in (0.02, 0.01)]
    assert d[0] > 1e-4
    assert d[0] / d[1] == pytest.approx(2.0, rel=0.05)


def test_psi_endpoints_are_shared():
    src = spherical_cap(np.pi / 3)
    ctx = PsiContext(src, E, step=STEP)
    x = np.array([[0.2, -0.1], [-0.4, 0.3]])
    v = np.array([[1.0, 0.5], [0.0, -1.0]])
    r = psi_batch(ctx, x, v)
    # the Euclidean image lies on the segment between the source chord's endpoints
    for k in range(2):
        a, b = r.p_minus[k], r.p_plus[k]
        d = b - a
        cross = d[0] * (r.x[k] - a)[1] - d[1] * (r.x[k] - a)[0]
        assert abs(cross) / np.hypot(*d) < 1e-8
        assert np.allclose(r.v[k], d / np.hypot(*d), atol=1e-8)
        assert r.ell_target[k] == pytest.approx(np.hypot(*d), abs=1e-10)


def test_h_map_fixes_boundary():
    grid = PolarGrid(3, 16)
    src = Scaled(E, Affine(Gaussian(1.0, (0.2, 0.0), 0.4), 0.05, 1.0))
    env = enveloping_function(src, None, 16, grid, step=STEP)
    h = h_map(PsiContext(src, E, step=STEP), env, 3)
    b = grid.boundary
    assert np.array_equal(h[b], env.points[b])
    assert np.max(np.hypot(*(h[~b] - env.points[~b]).T)) < 0.05


def test_invert_h_against_forward_map(rng):
    grid = PolarGrid(6, 32)
    p = grid.points
    r2 = np.sum(p * p, -1)
    hv = p + 0.05 * (1 - r2)[:, None] * np.stack([np.sin(2 * p[:, 1]), np.cos(3 * p[:, 0])], -1)
    y = _interior(rng, 20, 0.9)
    x = invert_h(grid, hv, y, tol=1e-12)
    fwd = x + grid.interpolate(hv - p, x)
    assert np.max(np.abs(fwd - y)) < 1e-11


def test_invert_h_reports_divergence():
    grid = PolarGrid(3, 16)
    hv = grid.points * 0.0  # collapse: no contraction
    hv[grid.boundary] = grid.points[grid.boundary]
    with pytest.raises(NumericalError):
        invert_h(grid, 3.0 * grid.points - 2.0 * hv, np.array([[0.3, 0.1]]), max_iter=20)


def test_f_double_prime_identity():
    grid = PolarGrid(3, 16)
    fdp = build_f_double_prime(E, E, m=16, grid=grid)
    assert fdp.boundary_defect() == 0.0
    assert np.max(np.abs(fdp.envelope.values - fdp.source.values)) < 1e-9
    assert np.max(np.abs(fdp.envelope.dx - fdp.source.dx)) < 1e-6
    assert fdp.neighborhood_status()["status"] == "inside"
    rep = majorization_check(fdp, E, n_directions=16)
    k = int(np.flatnonzero(~grid.boundary)[5])
    a = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    v = np.stack([np.cos(a), np.sin(a)], -1)
    assert np.allclose(metric_from_envelope(fdp.envelope, k, v), metric_from_envelope(fdp.source, k, v), atol=1e-6)
    # sixteen sampled p only resolve the sup to about 1 - cos(pi / 16)
    assert 1 - 2e-2 < rep.min_ratio < 1 + 1e-3


def test_trial_generator_kinds():
    kinds = {trial_metrics(E, 0.05, s)[2] for s in range(12)}
    assert kinds == {"dominated", "independent"}


def test_dominated_trial_volume_oracle():
    seed = next(s for s in range(40) if trial_metrics(E, 0.05, s)[2] == "dominated")
    phi, phi_p, _ = trial_metrics(E, 0.05, seed)
    # phi' = exp(c + nonnegative bumps) phi with c the constant scale bump
    c = next(b.field.value_ for b in phi_p.bumps if isinstance(b.field, Constant))
    rec = monotonicity_trial("euclidean", 0.05, seed, n_table=16)
    assert rec["valid"] and rec["assessed"] and not rec["violation"]
    assert rec["margin"] > 0
    v0 = ht_volume_fiber(phi, n_r=24, n_theta=48, n_fiber=64).value
    assert rec["dvol"] >= (np.exp(2 * c) - 1) * v0 - rec["error"]


def test_sweep_writes_ledger(tmp_path):
    recs = monotonicity_sweep("euclidean", 3, 0.01, seed=5, n_table=16, jsonl=tmp_path / "t.jsonl",
                              summary_csv=tmp_path / "t.csv")
    assert len((tmp_path / "t.jsonl").read_text().splitlines()) == 3
    assert len((tmp_path / "t.csv").read_text().splitlines()) == 4
    s = sweep_summary(recs)
    assert s["trials"] == 3 and s["violations"] == 0


def test_amplitude_scan_small_amplitudes():
    out = amplitude_scan("euclidean", (0.01,), n_trials=2, n_table=16)
    assert out["threshold"] is None
    assert out["rows"][0]["valid"] == 2


def test_probe_euclidean_chords():
    rep = psi_smoothness_probe(PsiContext(E, E, step=STEP), half_width=0.02, h=2e-3)
    lam = np.asarray(rep.series["lam"]).ravel()
    assert np.allclose(lam, 1.0, atol=1e-9)
    assert rep.bounded()
    assert rep.to_csv().splitlines()[0].startswith("alpha,")
