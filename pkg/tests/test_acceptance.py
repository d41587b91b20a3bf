"""Acceptance runs at the stated tolerances. Each test records one line in
``conftest.ACCEPTANCE``; the terminal summary prints them as PASS/FAIL."""

import itertools
import json

import numpy as np
import pytest

from conftest import ACCEPTANCE
from finsler_lab import (Affine, Constant, Gaussian, PolarGrid, Sum, boundary_distance_table, connect_batch,
                         enveloping_function, euclidean, ht_volume_envelope_boundary, ht_volume_fiber,
                         integrate, metric_from_config, spherical_cap, volume_from_bd, volume_rotinv)
from finsler_lab.cli import _variation_pairs, main
from finsler_lab.config import Grids
from finsler_lab.envelope import bd_from_envelope
from finsler_lab.geodesics import exit_chords, flow
from finsler_lab.grids import circle_points
from finsler_lab.metrics import Scaled
from finsler_lab.monotonicity import (PsiContext, build_f_double_prime, chord_ratio_check, majorization_check,
                                      monotonicity_sweep, psi_batch, psi_displacement, psi_smoothness_probe,
                                      sweep_summary)
from finsler_lab.raytransform import (conformal_metric, distance_variation_check, injectivity_experiment,
                                      ray_transform_pairs)

pytestmark = pytest.mark.acceptance

ALPHA0 = np.pi / 3
CAP_AREA = 2 * np.pi * (1 - np.cos(ALPHA0))
METRICS = {
    "euclidean": {"family": "euclidean"},
    "randers": {"family": "randers", "beta1": 0.5},
    "conformal": {"family": "conformal",
                  "u": {"kind": "gaussian", "amplitude": 0.3, "center": [0.1, 0.2], "width": 0.4}},
    "cap": {"family": "spherical_cap", "alpha0": ALPHA0},
}
BUMP = Gaussian(1.0, (0.2, 0.1), 0.4)


def record(k, ok, detail):
    ACCEPTANCE[k] = (bool(ok), detail)
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def _three_volumes(m, g: Grids):
    fib = ht_volume_fiber(m, g.n_r, g.n_theta, g.n_fiber).value
    env = enveloping_function(m, None, g.s_points, boundary_angles=g.boundary_angles)
    envv = ht_volume_envelope_boundary(env).value
    bd = volume_from_bd(boundary_distance_table(m, g.n_boundary)).value
    return np.array([fib, envv, bd])


def _spread(v):
    return max(abs(a - b) / min(a, b) for a, b in itertools.combinations(v, 2))


def test_criterion_1_volume_agreement():
    out, ok = [], True
    for name, cfg in METRICS.items():
        m = metric_from_config(cfg)
        for label, g, tol in (("default", Grids(), 2e-2), ("doubled", Grids().scaled(2), 5e-3)):
            v = _three_volumes(m, g)
            s = _spread(v)
            good = s <= tol
            if name in ("euclidean", "randers"):
                err = np.max(np.abs(v - np.pi))
                good &= err <= (1e-3 if name == "euclidean" else 1e-2)
            elif name == "cap":
                err = np.max(np.abs(v - CAP_AREA)) / CAP_AREA
                good &= err <= 1.5e-2
            ok &= bool(good)
            out.append(f"{name}/{label} spread={s:.1e}")
    assert record(1, ok, "; ".join(out))


def test_criterion_2_rotation_invariant():
    t = np.linspace(0, np.pi, 2001)
    ve = volume_rotinv(2 * np.sin(t / 2)).value
    vc = volume_rotinv(np.arccos(np.cos(ALPHA0) ** 2 + np.sin(ALPHA0) ** 2 * np.cos(t))).value
    re, rc = abs(ve - np.pi) / np.pi, abs(vc - CAP_AREA) / CAP_AREA
    g0 = 2 * np.sin(t / 2)
    f0 = g0 - 0.05 * np.sin(np.pi * np.clip((t - 2) / 0.4, 0, 1)) ** 2
    dv = volume_rotinv(f0).value - volume_rotinv(g0).value
    witness = bool(np.all(f0 <= g0) and dv > 0)
    concave = True
    for m in (euclidean(), spherical_cap(ALPHA0)):
        prof = boundary_distance_table(m, 64).values[0, :33]
        concave &= bool(np.all(np.diff(prof, 2) < 0))
    ok = re < 1e-3 and rc < 1e-3 and witness and concave
    assert record(2, ok, f"rel err euclid={re:.1e} cap={rc:.1e}; witness dvol={dv:+.4f}; concave={concave}")


def test_criterion_3_envelope_validity():
    out, ok = [], True
    for name, cfg in METRICS.items():
        m = metric_from_config(dict(cfg, delta=0.3))
        env = enveloping_function(m, 0.2, 128, PolarGrid(6, 24))
        val = env.validity(m)
        envs = {d: enveloping_function(m, d, 256, boundary_angles=192) for d in (0.1, 0.2, 0.3)}
        vols = [ht_volume_envelope_boundary(e).value for e in envs.values()]
        tab = boundary_distance_table(m, 192)
        rec = float(np.max(np.abs(bd_from_envelope(envs[0.2]) - tab.values)))
        dv = max(vols) - min(vols)
        good = val.distance_like < 1e-6 and val.ok and rec <= 2e-3 and dv <= 5e-3
        ok &= bool(good)
        out.append(f"{name}: dl={val.distance_like:.0e} winding={val.ok} bd={rec:.0e} dvol(delta)={dv:.0e}")
    assert record(3, ok, "; ".join(out))


def test_criterion_4_construction():
    E = euclidean()
    phi_p = Scaled(E, Affine(BUMP, 1e-2, 1.0))
    fdp = build_f_double_prime(E, phi_p, m=64, grid=PolarGrid(6, 48))
    bdef = fdp.boundary_defect()
    vol2 = ht_volume_envelope_boundary(fdp.envelope).value
    volp = ht_volume_fiber(phi_p).value
    maj = majorization_check(fdp, E, n_directions=32)
    ch = chord_ratio_check(E, phi_p, n_chords=100)
    ok = bdef == 0.0 and abs(vol2 - volp) <= 1e-2 and maj.min_ratio >= 1 - 2e-3 and ch["max_error"] <= 2e-3
    assert record(4, ok, f"boundary defect={bdef}; vol F''={vol2:.6f} vs {volp:.6f}; "
                         f"majorization min={maj.min_ratio:.5f}; T'/T err={ch['max_error']:.1e} "
                         f"over {ch['checked']} chords")


def test_criterion_5_monotonicity_sweep():
    parts, ok = [], True
    for base in ("euclidean", "cap"):
        s = sweep_summary(monotonicity_sweep(base, 200, 1e-2, seed=0))
        ok &= s["violations"] == 0
        parts.append(f"{base}: {s['valid']}/{s['trials']} valid, {s['assessed']} assessed, "
                     f"{s['violations']} violations")
    assert record(5, ok, "; ".join(parts))


def test_criterion_6_ray_transform():
    cap = spherical_cap(ALPHA0)
    f = Gaussian(1.0, (0.3, -0.2), 0.4)
    g = Gaussian(-0.5, (-0.4, 0.1), 0.3)
    pts = circle_points(16)
    i, j = np.nonzero(~np.eye(16, dtype=bool))
    _, If = ray_transform_pairs(cap, f, pts[i], pts[j])
    _, Ig = ray_transform_pairs(cap, g, pts[i], pts[j])
    T, Ih = ray_transform_pairs(cap, Sum((Affine(f, 2.0, 0.0), Affine(g, -3.0, 0.0))), pts[i], pts[j])
    lin = float(np.max(np.abs(Ih - (2 * If - 3 * Ig))))
    _, I1 = ray_transform_pairs(cap, Constant(1.0), pts[i], pts[j])
    one = float(np.max(np.abs(I1 - T)))
    pairs = _variation_pairs(0)
    q = min(distance_variation_check(m, f, pairs).min_exponent for m in (euclidean(), cap))
    inj = injectivity_experiment(cap, f, eps=1e-2, n=16)
    b_err = abs(inj.b - inj.b_direct) / inj.b_direct
    eps = 1e-2
    v = ht_volume_fiber(conformal_metric(cap, f, eps)).value
    w = ht_volume_fiber(cap, weight=lambda p: (1 + eps * f.value(p)) ** 2).value
    vid = abs(v - w) / w
    ok = lin <= 1e-9 and one <= 1e-8 and q >= 1.9 and b_err < 1e-12 and inj.identity_defect < 1e-15 \
        and inj.b_positive and vid <= 1e-4
    assert record(6, ok, f"linearity={lin:.0e}; I(1)-T={one:.0e}; min q={q:.3f} (20 pairs, 2 metrics); "
                         f"B rel={b_err:.0e}; n=2 identity={inj.identity_defect:.0e}; vol identity={vid:.0e}")


def test_criterion_7_psi():
    rng = np.random.default_rng(7)
    r = 0.9 * np.sqrt(rng.uniform(size=32))
    t = rng.uniform(0, 2 * np.pi, 32)
    x = np.stack([r * np.cos(t), r * np.sin(t)], -1)
    a = rng.uniform(0, 2 * np.pi, 32)
    v = np.stack([np.cos(a), np.sin(a)], -1)
    cap = spherical_cap(ALPHA0)
    ident = max(psi_displacement(PsiContext(m, m), x, v) for m in (euclidean(), cap))
    # endpoints: the image chord of the target metric ends where the source chord does
    src = Scaled(cap, Affine(BUMP, 5e-2, 1.0))
    ctx = PsiContext(src, cap)
    res = psi_batch(ctx, x, v)
    img = exit_chords(cap, res.x, res.v)
    live = ~res.tangent
    ends = float(np.max(np.hypot(*(img.p_minus - res.p_minus)[live].T) + np.hypot(*(img.p_plus - res.p_plus)[live].T)))
    # constant factor: Psi only normalizes; a non-constant factor moves points linearly in eps
    const = max(psi_displacement(PsiContext(Scaled(cap, Constant(1 + e)), cap), x, v) for e in (2e-2, 1e-2))
    d = [psi_displacement(PsiContext(Scaled(cap, Affine(BUMP, e, 1.0)), cap), x, v) for e in (2e-2, 1e-2)]
    ratio = d[1] / d[0]
    bounded = all(psi_smoothness_probe(PsiContext(Scaled(m, Affine(BUMP, 1e-2, 1.0)), m)).bounded()
                  for m in (euclidean(), cap))
    ok = ident <= 1e-7 and ends <= 1e-6 and const <= 1e-7 and ratio <= 0.6 and bounded
    assert record(7, ok, f"identity={ident:.0e}; endpoints={ends:.0e}; constant-factor displacement={const:.0e}; "
                         f"(1+eps h) halving ratio={ratio:.3f}; probe bounded={bounded}")


def _fd_speed(metric, geo):
    """``phi(x, xdot)`` at interior samples, ``xdot`` by five-point differences."""
    h = np.diff(geo.t)[:-1]
    x = geo.x[:-1]  # drop the partial last step
    assert np.allclose(h, h[0], rtol=1e-9)
    h = h[0]
    xd = (x[:-4] - 8 * x[1:-3] + 8 * x[3:-1] - x[4:]) / (12 * h)
    return metric.norm(x[2:-2], xd)


def test_criterion_8_solver_hygiene(tmp_path):
    ms = [metric_from_config(c) for c in METRICS.values()]
    rng = np.random.default_rng(8)
    drift = speed = halving = trip = 0.0
    for m in ms:
        for _ in range(3):
            x0 = rng.uniform(-0.4, 0.4, 2)
            a = rng.uniform(0, 2 * np.pi)
            xi0 = m.legendre(x0, np.array([np.cos(a), np.sin(a)]))
            xi0 = xi0 / m.dual_norm(x0, xi0)
            geo = flow(m, x0, xi0)
            drift = max(drift, geo.energy_drift)
            speed = max(speed, float(np.max(np.abs(_fd_speed(m, geo) - 1))))
        ta = rng.uniform(0, 2 * np.pi, 8)
        tb = ta + rng.uniform(0.5, 5.8, 8)
        pa = np.stack([np.cos(ta), np.sin(ta)], -1)
        pb = np.stack([np.cos(tb), np.sin(tb)], -1)
        s1 = connect_batch(m, pa, pb, step=1e-3)
        s2 = connect_batch(m, pa, pb, step=5e-4)
        halving = max(halving, float(np.max(np.abs(s1.length - s2.length))))
        back = integrate(m, pa, s1.xi0, stop_time=s1.length, radius=m.radius)
        trip = max(trip, float(np.max(np.hypot(*(back.x - pb).T))))
    runs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        main(["monotonicity", "--out", str(d), "--seed", "3", "--config", str(_small_cfg(tmp_path))])
        main(["bdist", "--out", str(d / "bd"), "--config", str(_small_cfg(tmp_path))])
        runs.append({p.relative_to(d).as_posix(): p.read_bytes() for p in d.rglob("*")
                     if p.is_file() and p.name != "manifest.json"})
    same = runs[0] == runs[1] and len(runs[0]) >= 5
    ok = drift <= 1e-8 and speed <= 1e-8 and halving <= 1e-8 and trip <= 1e-7 and same
    assert record(8, ok, f"H drift={drift:.0e}; |phi(xdot)-1|={speed:.0e}; step halving={halving:.0e}; "
                         f"round trip={trip:.0e}; identical reruns={same}")


def _small_cfg(tmp_path):
    p = tmp_path / "small.json"
    p.write_text(json.dumps({"monotonicity": {"trials": 3, "n_table": 16}, "grids": {"n_boundary": 32}}))
    return p
