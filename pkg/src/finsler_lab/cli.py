"""``finsler-lab`` experiment runner.

Every subcommand reads an :class:`~finsler_lab.config.ExperimentConfig`,
writes its data files into the output directory and finishes with
``manifest.json`` (config hash, package versions, wall time and a sha256 for
every output). Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import platform
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np
import yaml
from pydantic import ValidationError as PydanticValidationError

from .config import ExperimentConfig, load_config
from .envelope import (BoundaryDistanceTable, bd_from_envelope, boundary_distance_table, enveloping_function,
                       metric_from_envelope)
from .errors import DomainError, NumericalError, ValidationError
from .fiber import legendre
from .fields import field_from_config
from .geodesics import connect, connect_batch, exit_chords, flow, simplicity_report
from .grids import PolarGrid
from .metrics import metric_from_config
from .monotonicity import PsiContext, amplitude_scan, monotonicity_sweep, psi_batch, psi_smoothness_probe, sweep_summary
from .raytransform import distance_variation_check, injectivity_experiment, sinogram, sinogram_csv
from .volume import ht_volume_envelope_boundary, ht_volume_fiber, volume_from_bd, volume_rotinv

OUT_ENV = "FINSLER_LAB_OUT"
DEFAULT_OUT = "finsler-lab-out"
MANIFEST = "manifest.json"
COMMANDS = ("geodesic", "bdist", "volume", "envelope", "raytransform", "monotonicity", "psi")


def _default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, default=_default) + "\n"


class Outputs:
    """Collects output files; nothing touches the disk before the first write."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        if name not in self.files:
            self.files.append(name)
        return self.root / name

    def text(self, name: str, text: str):
        with open(self.path(name), "w", newline="") as fh:
            fh.write(text)

    def json(self, name: str, obj):
        self.text(name, dumps(obj))

    def discard(self):
        for name in self.files:
            try:
                (self.root / name).unlink()
            except FileNotFoundError:
                pass
        self.files = []
        try:
            self.root.rmdir()   # only succeeds if we left it empty
        except OSError:
            pass

    def declared(self):
        out = []
        for name in self.files:
            data = (self.root / name).read_bytes()
            out.append({"file": name, "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()})
        return out


# --- subcommands ------------------------------------------------------------------


def _metric(cfg):
    m = metric_from_config(cfg.metric)
    return m


def run_geodesic(cfg: ExperimentConfig, out: Outputs) -> dict:
    if cfg.geodesic is None:
        raise ValidationError("the geodesic subcommand needs a 'geodesic' block")
    m = _metric(cfg)
    g = cfg.geodesic
    step = cfg.tolerances.step
    if g.x0 is not None:
        x0 = np.array(g.x0)
        v0 = np.array(g.v0)
        if np.hypot(*v0) == 0:
            raise DomainError("v0 must be nonzero")
        if np.hypot(*x0) > m.radius:
            raise DomainError("x0 lies outside the metric domain")
        xi0 = legendre(m, x0, v0 / m.norm(x0, v0))
        geo = flow(m, x0, xi0, radius=g.radius, step=step)
        mode = "flow"
    else:
        geo = connect(m, g.a, g.b, radius=g.radius, step=step)
        mode = "connect"
    geo.to_csv(out.path("geodesic.csv"))
    summary = {"mode": mode, "length": geo.length, "energy_drift": geo.energy_drift,
               "start": geo.start.tolist(), "end": geo.end.tolist(), "samples": len(geo.t)}
    out.json("geodesic.json", summary)
    return summary


def run_bdist(cfg: ExperimentConfig, out: Outputs) -> dict:
    m = _metric(cfg)
    tab = boundary_distance_table(m, cfg.grids.n_boundary, step=cfg.tolerances.grid_step, tol=cfg.tolerances.shoot_tol)
    tab.to_csv(out.path("bd_table.csv"))
    tab.to_json(out.path("bd_table.json"))
    rep = simplicity_report(m)
    summary = {"N": tab.n, "asymmetry": tab.asymmetry(), "triangle_defect": tab.triangle_defect(),
               "residual": tab.residual, "volume_bd": volume_from_bd(tab).to_dict(), "simplicity": rep.to_dict()}
    out.json("bdist_summary.json", summary)
    return summary


def rotinv_profile(metric, table: BoundaryDistanceTable, n_samples: int, step: float, tol: float = 1e-8):
    """``f0`` on ``[0, pi]`` if the table is rotation invariant and symmetric,
    else ``None``."""
    d = table.values
    n = table.n
    i, j = np.indices(d.shape)
    circ = d[0][(j - i) % n]
    if np.max(np.abs(d - circ)) > tol or np.max(np.abs(d[0, 1:] - d[0, 1:][::-1])) > tol:
        return None
    t = np.pi * np.arange(1, n_samples) / (n_samples - 1)
    b = np.stack([np.cos(t), np.sin(t)], -1)
    a = np.broadcast_to(np.array([1.0, 0.0]), b.shape)
    sol = connect_batch(metric, a, b, step=step, chain=np.arange(len(t)) > 0)
    return np.concatenate([[0.0], sol.length])


def run_volume(cfg: ExperimentConfig, out: Outputs) -> dict:
    m = _metric(cfg)
    gr, tol = cfg.grids, cfg.tolerances
    methods = cfg.volume.methods
    results, skipped = [], {}
    if "fiber" in methods:
        results.append(ht_volume_fiber(m, gr.n_r, gr.n_theta, gr.n_fiber))
    if "envelope" in methods:
        env = enveloping_function(m, cfg.delta, gr.s_points, boundary_angles=gr.boundary_angles, step=tol.grid_step)
        results.append(ht_volume_envelope_boundary(env))
    if "bd" in methods or "rotinv" in methods:
        tab = boundary_distance_table(m, gr.n_boundary, step=tol.grid_step, tol=tol.shoot_tol)
        if "bd" in methods:
            results.append(volume_from_bd(tab))
        if "rotinv" in methods:
            f0 = rotinv_profile(m, tab, cfg.volume.rotinv_samples, tol.step)
            if f0 is None:
                skipped["rotinv"] = "boundary distances are not rotation invariant and symmetric"
            else:
                results.append(volume_rotinv(f0))
    ref = results[0].value if results else float("nan")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "value", "error", "rel_diff_first", "resolution"])
    for r in results:
        w.writerow([r.method, repr(r.value), repr(r.error), repr((r.value - ref) / ref),
                    json.dumps(r.resolution, sort_keys=True)])
    out.text("volume_comparison.csv", buf.getvalue())
    vals = [r.value for r in results]
    summary = {"results": [r.to_dict() for r in results], "skipped": skipped,
               "max_rel_spread": (max(vals) - min(vals)) / min(vals) if vals else None}
    out.json("volumes.json", summary)
    return summary


def _reconstruction_error(env, metric, n_dir=32):
    a = 2 * np.pi * np.arange(n_dir) / n_dir
    e = np.stack([np.cos(a), np.sin(a)], -1)
    worst = 0.0
    for k in np.flatnonzero(~env.grid.boundary):
        x = env.points[k]
        v = e / metric.norm(x, e)[:, None]
        worst = max(worst, float(np.max(np.abs(metric_from_envelope(env, int(k), v) - 1))))
    return worst


def run_envelope(cfg: ExperimentConfig, out: Outputs) -> dict:
    m = _metric(cfg)
    gr, tol = cfg.grids, cfg.tolerances
    summary = {}
    if not cfg.envelope.boundary_only:
        env = enveloping_function(m, cfg.delta, gr.s_points, PolarGrid(gr.rings, gr.angles), step=tol.grid_step)
        env.to_csv(out.path("envelope.csv"))
        if cfg.envelope.write_json:
            env.to_json(out.path("envelope.json"))
        v = env.validity(m)
        summary["grid"] = dict(v.to_dict(), ok=v.ok, reconstruction_error=_reconstruction_error(env, m),
                               residual=env.extra.get("residual"), M=env.m, rings=gr.rings, angles=gr.angles)
    envb = enveloping_function(m, cfg.delta, gr.s_points, boundary_angles=gr.boundary_angles, step=tol.grid_step)
    envb.to_csv(out.path("envelope_boundary.csv"))
    vb = envb.validity(m)
    summary["boundary"] = dict(vb.to_dict(), M=envb.m, K=len(envb.points),
                               volume=ht_volume_envelope_boundary(envb).to_dict())
    if cfg.envelope.bd_check:
        tab = boundary_distance_table(m, gr.boundary_angles, step=tol.grid_step, tol=tol.shoot_tol)
        rec = bd_from_envelope(envb)
        summary["boundary"]["bd_recovery_error"] = float(np.max(np.abs(rec - tab.values)))
    summary["delta"] = envb.delta
    out.json("envelope_validity.json", summary)
    return summary


def _variation_pairs(seed, n=64, k=20):
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, k)
    off = rng.integers(n // 8, n - n // 8 + 1, k)
    return np.stack([i, (i + off) % n], -1)


def run_raytransform(cfg: ExperimentConfig, out: Outputs) -> dict:
    m = _metric(cfg)
    blk, gr = cfg.raytransform, cfg.grids
    f = field_from_config(blk.f)
    step = cfg.tolerances.step
    sino = sinogram(m, f, blk.sinogram_n, step)
    out.text("sinogram.csv", sinogram_csv(sino))
    pairs = np.asarray(blk.pairs, int) if blk.pairs else _variation_pairs(cfg.seed)
    var = distance_variation_check(m, f, pairs, blk.eps_list, n=64, step=step)
    out.json("ray_variation.json", dict(var.to_dict(), pairs=pairs.tolist(), n=64, min_exponent=var.min_exponent))
    inj = injectivity_experiment(m, f, blk.eps, blk.sinogram_n, gr.n_r, gr.n_theta, gr.n_fiber, step)
    out.json("injectivity.json", inj.to_dict())
    return {"min_exponent": var.min_exponent, "injectivity": inj.to_dict()}


def run_monotonicity(cfg: ExperimentConfig, out: Outputs) -> dict:
    blk = cfg.monotonicity
    recs = monotonicity_sweep(blk.base, blk.trials, blk.amplitude, cfg.seed, jsonl=out.path("trials.jsonl"),
                              summary_csv=out.path("trials_summary.csv"), n_table=blk.n_table)
    summary = sweep_summary(recs)
    summary.update(base=blk.base, amplitude=blk.amplitude, seed=cfg.seed)
    if blk.scan_amplitudes:
        summary["scan"] = amplitude_scan(blk.base, blk.scan_amplitudes, blk.scan_trials, cfg.seed, n_table=blk.n_table)
    out.json("monotonicity_summary.json", summary)
    return summary


def run_psi(cfg: ExperimentConfig, out: Outputs) -> dict:
    target = _metric(cfg)
    source = metric_from_config(cfg.metric_prime) if cfg.metric_prime else target
    ctx = PsiContext(source, target, step=cfg.tolerances.step)
    blk = cfg.psi
    rep = psi_smoothness_probe(ctx, blk.q_angle, blk.half_width, blk.h)
    rep.to_csv(out.path("psi_probe.csv"))
    # displacement and endpoint preservation on seeded interior samples
    rng = np.random.default_rng(cfg.seed)
    r = 0.9 * np.sqrt(rng.uniform(size=64))
    t = rng.uniform(0, 2 * np.pi, 64)
    x = np.stack([r * np.cos(t), r * np.sin(t)], -1)
    a = rng.uniform(0, 2 * np.pi, 64)
    v = np.stack([np.cos(a), np.sin(a)], -1)
    v = v / source.norm(x, v)[:, None]
    res = psi_batch(ctx, x, v)
    v0 = v / target.norm(x, v)[:, None]
    disp = float(np.max(np.hypot(*(res.x - x).T) + np.hypot(*(res.v - v0).T)))
    img = exit_chords(target, res.x, res.v, radius=1.0, step=ctx.step)
    live = ~res.tangent
    ends = float(np.max(np.hypot(*(img.p_minus - res.p_minus)[live].T) + np.hypot(*(img.p_plus - res.p_plus)[live].T))) \
        if np.any(live) else 0.0
    d = rep.to_dict()
    d.pop("series")
    d.pop("alpha")
    summary = dict(d, bounded=rep.bounded(), displacement=disp, endpoint_defect=ends, samples=64)
    out.json("psi_probe.json", summary)
    return summary


RUNNERS = {"geodesic": run_geodesic, "bdist": run_bdist, "volume": run_volume, "envelope": run_envelope,
           "raytransform": run_raytransform, "monotonicity": run_monotonicity, "psi": run_psi}


# --- driver -----------------------------------------------------------------------


def _versions():
    out = {"python": platform.python_version()}
    for dist in ("artifact", "numpy", "numba", "pydantic", "PyYAML"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            out[dist] = None
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="finsler-lab", description="Numerical lab for simple Finsler metrics on the disc.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="YAML or JSON experiment config (defaults if omitted)")
        s.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
        s.add_argument("--seed", type=int, help="seed override (unsigned 64-bit)")
        s.add_argument("--threads", type=int, help="worker threads for compiled kernels")
        s.add_argument("--resolution-scale", type=float, default=1.0, help="multiply every grid size")
    return p


def _fail(msg):
    print(f"finsler-lab: error: {msg}", file=sys.stderr)
    return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        upd = {}
        if args.seed is not None:
            upd["seed"] = args.seed
        if args.resolution_scale != 1.0:
            if not args.resolution_scale > 0:
                raise ValueError("--resolution-scale must be positive")
            upd["grids"] = cfg.grids.scaled(args.resolution_scale).model_dump()
        if args.threads is not None and args.threads < 1:
            raise ValueError("--threads must be at least 1")
        if upd:
            cfg = ExperimentConfig.model_validate(dict(cfg.model_dump(), **upd))
    except (OSError, yaml.YAMLError, PydanticValidationError, ValueError) as exc:
        return _fail(exc)
    if args.threads is not None:
        import numba
        numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))

    out = Outputs(Path(args.out or cfg.out or os.environ.get(OUT_ENV) or DEFAULT_OUT))
    manifest = {"command": args.command, "config_sha256": cfg.digest(), "config": cfg.model_dump(mode="json"),
                "seed": cfg.seed, "threads": args.threads, "resolution_scale": args.resolution_scale,
                "versions": _versions()}
    t0 = time.perf_counter()
    code = 0
    try:
        manifest["summary"] = RUNNERS[args.command](cfg, out)
        manifest["status"] = "ok"
    except NumericalError as exc:
        code = 2
        manifest.update(status="numerical_error", error=str(exc), residual=exc.residual)
        print(f"finsler-lab: numerical failure: {exc}", file=sys.stderr)
    except (DomainError, ValidationError, ValueError) as exc:
        out.discard()
        return _fail(exc)
    manifest["wall_time_s"] = time.perf_counter() - t0
    manifest["exit_code"] = code
    manifest["outputs"] = out.declared()
    out.json(MANIFEST, manifest)
    return code


if __name__ == "__main__":
    sys.exit(main())
