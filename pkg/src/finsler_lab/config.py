"""Experiment configuration: a YAML or JSON mapping validated before any
computation starts. Unknown keys are rejected at every level."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import List, Literal, Optional, Tuple

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .fields import field_from_config
from .metrics import metric_from_config

_METRIC_KEYS = {
    "euclidean": {"delta"},
    "riemannian": {"delta", "g11", "g12", "g22"},
    "conformal": {"delta", "u"},
    "spherical_cap": {"delta", "alpha0"},
    "randers": {"delta", "beta1", "beta2", "g11", "g12", "g22"},
    "scaled": {"base", "weight"},
    "perturbation_sum": {"base", "bumps", "fiber_terms"},
    "fiber_perturbed": {"inner", "terms"},
}


def _check_metric(cfg, where="metric"):
    if not isinstance(cfg, dict) or "family" not in cfg:
        raise ValueError(f"{where}: a mapping with a 'family' key is required")
    fam = cfg["family"]
    if fam not in _METRIC_KEYS:
        raise ValueError(f"{where}: unknown family {fam!r}")
    extra = set(cfg) - _METRIC_KEYS[fam] - {"family"}
    if extra:
        raise ValueError(f"{where}: unknown keys {sorted(extra)} for family {fam!r}")
    for k in ("base", "inner"):
        if k in cfg:
            _check_metric(cfg[k], f"{where}.{k}")
    try:
        m = metric_from_config(cfg)
    except Exception as exc:  # any construction failure is a config error
        raise ValueError(f"{where}: {exc}") from exc
    if m.delta <= 0:
        raise ValueError(f"{where}: delta must be positive")
    return cfg


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Grids(_Strict):
    n_boundary: int = Field(256, ge=4)        # boundary points of bd tables
    s_points: int = Field(256, ge=8)          # points on the outer circle S
    boundary_angles: int = Field(192, ge=4)   # unit-circle samples of boundary-only envelopes
    rings: int = Field(12, ge=1)              # interior rings of the disc grid
    angles: int = Field(48, ge=4)             # angles of the disc grid
    n_r: int = Field(48, ge=2)                # fiber volume: radial nodes
    n_theta: int = Field(96, ge=4)            # fiber volume: base angles
    n_fiber: int = Field(128, ge=4)           # fiber volume: fiber angles

    def scaled(self, s: float) -> "Grids":
        def sc(v, lo, even=True):
            k = max(lo, int(round(v * s)))
            return k + (k % 2) if even else k
        return Grids(n_boundary=sc(self.n_boundary, 4), s_points=sc(self.s_points, 8),
                     boundary_angles=sc(self.boundary_angles, 4), rings=sc(self.rings, 1, False),
                     angles=sc(self.angles, 4), n_r=sc(self.n_r, 2, False), n_theta=sc(self.n_theta, 4),
                     n_fiber=sc(self.n_fiber, 4))


class Tolerances(_Strict):
    step: float = Field(1e-3, gt=0, le=0.1)        # single-geodesic RK4 step
    grid_step: float = Field(1e-2, gt=0, le=0.1)   # table / envelope RK4 step
    shoot_tol: float = Field(1e-11, gt=0, lt=1e-3)


class GeodesicBlock(_Strict):
    x0: Optional[Tuple[float, float]] = None
    v0: Optional[Tuple[float, float]] = None
    a: Optional[Tuple[float, float]] = None
    b: Optional[Tuple[float, float]] = None
    radius: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _one_mode(self):
        flow = self.x0 is not None and self.v0 is not None
        conn = self.a is not None and self.b is not None
        if flow == conn:
            raise ValueError("give either x0 and v0 (flow) or a and b (connect)")
        return self


class VolumeBlock(_Strict):
    methods: List[Literal["fiber", "envelope", "bd", "rotinv"]] = ["fiber", "envelope", "bd", "rotinv"]
    rotinv_samples: int = Field(513, ge=5)


class EnvelopeBlock(_Strict):
    bd_check: bool = True
    boundary_only: bool = False
    write_json: bool = False


class RayBlock(_Strict):
    f: dict = {"kind": "polynomial", "coeffs": [[0, 0, 1.0], [2, 0, -1.0], [0, 2, -1.0]]}
    eps: float = Field(1e-2, gt=0, lt=1)
    eps_list: List[float] = [1e-2, 5e-3, 2.5e-3]
    sinogram_n: int = Field(32, ge=3)
    pairs: Optional[List[Tuple[int, int]]] = None

    @field_validator("f")
    @classmethod
    def _field(cls, v):
        try:
            field_from_config(v)
        except Exception as exc:
            raise ValueError(f"f: {exc}") from exc
        return v


class MonotonicityBlock(_Strict):
    base: Literal["euclidean", "cap"] = "euclidean"
    trials: int = Field(200, ge=1)
    amplitude: float = Field(1e-2, gt=0, le=1)
    n_table: int = Field(32, ge=8)
    scan_amplitudes: List[float] = []
    scan_trials: int = Field(8, ge=1)

    @field_validator("scan_amplitudes")
    @classmethod
    def _positive(cls, v):
        if any(not (0 < a <= 1) for a in v):
            raise ValueError("scan amplitudes must lie in (0, 1]")
        return v


class PsiBlock(_Strict):
    q_angle: float = 0.0
    half_width: float = Field(0.05, gt=0, lt=1)
    h: float = Field(1e-3, gt=0, lt=0.1)


class ExperimentConfig(_Strict):
    metric: dict = {"family": "euclidean"}
    metric_prime: Optional[dict] = None
    seed: int = Field(0, ge=0, lt=2**64)
    out: Optional[str] = None
    delta: Optional[float] = Field(None, gt=0)
    grids: Grids = Grids()
    tolerances: Tolerances = Tolerances()
    geodesic: Optional[GeodesicBlock] = None
    bdist: Optional[dict] = None
    volume: VolumeBlock = VolumeBlock()
    envelope: EnvelopeBlock = EnvelopeBlock()
    raytransform: RayBlock = RayBlock()
    monotonicity: MonotonicityBlock = MonotonicityBlock()
    psi: PsiBlock = PsiBlock()

    @field_validator("metric")
    @classmethod
    def _metric(cls, v):
        return _check_metric(v)

    @field_validator("metric_prime")
    @classmethod
    def _metric_prime(cls, v):
        return None if v is None else _check_metric(v, "metric_prime")

    @field_validator("bdist")
    @classmethod
    def _bdist(cls, v):
        if v:
            raise ValueError(f"bdist takes no keys (got {sorted(v)}); use grids.n_boundary")
        return v

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def load_config(path) -> ExperimentConfig:
    """Parse YAML (or JSON, a YAML subset) and validate."""
    text = Path(path).read_text()
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise ValueError("config must be a mapping")
    return ExperimentConfig.model_validate(data)
