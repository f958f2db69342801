"""Run configuration, flow presets and the initial geometries they build.

A configuration is one JSON document. ``preset`` selects defaults for a flow
and any other key overrides them; ``custom`` starts from bare defaults and
expects the geometry to be given explicitly.
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .curve import VesicleCurve, ellipse, read_curve, resample
from .dynamics import BackgroundFlow, SuspensionState
from .potentials import WallGeometry

PRESETS = ("relaxation", "extensional", "shear", "stenosis", "couette", "custom")
MODES = ("fixed", "adaptive")
SCHEMES = ("euler", "bdf2", "sdc")

# Shapes are scaled by this factor so that unit bending rigidity matches a
# unit-size vesicle with rigidity 0.1 (bending time scales as size^3).
SIZE = 10.0 ** (1.0 / 3.0)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    preset: str = "custom"
    n: int = 96
    n_wall: int = 128
    vesicles: list = field(default_factory=list)
    wall: dict | None = None
    flow: str = "none"
    rate: float = 1.0
    horizon: float = 1.0
    mode: str = "fixed"
    steps: int = 100
    tolerance: float = 1e-3
    dt0: float | None = None
    budget_mode: str = "plain"
    scheme: str = "sdc"
    p: int = 4
    n_sdc: int = 1
    gmres_tol: float = 1e-10
    gmres_max_iter: int = 200
    output_dir: str | None = None
    seed: int = 0
    perturbation: float = 0.0
    snapshot_every: int = 0

    @property
    def m(self) -> int:
        return len(self.vesicles)

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> RunConfig:
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; expected one of {PRESETS}")
        if self.n < 4 or self.n % 2:
            raise ConfigError(f"N must be an even integer >= 4, got {self.n}")
        if self.wall is not None and (self.n_wall < 4 or self.n_wall % 2):
            raise ConfigError(f"N_wall must be an even integer >= 4, got {self.n_wall}")
        if not self.vesicles:
            raise ConfigError("at least one vesicle is required")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}")
        if self.mode == "adaptive" and self.scheme == "bdf2":
            raise ConfigError("bdf2 is fixed-step only; use sdc or euler for adaptive runs")
        if not self.horizon > 0:
            raise ConfigError("horizon must be positive")
        if self.mode == "fixed" and self.steps < 1:
            raise ConfigError("fixed mode needs steps >= 1")
        if self.mode == "adaptive" and not self.tolerance > 0:
            raise ConfigError("adaptive mode needs a positive tolerance")
        if self.scheme == "sdc" and (self.p < 2 or self.n_sdc < 0):
            raise ConfigError("sdc needs p >= 2 and n_sdc >= 0")
        if self.budget_mode not in ("plain", "remaining-budget"):
            raise ConfigError("budget_mode must be 'plain' or 'remaining-budget'")
        if (self.flow == "confined") != (self.wall is not None):
            raise ConfigError("a wall is required exactly when flow is 'confined'")
        if self.flow not in ("none", "shear", "extensional", "confined"):
            raise ConfigError(f"unknown flow {self.flow!r}")
        for entry in self.vesicles:
            if entry.get("kind", "ellipse") not in ("ellipse", "file"):
                raise ConfigError(f"unknown vesicle kind {entry.get('kind')!r}")
        return self


def _base(name: str) -> dict:
    s = SIZE
    if name == "relaxation":
        return dict(preset=name, n=96, vesicles=[dict(a=3 * s, b=s)], horizon=2.0,
                    mode="fixed", steps=125, scheme="sdc", p=5, n_sdc=1)
    if name == "extensional":
        ves = [dict(a=0.42 * s, b=s, center=[sx * 1.5 * s, 0.0]) for sx in (-1, 1)]
        return dict(preset=name, n=96, vesicles=ves, flow="extensional", horizon=24.0,
                    mode="adaptive", tolerance=1e-3, dt0=0.1, scheme="sdc", p=4, n_sdc=1)
    if name == "shear":
        ves = [dict(a=s, b=0.5 * s, center=[-1.5 * s, 0.3 * s]),
               dict(a=s, b=0.5 * s, center=[1.5 * s, -0.3 * s])]
        return dict(preset=name, n=64, vesicles=ves, flow="shear", horizon=6.0,
                    mode="adaptive", tolerance=1e-2, dt0=0.05, scheme="sdc", p=4, n_sdc=1)
    if name == "stenosis":
        wall = dict(kind="stenosis", half_length=6.0, half_width=1.5, gap_ratio=0.6,
                    width=1.0, speed=1.0)
        return dict(preset=name, n=64, n_wall=256, vesicles=[dict(a=0.9, b=0.45, center=[-3.5, 0.0])],
                    wall=wall, flow="confined", horizon=4.0, mode="adaptive", tolerance=1e-2,
                    dt0=0.02, scheme="sdc", p=4, n_sdc=1)
    if name == "couette":
        # three vesicles between rotating cylinders: a reduced version of the
        # dense suspension benchmark
        ves = [dict(a=0.9, b=0.45, center=[4.5 * np.cos(t), 4.5 * np.sin(t)],
                    angle=t + np.pi / 2) for t in 2 * np.pi * np.arange(3) / 3]
        wall = dict(kind="couette", outer_radius=6.0, inner_radius=3.0, omega=1.0)
        return dict(preset=name, n=32, n_wall=64, vesicles=ves, wall=wall, flow="confined",
                    horizon=2.0, mode="adaptive", tolerance=1e-1, dt0=0.02,
                    budget_mode="remaining-budget", scheme="sdc", p=4, n_sdc=1)
    return dict(preset="custom")


def preset(name: str) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; expected one of {PRESETS}")
    return from_dict(_base(name))


def from_dict(data: dict) -> RunConfig:
    data = copy.deepcopy(data)
    known = {f.name for f in fields(RunConfig)}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown configuration keys: {sorted(extra)}")
    base = _base(data.get("preset", "custom"))
    base.update(data)
    for key in ("n", "n_wall", "steps", "p", "n_sdc", "gmres_max_iter", "seed", "snapshot_every"):
        if key in base and isinstance(base[key], float):
            if not base[key].is_integer():
                raise ConfigError(f"{key} must be an integer")
            base[key] = int(base[key])
    return RunConfig(**base).validate()


def load(path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    # curve files are resolved relative to the config file
    for entry in data.get("vesicles", []):
        if entry.get("kind") == "file" and not Path(entry["path"]).is_absolute():
            entry["path"] = str(path.parent / entry["path"])
    return from_dict(data)


# --- geometry -------------------------------------------------------------------

def _vesicle(entry: dict, n: int) -> VesicleCurve:
    if entry.get("kind", "ellipse") == "file":
        pts = read_curve(entry["path"])
        if len(pts) != n:
            pts = resample(pts, n)
        return VesicleCurve(pts)
    return ellipse(n, float(entry["a"]), float(entry["b"]), center=entry.get("center", (0.0, 0.0)),
                   angle=float(entry.get("angle", 0.0)))


def _perturb(curve: VesicleCurve, amplitude: float, rng) -> VesicleCurve:
    n = curve.n
    theta = curve.theta()
    g = curve.geometry
    bump = np.zeros(n)
    for k in range(2, 6):
        a, b = rng.normal(size=2)
        bump += (a * np.cos(k * theta) + b * np.sin(k * theta)) / k**2
    return VesicleCurve(curve.points + amplitude * bump[:, None] * g.normal)


def initial_state(cfg: RunConfig) -> SuspensionState:
    curves = [_vesicle(entry, cfg.n) for entry in cfg.vesicles]
    if cfg.perturbation:
        rng = np.random.default_rng(cfg.seed)
        curves = [_perturb(c, cfg.perturbation, rng) for c in curves]
    return SuspensionState.from_curves(curves)


def _channel(phi, half_length, half_width, gap_ratio, width, exponent):
    # superellipse in polar form (analytic in phi), then squeezed by h(x)
    r = (np.cos(phi) ** exponent / half_length ** exponent
         + np.sin(phi) ** exponent / half_width ** exponent) ** (-1.0 / exponent)
    x, y0 = r * np.cos(phi), r * np.sin(phi)
    bump = np.exp(-(x / width) ** 2)
    h = half_width * (1 - (1 - gap_ratio) * bump)
    dh = half_width * (1 - gap_ratio) * bump * 2 * x / width**2
    return x, y0 * h / half_width, h, dh


def stenosis_wall(n: int, half_length: float, half_width: float, gap_ratio: float,
                  width: float, speed: float, exponent: int = 8) -> WallGeometry:
    """Closed channel with a smooth constriction at x = 0.

    The outline is a superellipse whose half-width narrows to
    ``gap_ratio * half_width`` at the throat, sampled at equal arclength. The
    boundary data is the restriction of the no-slip parabolic channel flow with
    stream function psi = speed * half_width * (3 s - s^3) / 2, s = y / h(x),
    which carries the same flux through every cross section. It vanishes where
    the outline follows y = +-h(x) and is small near the rounded corners.
    """
    if not 0 < gap_ratio <= 1:
        raise ConfigError("gap_ratio must lie in (0, 1]")
    if exponent < 2 or exponent % 2:
        raise ConfigError("exponent must be an even integer >= 2")
    args = (half_length, half_width, gap_ratio, width, exponent)
    fine = np.linspace(0.0, 2 * np.pi, 64 * n + 1)
    xf, yf, _, _ = _channel(fine, *args)
    s = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(xf), np.diff(yf)))])
    # phi(s) minus its linear part is periodic and smooth
    target = np.arange(n) * s[-1] / n
    lin = 2 * np.pi * s / s[-1]
    spline = CubicSpline(s, fine - lin, bc_type="periodic")
    phi = spline(target) + 2 * np.pi * target / s[-1]
    x, y, h, dh = _channel(phi, *args)
    sv = y / h
    # u = psi_y, v = -psi_x with psi = U H (3 s - s^3) / 2
    dpsi_ds = speed * half_width * 1.5 * (1 - sv**2)
    u = dpsi_ds / h
    v = dpsi_ds * sv * dh / h
    return WallGeometry([np.column_stack([x, y])], [np.column_stack([u, v])])


def couette_wall(n: int, outer_radius: float, inner_radius: float, omega: float) -> WallGeometry:
    """Fixed outer cylinder, inner cylinder rotating at angular speed omega."""
    t = 2 * np.pi * np.arange(n) / n
    outer = outer_radius * np.column_stack([np.cos(t), np.sin(t)])
    inner = inner_radius * np.column_stack([np.cos(-t), np.sin(-t)])
    vin = omega * np.column_stack([-inner[:, 1], inner[:, 0]])
    return WallGeometry([outer, inner], [np.zeros_like(outer), vin], [np.zeros(2)])


def build_wall(cfg: RunConfig) -> WallGeometry | None:
    if cfg.wall is None:
        return None
    entry = dict(cfg.wall)
    kind = entry.pop("kind", None)
    try:
        if kind == "stenosis":
            return stenosis_wall(cfg.n_wall, **entry)
        if kind == "couette":
            return couette_wall(cfg.n_wall, **entry)
    except TypeError as exc:
        raise ConfigError(f"bad {kind} wall parameters: {exc}") from exc
    raise ConfigError(f"unknown wall kind {kind!r}")


def build_flow(cfg: RunConfig) -> BackgroundFlow:
    return BackgroundFlow(cfg.flow, cfg.rate, build_wall(cfg))
