from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from vesicle_sdc.config import (
    PRESETS,
    ConfigError,
    RunConfig,
    build_flow,
    couette_wall,
    from_dict,
    initial_state,
    load,
    preset,
    stenosis_wall,
)
from vesicle_sdc.curve import ellipse, write_curve

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.mark.parametrize("name", [p for p in PRESETS if p != "custom"])
def test_presets_build(name):
    cfg = preset(name)
    state = initial_state(cfg)
    assert state.m == cfg.m
    assert all(v.n == cfg.n for v in state.vesicles)
    flow = build_flow(cfg)
    assert flow.confined == (cfg.wall is not None)


def test_relaxation_preset_shape():
    cfg = preset("relaxation")
    g = initial_state(cfg).vesicles[0].geometry
    c = 10 ** (1 / 3)
    assert abs(g.area - 3 * np.pi * c**2) < 1e-10
    assert (cfg.n, cfg.horizon, cfg.steps, cfg.mode) == (96, 2.0, 125, "fixed")


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.name)
def test_shipped_configs_validate(path):
    cfg = load(path)
    initial_state(cfg)
    build_flow(cfg)


def test_unknown_preset_and_keys():
    with pytest.raises(ConfigError):
        preset("poiseuille")
    with pytest.raises(ConfigError):
        from_dict({"preset": "relaxation", "nsteps": 3})


@pytest.mark.parametrize("bad", [
    dict(n=33), dict(n=2), dict(mode="adaptive", scheme="bdf2"), dict(horizon=0.0),
    dict(steps=0), dict(scheme="rk4"), dict(p=1), dict(flow="confined"),
    dict(budget_mode="greedy"), dict(vesicles=[]), dict(n=64.5),
])
def test_invalid_configs(bad):
    base = {"preset": "relaxation"}
    base.update(bad)
    with pytest.raises(ConfigError):
        from_dict(base)


def test_integral_floats_coerced():
    cfg = from_dict({"preset": "relaxation", "n": 32.0, "steps": 10.0})
    assert cfg.n == 32 and isinstance(cfg.n, int)


def test_roundtrip_through_dict():
    cfg = preset("couette")
    again = from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg


def test_curve_file_relative_to_config(tmp_path):
    (tmp_path / "shapes").mkdir()
    write_curve(tmp_path / "shapes" / "v.txt", ellipse(48, 1.5, 1.0).points)
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps({"n": 32, "vesicles": [{"kind": "file", "path": "shapes/v.txt"}]}))
    cfg = load(cfg_path)
    v = initial_state(cfg).vesicles[0]
    assert v.n == 32
    assert abs(v.geometry.area - 1.5 * np.pi) < 1e-10


def test_bad_json(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load(p)
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load(p)


def test_perturbation_is_seeded():
    base = dict(n=32, vesicles=[dict(a=1.5, b=1.0)], perturbation=0.05)
    a = initial_state(from_dict(dict(base, seed=3))).vesicles[0].points
    b = initial_state(from_dict(dict(base, seed=3))).vesicles[0].points
    c = initial_state(from_dict(dict(base, seed=4))).vesicles[0].points
    assert np.array_equal(a, b)
    assert np.max(np.abs(a - c)) > 1e-4


def test_default_config_is_custom():
    assert RunConfig().preset == "custom"


# --- walls ------------------------------------------------------------------------------

def test_stenosis_wall_geometry_and_flux():
    wall = stenosis_wall(256, 6.0, 1.5, 0.6, 1.0, 1.0)
    pts = wall.curves[0]
    vel = wall.velocities[0]
    seg = np.hypot(*np.diff(np.vstack([pts, pts[:1]]), axis=0).T)
    # equal arclength sampling
    assert seg.max() / seg.min() < 1.05
    # throat narrower than the ends
    top_mid = pts[np.argmin(np.abs(pts[:, 0]) + 10 * (pts[:, 1] < 0))]
    assert abs(top_mid[1] - 0.9) < 0.02
    # the prescribed data carries no net flux through the closed outline
    d = np.roll(pts, -1, axis=0) - np.roll(pts, 1, axis=0)
    normal = np.column_stack([d[:, 1], -d[:, 0]]) / 2
    flux = np.sum(vel * normal)
    assert abs(flux) < 1e-3 * np.sum(np.abs(vel * normal))
    # near no-slip along the side walls; the rounded corners leak a little
    speed = np.hypot(*vel.T)
    assert np.max(speed[np.abs(pts[:, 0]) < 3.0]) < 2e-3
    assert np.max(speed[np.abs(pts[:, 0]) < 1.0]) < 1e-5
    # inflow at the left end, outflow at the right
    assert vel[np.argmin(pts[:, 0]), 0] > 0.5 and vel[np.argmax(pts[:, 0]), 0] > 0.5


def test_stenosis_wall_validation():
    with pytest.raises(ConfigError):
        stenosis_wall(64, 6.0, 1.5, 1.5, 1.0, 1.0)
    with pytest.raises(ConfigError):
        stenosis_wall(64, 6.0, 1.5, 0.5, 1.0, 1.0, exponent=3)
    with pytest.raises(ConfigError):
        build_flow(from_dict(dict(n=32, vesicles=[dict(a=0.5, b=0.3)], flow="confined",
                                  wall=dict(kind="stenosis", bogus=1.0))))


def test_couette_wall():
    wall = couette_wall(64, 6.0, 3.0, 2.0)
    outer, inner = wall.curves
    assert np.allclose(np.hypot(*outer.T), 6.0) and np.allclose(np.hypot(*inner.T), 3.0)
    assert np.max(np.abs(wall.velocities[0])) == 0
    assert np.allclose(np.hypot(*wall.velocities[1].T), 6.0)
