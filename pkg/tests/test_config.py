import copy
from pathlib import Path

import numpy as np
import pytest

from piezobeam.config import ConfigError, config_from_mapping, load_config

DEFAULT_TOML = Path(__file__).resolve().parents[1] / "configs" / "default.toml"


def base_mapping():
    return {
        "seed": 7,
        "model": {
            "rho": 1.0,
            "alpha1": 1.0,
            "gamma": 0.5,
            "beta": 1.0,
            "mu": 1.0,
            "length": 1.0,
            "delta": 0.3,
            "M1": 1.0,
            "M2": 0.3,
            "tau": {"kind": "sinusoidal", "center": 0.5, "amplitude": 0.2, "omega": 0.5},
            "mu1": {"kind": "offset-exp", "offset": 1.0, "amp": 1.0, "rate": 1.0},
            "mu2": {"kind": "proportional", "factor": 0.3},
        },
        "grid": {"nx": 33, "ny": 9},
        "initial": {
            "v0": {"kind": "half_sine", "amp": 1.0, "mode": 1},
            "v1": {"kind": "zero"},
            "p0": {"kind": "half_sine", "amp": 1.0, "mode": 1},
            "p1": {"kind": "zero"},
            "v2": {"kind": "zero"},
        },
        "time": {"t_end": 2.0, "scheme": "trapezoid", "record_every": 4},
        "output": {"dir": "out"},
        "tolerances": {"c_tol": 1.0, "c_h": 1.0, "c_delay": 0.6},
    }


def with_patch(path, value):
    data = copy.deepcopy(base_mapping())
    node = data
    *parents, leaf = path.split(".")
    for part in parents:
        node = node.setdefault(part, {})
    if value is ...:
        node.pop(leaf, None)
    else:
        node[leaf] = value
    return data


def test_shipped_default_config_loads():
    cfg = load_config(DEFAULT_TOML)
    assert cfg.grid.nx == 201 and cfg.grid.ny == 33
    assert cfg.scheme.dt == pytest.approx(0.5 * 0.3 / 32, rel=1e-14)
    assert cfg.scheme.t_end == 40.0
    assert cfg.scheme.scheme == "trapezoid"
    assert cfg.model.params.alpha == pytest.approx(1.25)
    assert cfg.model.delay.tau0 == pytest.approx(0.3)
    assert cfg.model.delay.tau1 == pytest.approx(0.7)
    assert cfg.model.delay.d == pytest.approx(0.1)
    assert cfg.model.xi_bar == 1.0
    assert cfg.seed == 1234
    assert cfg.c_delay == pytest.approx(0.6)
    # half-sine initial displacement, zero initial velocity
    assert cfg.initial.v0(1.0) == pytest.approx(1.0)
    assert cfg.initial.v1 is None


def test_built_objects_from_mapping():
    cfg = config_from_mapping(base_mapping())
    assert cfg.model.damping.mu1(0.0) == pytest.approx(2.0)
    assert cfg.model.damping.mu2(0.0) == pytest.approx(0.6)
    assert cfg.grid.hx == pytest.approx(1.0 / 32)
    assert cfg.seed == 7
    assert cfg.out_dir == Path("out")


def test_dt_defaults_to_guarded_cfl():
    cfg = config_from_mapping(with_patch("time.dt", ...))
    transport = 0.5 * 0.3 * cfg.grid.hy
    wave = 0.25 * cfg.grid.hx * (1.0 / 1.25) ** 0.5
    assert cfg.scheme.dt == pytest.approx(min(transport, wave))
    # on a coarse-in-x grid the wave guard binds instead
    data = with_patch("time.dt", ...)
    data["grid"] = {"nx": 401, "ny": 5}
    cfg2 = config_from_mapping(data)
    assert cfg2.scheme.dt == pytest.approx(0.25 * (1.0 / 400) * (1.0 / 1.25) ** 0.5)


@pytest.mark.parametrize("delta", [0.3, 0.5])
def test_xi_bar_defaults_to_window_midpoint(delta):
    data = with_patch("model.xi_bar", ...)
    data["model"]["delta"] = delta
    # the admissible window is symmetric about 1 for any delta, d
    assert config_from_mapping(data).model.xi_bar == pytest.approx(1.0)


def test_mu2_factor_defaults_to_delta():
    data = with_patch("model.mu2", {"kind": "proportional"})
    data["model"]["delta"] = 0.25
    cfg = config_from_mapping(data)
    assert cfg.model.damping.mu2(0.0) == pytest.approx(0.25 * 2.0)


def test_initial_kinds():
    data = with_patch("initial.v0", {"kind": "half_sine", "amp": 2.0, "mode": 2})
    cfg = config_from_mapping(data)
    x = np.array([0.0, 1.0 / 3.0, 1.0])
    np.testing.assert_allclose(cfg.initial.v0(x), 2.0 * np.sin(1.5 * np.pi * x), atol=1e-14)
    assert cfg.initial.p1 is None

    faded = config_from_mapping(
        {
            **copy.deepcopy(base_mapping()),
            "initial": {
                "v1": {"kind": "half_sine", "amp": 1.0, "mode": 1},
                "v2": {"kind": "match_v1_fade"},
            },
        }
    )
    assert faded.initial.v2(1.0, 0.0) == pytest.approx(1.0)
    assert faded.initial.v2(1.0, 1.0) == pytest.approx(0.0)

    # zero history with zero v1 is the compatible default, no explicit table
    assert config_from_mapping(with_patch("initial.v2", ...)).initial.v2 is None


@pytest.mark.parametrize(
    "path,value",
    [
        ("typo_section", {}),
        ("model.typo", 1.0),
        ("model.tau.typo", 1.0),
        ("model.tau.kind", "triangle"),
        ("model.mu1.kind", "piecewise"),
        ("grid.typo", 3),
        ("initial.v0", {"kind": "half_sine", "typo": 1.0}),
        ("initial.v2", {"kind": "match_v1", "typo": 1.0}),
        ("initial.v0", {"kind": "gaussian"}),
        ("time.typo", 1),
        ("time.scheme", "leapfrog"),
        ("output.typo", "x"),
        ("tolerances.typo", 1.0),
        ("tolerances.c_tol", -1.0),
        ("grid.nx", 2.5),
        ("grid.nx", True),
        ("model.rho", "heavy"),
        ("model.rho", -1.0),
        ("seed", "abc"),
    ],
)
def test_rejects_bad_entries(path, value):
    with pytest.raises(ConfigError):
        config_from_mapping(with_patch(path, value))


@pytest.mark.parametrize("path", ["model", "grid", "time", "model.rho", "model.tau.center", "time.t_end"])
def test_rejects_missing_required(path):
    with pytest.raises(ConfigError):
        config_from_mapping(with_patch(path, ...))


def test_optional_sections_defaulted():
    data = with_patch("tolerances", ...)
    for sec in ("initial", "output"):
        del data[sec]
        del data["seed"]
        break
    cfg = config_from_mapping(data)
    assert cfg.c_tol == 1.0 and cfg.c_h == 1.0
    cfg2 = config_from_mapping({k: v for k, v in base_mapping().items() if k in ("model", "grid", "time")})
    assert cfg2.seed == 1234
    assert cfg2.initial.v0 is None
    assert cfg2.out_dir == Path("out")


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[model\nrho = ")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_with_overrides_rebuilds():
    cfg = config_from_mapping(base_mapping())
    swept = cfg.with_overrides({"model.delta": 0.45, "time.t_end": 1.0})
    assert swept.model.damping.delta == pytest.approx(0.45)
    # proportional factor was pinned at 0.3 in the base mapping, so the
    # damping gain itself is unchanged by the delta override
    assert swept.model.damping.mu2(0.0) == pytest.approx(0.6)
    assert swept.scheme.t_end == 1.0
    assert cfg.scheme.t_end == 2.0
    with pytest.raises(ConfigError):
        cfg.with_overrides({"model.nonexistent": 1.0})
    with pytest.raises(ConfigError):
        cfg.with_overrides({"nope.delta": 1.0})
