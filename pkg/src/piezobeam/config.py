"""Run configuration: strict TOML loading and construction of run objects.

A run is described by one TOML file with sections ``[model]`` (material
constants plus the three schedule kinds), ``[grid]``, ``[initial]``,
``[time]``, ``[output]`` and ``[tolerances]``, and a top-level ``seed``.
Every key must be known; anything unrecognized is a :class:`ConfigError`
rather than a silent ignore, so acceptance runs cannot drift through typos.
"""
from __future__ import annotations

import copy
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .discretization import Grid
from .model import (
    BeamModel,
    DampingSpec,
    PhysicalParams,
    affine_clamped_delay,
    constant_delay,
    constant_mu1,
    constant_mu2,
    offset_exp_mu1,
    proportional_mu2,
    sinusoidal_delay,
    sinusoidal_mu2,
    xi_window,
)
from .timestepper import InitialData, SchemeConfig


class ConfigError(Exception):
    """Raised for unreadable, malformed, or unknown-key configuration input."""


# required/optional key tables; values are the accepting python types
_MODEL_KEYS = {
    "rho": float,
    "alpha1": float,
    "gamma": float,
    "beta": float,
    "mu": float,
    "length": float,
    "delta": float,
    "M1": float,
    "M2": float,
}
_MODEL_OPTIONAL = {"xi_bar": float}
_TAU_KINDS = {
    "constant": {"value": float},
    "sinusoidal": {"center": float, "amplitude": float, "omega": float},
    "affine-clamped": {"start": float, "slope": float, "lower": float, "upper": float},
}
_MU1_KINDS = {
    "constant": {"value": float},
    "offset-exp": {"offset": float, "amp": float, "rate": float},
}
_MU2_KINDS = {
    "constant": {"value": float},
    "proportional": {"factor": float},
    "sinusoidal": {"amp": float, "omega": float, "offset": float},
}
# keys that may be omitted in a mu2 kind table (factor defaults to delta,
# sinusoidal offset defaults to zero); every other kind key is required
_MU2_OPTIONAL = frozenset({"factor", "offset"})

_FIELD_KINDS = {
    "zero": set(),
    "half_sine": {"amp", "mode"},
}
_HISTORY_KINDS = {"zero", "match_v1", "match_v1_fade"}


@dataclass(frozen=True)
class RunConfig:
    """Fully built run description.

    Holds both the constructed objects (model, grid, initial data, scheme)
    and the raw mapping they came from; sweeps mutate a copy of ``raw`` and
    rebuild rather than patching built objects.
    """

    model: BeamModel
    grid: Grid
    initial: InitialData
    scheme: SchemeConfig
    out_dir: Path
    seed: int
    c_tol: float
    c_h: float
    c_delay: float
    raw: dict = field(repr=False)

    def with_overrides(self, overrides: Mapping[str, Any]) -> "RunConfig":
        """Rebuild with dotted-path keys replaced, e.g. ``{"model.delta": 0.5}``."""
        data = copy.deepcopy(self.raw)
        for dotted, value in overrides.items():
            node = data
            *parents, leaf = dotted.split(".")
            for part in parents:
                if not isinstance(node.get(part), dict):
                    raise ConfigError(f"cannot override {dotted!r}: no section {part!r}")
                node = node[part]
            if leaf not in node:
                raise ConfigError(f"cannot override {dotted!r}: unknown key")
            node[leaf] = value
        return config_from_mapping(data)


def load_config(path) -> RunConfig:
    """Parse and build a :class:`RunConfig` from a TOML file."""
    p = Path(path)
    try:
        with open(p, "rb") as f:
            data = tomllib.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML in {p}: {exc}") from exc
    return config_from_mapping(data)


def config_from_mapping(data: Mapping[str, Any]) -> RunConfig:
    """Validate a parsed mapping and build every run object from it."""
    if not isinstance(data, Mapping):
        raise ConfigError("config root must be a table")
    known_top = {"model", "grid", "initial", "time", "output", "tolerances", "seed"}
    for key in data:
        if key not in known_top:
            raise ConfigError(f"unknown key {key!r}")

    seed = _int_value(data.get("seed", 1234), "seed")
    model = _build_model(_section(data, "model", required=True))
    grid = _build_grid(_section(data, "grid", required=True))
    initial = _build_initial(_section(data, "initial"), model)
    scheme = _build_scheme(_section(data, "time", required=True), model, grid)
    out_dir = _build_output(_section(data, "output"))
    c_tol, c_h, c_delay = _build_tolerances(_section(data, "tolerances"))

    return RunConfig(
        model=model,
        grid=grid,
        initial=initial,
        scheme=scheme,
        out_dir=out_dir,
        seed=seed,
        c_tol=c_tol,
        c_h=c_h,
        c_delay=c_delay,
        raw=copy.deepcopy(dict(data)),
    )


def _section(data: Mapping, name: str, required: bool = False) -> Mapping:
    sec = data.get(name)
    if sec is None:
        if required:
            raise ConfigError(f"missing required section [{name}]")
        return {}
    if not isinstance(sec, Mapping):
        raise ConfigError(f"[{name}] must be a table")
    return sec


def _float_value(value: Any, where: str) -> float:
    # bool is an int subclass; reject it explicitly
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    return float(value)


def _int_value(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    return value


def _str_value(value: Any, where: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"{where} must be a string, got {value!r}")
    return value


def _kind_table(sec: Mapping, name: str, kinds: dict, optional=frozenset()) -> tuple[str, dict]:
    """Validate a {kind=..., params...} table against the registered kinds."""
    if not isinstance(sec, Mapping):
        raise ConfigError(f"{name} must be a table with a 'kind' key")
    if "kind" not in sec:
        raise ConfigError(f"{name} needs a 'kind' key")
    kind = _str_value(sec["kind"], f"{name}.kind")
    if kind not in kinds:
        raise ConfigError(f"{name}.kind must be one of {sorted(kinds)}, got {kind!r}")
    allowed = kinds[kind]
    params = {}
    for key, value in sec.items():
        if key == "kind":
            continue
        if key not in allowed:
            raise ConfigError(f"unknown key {name}.{key!r} for kind {kind!r}")
        params[key] = _float_value(value, f"{name}.{key}")
    for key in allowed:
        if key not in params and key not in optional:
            raise ConfigError(f"{name} kind {kind!r} requires key {key!r}")
    return kind, params


def _build_model(sec: Mapping) -> BeamModel:
    known = set(_MODEL_KEYS) | set(_MODEL_OPTIONAL) | {"tau", "mu1", "mu2"}
    for key in sec:
        if key not in known:
            raise ConfigError(f"unknown key model.{key!r}")
    for key in _MODEL_KEYS:
        if key not in sec:
            raise ConfigError(f"missing required key model.{key!r}")
    vals = {key: _float_value(sec[key], f"model.{key}") for key in _MODEL_KEYS}

    try:
        params = PhysicalParams(
            rho=vals["rho"],
            alpha1=vals["alpha1"],
            gamma=vals["gamma"],
            beta=vals["beta"],
            mu=vals["mu"],
            length=vals["length"],
        )
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc

    kind, p = _kind_table(sec.get("tau", {}), "model.tau", _TAU_KINDS)
    if kind == "constant":
        delay = constant_delay(p["value"])
    elif kind == "sinusoidal":
        delay = sinusoidal_delay(p["center"], p["amplitude"], p["omega"])
    else:
        delay = affine_clamped_delay(p["start"], p["slope"], p["lower"], p["upper"])

    kind, p = _kind_table(sec.get("mu1", {}), "model.mu1", _MU1_KINDS)
    if kind == "constant":
        mu1 = constant_mu1(p["value"])
    else:
        mu1 = offset_exp_mu1(p["offset"], p["amp"], p["rate"])

    kind, p = _kind_table(sec.get("mu2", {}), "model.mu2", _MU2_KINDS, optional=_MU2_OPTIONAL)
    if kind == "constant":
        mu2 = constant_mu2(p["value"])
    elif kind == "proportional":
        mu2 = proportional_mu2(p.get("factor", vals["delta"]), mu1)
    else:
        mu2 = sinusoidal_mu2(p["amp"], p["omega"], p.get("offset", 0.0))

    damping = DampingSpec(
        mu1_schedule=mu1,
        mu2_schedule=mu2,
        M1=vals["M1"],
        M2=vals["M2"],
        delta=vals["delta"],
    )

    if "xi_bar" in sec:
        xi_bar = _float_value(sec["xi_bar"], "model.xi_bar")
    else:
        lo, hi = xi_window(vals["delta"], delay.d)
        xi_bar = 0.5 * (lo + hi)

    return BeamModel(params=params, delay=delay, damping=damping, xi_bar=xi_bar)


def _build_grid(sec: Mapping) -> Grid:
    for key in sec:
        if key not in {"nx", "ny"}:
            raise ConfigError(f"unknown key grid.{key!r}")
    for key in ("nx", "ny"):
        if key not in sec:
            raise ConfigError(f"missing required key grid.{key!r}")
    try:
        return Grid(nx=_int_value(sec["nx"], "grid.nx"), ny=_int_value(sec["ny"], "grid.ny"), length=1.0)
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from exc


def _field_function(spec: Mapping, name: str, length: float) -> Callable | None:
    if not isinstance(spec, Mapping):
        raise ConfigError(f"initial.{name} must be a table with a 'kind' key")
    kind = _str_value(spec.get("kind", ""), f"initial.{name}.kind")
    if kind not in _FIELD_KINDS:
        raise ConfigError(f"initial.{name}.kind must be one of {sorted(_FIELD_KINDS)}, got {kind!r}")
    for key in spec:
        if key != "kind" and key not in _FIELD_KINDS[kind]:
            raise ConfigError(f"unknown key initial.{name}.{key!r} for kind {kind!r}")
    if kind == "zero":
        return None
    amp = _float_value(spec.get("amp", 1.0), f"initial.{name}.amp")
    mode = _int_value(spec.get("mode", 1), f"initial.{name}.mode")
    if mode < 1:
        raise ConfigError(f"initial.{name}.mode must be >= 1")
    # odd half-waves: zero value at x=0, zero slope at x=L
    wavenumber = (2 * mode - 1) * np.pi / (2.0 * length)
    return lambda x: amp * np.sin(wavenumber * x)


def _build_initial(sec: Mapping, model: BeamModel) -> InitialData:
    known = {"v0", "v1", "p0", "p1", "v2"}
    for key in sec:
        if key not in known:
            raise ConfigError(f"unknown key initial.{key!r}")
    length = model.params.length
    fns = {}
    for name in ("v0", "v1", "p0", "p1"):
        fns[name] = _field_function(sec.get(name, {"kind": "zero"}), name, length)

    hist = sec.get("v2", {"kind": "match_v1"})
    if not isinstance(hist, Mapping):
        raise ConfigError("initial.v2 must be a table with a 'kind' key")
    kind = _str_value(hist.get("kind", ""), "initial.v2.kind")
    if kind not in _HISTORY_KINDS:
        raise ConfigError(f"initial.v2.kind must be one of {sorted(_HISTORY_KINDS)}, got {kind!r}")
    for key in hist:
        if key != "kind":
            raise ConfigError(f"unknown key initial.v2.{key!r} for kind {kind!r}")
    v1 = fns["v1"]
    if kind == "match_v1":
        v2 = None
    elif kind == "zero":
        v2 = None if v1 is None else (lambda x, y: np.zeros_like(np.asarray(x) + np.asarray(y)))
    else:  # depth-linear fade from v1 at the surface to zero at full delay
        base = v1 if v1 is not None else (lambda x: np.zeros_like(np.asarray(x, dtype=float)))
        v2 = lambda x, y: base(np.asarray(x)) * (1.0 - np.asarray(y))

    return InitialData(v0=fns["v0"], v1=v1, p0=fns["p0"], p1=fns["p1"], v2=v2)


def _build_scheme(sec: Mapping, model: BeamModel, grid: Grid) -> SchemeConfig:
    known = {"dt", "t_end", "scheme", "record_every"}
    for key in sec:
        if key not in known:
            raise ConfigError(f"unknown key time.{key!r}")
    if "t_end" not in sec:
        raise ConfigError("missing required key time.'t_end'")
    t_end = _float_value(sec["t_end"], "time.t_end")
    if "dt" in sec:
        dt = _float_value(sec["dt"], "time.dt")
    else:
        # half the transport CFL limit at the slowest certified delay,
        # capped by a wave-CFL guard that applies to both schemes; a
        # degenerate delay contributes no transport limit and is left for
        # the admissibility check to reject
        transport = 0.5 * model.delay.tau0 * grid.hy
        wave = 0.25 * grid.hx * (model.params.rho / model.params.alpha) ** 0.5
        dt = min(transport, wave) if transport > 0.0 else wave
    scheme = _str_value(sec.get("scheme", "trapezoid"), "time.scheme")
    record_every = _int_value(sec.get("record_every", 1), "time.record_every")
    try:
        return SchemeConfig(dt=dt, t_end=t_end, scheme=scheme, record_every=record_every)
    except ValueError as exc:
        raise ConfigError(f"time: {exc}") from exc


def _build_output(sec: Mapping) -> Path:
    for key in sec:
        if key != "dir":
            raise ConfigError(f"unknown key output.{key!r}")
    return Path(_str_value(sec.get("dir", "out"), "output.dir"))


def _build_tolerances(sec: Mapping) -> tuple[float, float, float]:
    known = {"c_tol", "c_h", "c_delay"}
    for key in sec:
        if key not in known:
            raise ConfigError(f"unknown key tolerances.{key!r}")
    c_tol = _float_value(sec.get("c_tol", 1.0), "tolerances.c_tol")
    c_h = _float_value(sec.get("c_h", 1.0), "tolerances.c_h")
    c_delay = _float_value(sec.get("c_delay", 1.0), "tolerances.c_delay")
    for name, val in (("c_tol", c_tol), ("c_h", c_h), ("c_delay", c_delay)):
        if val <= 0.0:
            raise ConfigError(f"tolerances.{name} must be positive")
    return c_tol, c_h, c_delay
