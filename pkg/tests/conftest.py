"""Shared fixtures for the trajectory-backed test suites.

The shipped default configuration integrates 8533 steps on a 201 x 33 grid,
so the acceptance criteria share one run per scheme and resolution instead
of re-integrating inside every test.  Each fixture carries its own wall-clock
build time so criteria with a runtime budget can account for it honestly.
"""

import time
from pathlib import Path
from typing import NamedTuple

import pytest

from piezobeam.config import load_config
from piezobeam.timestepper import initialize, run

DEFAULT_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "default.toml"


class TimedRun(NamedTuple):
    trace: object
    seconds: float


def integrate(cfg) -> TimedRun:
    start = time.perf_counter()
    state = initialize(cfg.model, cfg.grid, cfg.initial)
    trace = run(cfg.model, cfg.grid, state, cfg.scheme)
    return TimedRun(trace, time.perf_counter() - start)


@pytest.fixture(scope="session")
def default_config():
    return load_config(DEFAULT_CONFIG)


@pytest.fixture(scope="session")
def default_run(default_config) -> TimedRun:
    return integrate(default_config)


@pytest.fixture(scope="session")
def rk4_run(default_config) -> TimedRun:
    # same grid and dt as the default run so decay rates are comparable
    return integrate(default_config.with_overrides({"time.scheme": "explicit-rk4"}))


@pytest.fixture(scope="session")
def coarse_run(default_config) -> TimedRun:
    cfg = default_config.with_overrides(
        {
            "grid.nx": 101,
            "grid.ny": 17,
            "time.dt": 2.0 * default_config.scheme.dt,
            "time.record_every": 4,
        }
    )
    return integrate(cfg)


@pytest.fixture(scope="session")
def fine_delay_run(default_config) -> TimedRun:
    # joint (hy, dt) halving; hx untouched so the delay channel dominates
    cfg = default_config.with_overrides(
        {
            "grid.ny": 65,
            "time.dt": default_config.scheme.dt / 2.0,
            "time.record_every": 16,
        }
    )
    return integrate(cfg)
