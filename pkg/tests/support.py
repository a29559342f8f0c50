"""Shared builders for test models."""
from __future__ import annotations

from piezobeam.model import (
    BeamModel,
    DampingSpec,
    PhysicalParams,
    constant_delay,
    constant_mu1,
    constant_mu2,
    offset_exp_mu1,
    proportional_mu2,
    sinusoidal_delay,
)


def default_params(**overrides) -> PhysicalParams:
    kwargs = dict(rho=1.0, alpha1=1.0, gamma=0.5, beta=1.0, mu=1.0, length=1.0)
    kwargs.update(overrides)
    return PhysicalParams(**kwargs)


def default_model(**overrides) -> BeamModel:
    """Admissible reference model: moving delay, decaying damping."""
    mu1 = overrides.pop("mu1", None) or offset_exp_mu1(1.0, 1.0, 1.0)
    mu2 = overrides.pop("mu2", None) or proportional_mu2(0.3, mu1)
    delta = overrides.pop("delta", 0.3)
    return BeamModel(
        params=overrides.pop("params", None) or default_params(),
        delay=overrides.pop("delay", None) or sinusoidal_delay(0.5, 0.2, 0.5),
        damping=DampingSpec(mu1_schedule=mu1, mu2_schedule=mu2, M1=1.0, M2=1.0, delta=delta),
        xi_bar=overrides.pop("xi_bar", 1.0),
    )


def undelayed_model(mu1_value: float, tau: float = 0.5, rho: float = 1.0) -> BeamModel:
    """Constant instantaneous damping only; the delayed channel is off."""
    return BeamModel(
        params=default_params(rho=rho),
        delay=constant_delay(tau),
        damping=DampingSpec(
            mu1_schedule=constant_mu1(mu1_value),
            mu2_schedule=constant_mu2(0.0),
            M1=0.0,
            M2=0.0,
            delta=0.0,
        ),
        xi_bar=1.0,
    )


def conservative_model(tau: float = 0.5) -> BeamModel:
    """No damping at all; the wave block evolves by a skew generator."""
    return BeamModel(
        params=default_params(),
        delay=constant_delay(tau),
        damping=DampingSpec(
            mu1_schedule=constant_mu1(0.0),
            mu2_schedule=constant_mu2(0.0),
            M1=0.0,
            M2=0.0,
            delta=0.0,
        ),
        xi_bar=1.0,
    )
