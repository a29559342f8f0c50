"""Physical parameters, time-varying schedules, and admissibility certification.

The model couples an elastic displacement field and a charge-like field on a
beam of length L, damped through an instantaneous channel mu1(t)*v_t and a
delayed channel mu2(t)*v_t(x, t - tau(t)).  Stability of that system rests on
a handful of scalar conditions relating the delay schedule tau, the damping
schedules mu1/mu2, and the weight xi_bar used by the energy inner product.
This module holds those schedules together with *certified* constants
(envelope bounds valid for all t >= 0, derived in closed form per schedule
kind) and the routine that checks every admissibility condition against both
a dense time sampling and the schedules' analytic extrema.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "PhysicalParams",
    "DelaySpec",
    "Mu1Schedule",
    "Mu2Schedule",
    "DampingSpec",
    "StabilityConstants",
    "BeamModel",
    "AdmissibilityCondition",
    "AdmissibilityReport",
    "constant_delay",
    "sinusoidal_delay",
    "affine_clamped_delay",
    "constant_mu1",
    "offset_exp_mu1",
    "constant_mu2",
    "proportional_mu2",
    "sinusoidal_mu2",
    "xi_window",
    "kappa",
    "validate_admissibility",
]


@dataclass(frozen=True)
class PhysicalParams:
    """Constant material parameters.

    Parameters
    ----------
    rho, mu : float
        Densities multiplying the two acceleration terms.
    alpha1, beta, gamma : float
        Stiffness/coupling constants.  The elastic stiffness appearing in the
        displacement equation is the combination ``alpha = alpha1 + gamma**2 * beta``,
        which keeps the energy form diagonal in the variables (v_x, gamma*v_x - p_x).
    length : float
        Beam length L.
    """

    rho: float
    alpha1: float
    gamma: float
    beta: float
    mu: float
    length: float

    def __post_init__(self) -> None:
        for name in ("rho", "alpha1", "gamma", "beta", "mu", "length"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def alpha(self) -> float:
        return self.alpha1 + self.gamma**2 * self.beta


@dataclass(frozen=True)
class DelaySpec:
    """A delay schedule tau(t) with certified envelope constants.

    ``tau0 <= tau(t) <= tau1``, ``dtau_lo <= tau'(t) <= d`` and
    ``|tau''| <= ddtau_abs`` hold for all t >= 0 by construction of the
    schedule kind, not by sampling.  ``extrema_times(horizon)`` returns the
    analytic extrema of tau and tau' inside [0, horizon] so validation can
    check the worst points exactly in addition to a dense grid.
    """

    kind: str
    params: dict
    tau: Callable
    dtau: Callable
    ddtau: Callable
    tau0: float
    tau1: float
    d: float
    dtau_lo: float
    ddtau_abs: float
    extrema_times: Callable


@dataclass(frozen=True)
class Mu1Schedule:
    """Instantaneous damping gain mu1(t) with certified bounds.

    ``inf`` is a global lower bound on mu1 and ``ratio_sup`` a global upper
    bound on |mu1'(t)| / mu1(t).
    """

    kind: str
    params: dict
    value: Callable
    derivative: Callable
    inf: float
    ratio_sup: float
    extrema_times: Callable


@dataclass(frozen=True)
class Mu2Schedule:
    """Delayed damping gain mu2(t); may take either sign."""

    kind: str
    params: dict
    value: Callable
    derivative: Callable
    extrema_times: Callable


@dataclass(frozen=True)
class DampingSpec:
    """Damping pair (mu1, mu2) plus the user-certified bounds M1, M2, delta.

    The bounds assert |mu1'/mu1| <= M1, |mu2'| <= M2*mu1 and |mu2| <= delta*mu1;
    they are checked by :func:`validate_admissibility` and used nowhere else in
    the integrator kernels.
    """

    mu1_schedule: Mu1Schedule
    mu2_schedule: Mu2Schedule
    M1: float
    M2: float
    delta: float

    @property
    def mu1(self) -> Callable:
        return self.mu1_schedule.value

    @property
    def dmu1(self) -> Callable:
        return self.mu1_schedule.derivative

    @property
    def mu2(self) -> Callable:
        return self.mu2_schedule.value

    @property
    def dmu2(self) -> Callable:
        return self.mu2_schedule.derivative


@dataclass(frozen=True)
class StabilityConstants:
    """Scalar constants entering the dissipation bound.

    ``c1 = 1 - xi_bar/2 - delta/(2*sqrt(1-d))`` multiplies the instantaneous
    dissipation and ``c2(s) = xi_bar*(1-s)/2 - delta*sqrt(1-d)/2`` (with s the
    current delay slope) the delayed one; both must be positive for the energy
    estimate to close.
    """

    xi_bar: float
    delta: float
    d: float

    def __post_init__(self) -> None:
        if self.d >= 1.0:
            raise ValueError("delay slope bound d must satisfy d < 1")
        if self.delta < 0.0:
            raise ValueError("delta must be nonnegative")

    def c1(self) -> float:
        return 1.0 - self.xi_bar / 2.0 - self.delta / (2.0 * math.sqrt(1.0 - self.d))

    def c2(self, dtau_value: float) -> float:
        return self.xi_bar * (1.0 - dtau_value) / 2.0 - self.delta * math.sqrt(1.0 - self.d) / 2.0

    def c2_min(self) -> float:
        # tau' <= d, and c2 is decreasing in the slope
        return self.c2(self.d)


@dataclass(frozen=True)
class BeamModel:
    """Full model: material constants, delay and damping schedules, weight."""

    params: PhysicalParams
    delay: DelaySpec
    damping: DampingSpec
    xi_bar: float

    def xi(self, t):
        """Time-dependent weight xi(t) = xi_bar * mu1(t) of the delay norm."""
        return self.xi_bar * self.damping.mu1(t)

    @property
    def stability(self) -> StabilityConstants:
        return StabilityConstants(xi_bar=self.xi_bar, delta=self.damping.delta, d=self.delay.d)

    @property
    def speed_max(self) -> float:
        """Certified sup of the transport speed (1 - tau'(t)*y)/tau(t).

        The speed is largest when tau' is most negative and tau smallest, so
        the certified envelope gives (1 + max(0, -dtau_lo)) / tau0.
        """
        return (1.0 + max(0.0, -self.delay.dtau_lo)) / self.delay.tau0


# --- schedule factories -------------------------------------------------------


def _const_fn(c: float) -> Callable:
    def f(t):
        return c + 0.0 * np.asarray(t, dtype=float)

    return f


def constant_delay(value: float) -> DelaySpec:
    # nonpositive values construct so that validate_admissibility can reject
    # them through the delay-bounds condition; kernels assume tau > 0
    return DelaySpec(
        kind="constant",
        params={"value": value},
        tau=_const_fn(value),
        dtau=_const_fn(0.0),
        ddtau=_const_fn(0.0),
        tau0=value,
        tau1=value,
        d=0.0,
        dtau_lo=0.0,
        ddtau_abs=0.0,
        extrema_times=lambda horizon: np.empty(0),
    )


def sinusoidal_delay(center: float, amplitude: float, omega: float) -> DelaySpec:
    """tau(t) = center + amplitude*sin(omega*t); envelope bounds are exact."""
    a = abs(amplitude)

    def tau(t):
        return center + amplitude * np.sin(omega * np.asarray(t, dtype=float))

    def dtau(t):
        return amplitude * omega * np.cos(omega * np.asarray(t, dtype=float))

    def ddtau(t):
        return -amplitude * omega**2 * np.sin(omega * np.asarray(t, dtype=float))

    def extrema(horizon: float) -> np.ndarray:
        if omega == 0.0:
            return np.empty(0)
        # tau extrema at omega*t = pi/2 + k*pi, slope extrema at omega*t = k*pi
        quarter = math.pi / (2.0 * abs(omega))
        pts = np.arange(0.0, horizon + quarter, quarter)
        return pts[pts <= horizon]

    return DelaySpec(
        kind="sinusoidal",
        params={"center": center, "amplitude": amplitude, "omega": omega},
        tau=tau,
        dtau=dtau,
        ddtau=ddtau,
        tau0=center - a,
        tau1=center + a,
        d=a * abs(omega),
        dtau_lo=-a * abs(omega),
        ddtau_abs=a * omega**2,
        extrema_times=extrema,
    )


def affine_clamped_delay(start: float, slope: float, lower: float, upper: float) -> DelaySpec:
    """tau(t) = clip(start + slope*t, lower, upper).

    The clamp corner is a kink, so the second derivative is certified in the
    almost-everywhere sense (zero away from the corner).
    """
    if lower > upper:
        raise ValueError("lower clamp above upper clamp")

    def clip(v):
        return np.clip(v, lower, upper)

    def tau(t):
        return clip(start + slope * np.asarray(t, dtype=float))

    def dtau(t):
        t = np.asarray(t, dtype=float)
        raw = start + slope * t
        inside = (raw > lower) & (raw < upper)
        return np.where(inside, slope, 0.0)

    start_clipped = float(np.clip(start, lower, upper))
    if slope >= 0.0:
        tau_min, tau_max = start_clipped, max(start_clipped, upper if slope > 0 else start_clipped)
    else:
        tau_min, tau_max = lower, start_clipped

    def extrema(horizon: float) -> np.ndarray:
        pts = []
        if slope != 0.0:
            for bound in (lower, upper):
                tc = (bound - start) / slope
                if 0.0 < tc <= horizon:
                    pts.append(tc)
        return np.asarray(pts)

    return DelaySpec(
        kind="affine-clamped",
        params={"start": start, "slope": slope, "lower": lower, "upper": upper},
        tau=tau,
        dtau=dtau,
        ddtau=_const_fn(0.0),
        tau0=tau_min,
        tau1=tau_max,
        d=max(slope, 0.0),
        dtau_lo=min(slope, 0.0),
        ddtau_abs=0.0,
        extrema_times=extrema,
    )


def constant_mu1(value: float) -> Mu1Schedule:
    return Mu1Schedule(
        kind="constant",
        params={"value": value},
        value=_const_fn(value),
        derivative=_const_fn(0.0),
        inf=value,
        ratio_sup=0.0,
        extrema_times=lambda horizon: np.empty(0),
    )


def offset_exp_mu1(offset: float, amp: float, rate: float) -> Mu1Schedule:
    """mu1(t) = offset + amp*exp(-rate*t): positive and non-increasing for amp >= 0.

    |mu1'/mu1| = amp*rate / (offset*exp(rate*t) + amp) is largest at t=0,
    giving the certified ratio bound |amp|*rate/(offset+amp).  A negative amp
    constructs an increasing schedule; validate_admissibility rejects it
    through the monotonicity condition rather than here.
    """
    if offset < 0.0 or rate < 0.0:
        raise ValueError("offset_exp_mu1 needs nonnegative offset and rate")
    if offset == 0.0 and amp == 0.0:
        raise ValueError("mu1 schedule is identically zero")

    def value(t):
        return offset + amp * np.exp(-rate * np.asarray(t, dtype=float))

    def derivative(t):
        return -amp * rate * np.exp(-rate * np.asarray(t, dtype=float))

    # for either sign of amp the ratio decays in t, so the sup sits at t=0
    ratio_sup = abs(amp) * rate / (offset + amp) if (offset + amp) > 0.0 else math.inf
    return Mu1Schedule(
        kind="offset_exp",
        params={"offset": offset, "amp": amp, "rate": rate},
        value=value,
        derivative=derivative,
        inf=min(offset, offset + amp),
        ratio_sup=ratio_sup,
        extrema_times=lambda horizon: np.asarray([0.0]),
    )


def constant_mu2(value: float) -> Mu2Schedule:
    return Mu2Schedule(
        kind="constant",
        params={"value": value},
        value=_const_fn(value),
        derivative=_const_fn(0.0),
        extrema_times=lambda horizon: np.empty(0),
    )


def proportional_mu2(factor: float, mu1: Mu1Schedule) -> Mu2Schedule:
    """mu2(t) = factor * mu1(t): the ratio |mu2|/mu1 is constant |factor|."""

    def value(t):
        return factor * np.asarray(mu1.value(t), dtype=float)

    def derivative(t):
        return factor * np.asarray(mu1.derivative(t), dtype=float)

    return Mu2Schedule(
        kind="proportional",
        params={"factor": factor},
        value=value,
        derivative=derivative,
        extrema_times=mu1.extrema_times,
    )


def sinusoidal_mu2(amp: float, omega: float, offset: float = 0.0) -> Mu2Schedule:
    def value(t):
        return offset + amp * np.sin(omega * np.asarray(t, dtype=float))

    def derivative(t):
        return amp * omega * np.cos(omega * np.asarray(t, dtype=float))

    def extrema(horizon: float) -> np.ndarray:
        if omega == 0.0:
            return np.empty(0)
        quarter = math.pi / (2.0 * abs(omega))
        pts = np.arange(0.0, horizon + quarter, quarter)
        return pts[pts <= horizon]

    return Mu2Schedule(
        kind="sinusoidal",
        params={"amp": amp, "omega": omega, "offset": offset},
        value=value,
        derivative=derivative,
        extrema_times=extrema,
    )


# --- scalar conditions --------------------------------------------------------


def xi_window(delta: float, d: float) -> tuple[float, float]:
    """Open interval of admissible weights xi_bar for given (delta, d).

    The window is (delta/sqrt(1-d), 2 - delta/sqrt(1-d)); it is nonempty and
    centred at 1 exactly when 0 <= delta < sqrt(1-d) and d < 1.

    Raises
    ------
    ValueError
        If d >= 1, delta < 0, or delta >= sqrt(1-d) (empty window).
    """
    if d >= 1.0:
        raise ValueError("delay slope bound d must satisfy d < 1")
    if delta < 0.0:
        raise ValueError("delta must be nonnegative")
    root = math.sqrt(1.0 - d)
    if delta >= root:
        raise ValueError(f"delta={delta} >= sqrt(1-d)={root}: admissible window is empty")
    lo = delta / root
    return lo, 2.0 - lo


def kappa(t, delay: DelaySpec):
    """Contractivity offset kappa(t) = sqrt(1 + tau'(t)^2) / (2*tau(t))."""
    tau = np.asarray(delay.tau(t), dtype=float)
    if np.any(tau <= 0.0):
        raise ValueError("kappa undefined: delay must be positive")
    dtau = np.asarray(delay.dtau(t), dtype=float)
    return np.sqrt(1.0 + dtau**2) / (2.0 * tau)


# --- admissibility report -----------------------------------------------------


@dataclass(frozen=True)
class AdmissibilityCondition:
    """One checked condition: its slack margin and the worst sample point."""

    name: str
    passed: bool
    margin: float
    worst_t: float
    detail: str


@dataclass(frozen=True)
class AdmissibilityReport:
    conditions: Sequence[AdmissibilityCondition] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def condition(self, name: str) -> AdmissibilityCondition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_text(self) -> str:
        lines = []
        for c in self.conditions:
            status = "PASS" if c.passed else "FAIL"
            lines.append(
                f"{status} {c.name}: margin={c.margin:.6g} worst_t={c.worst_t:.6g} ({c.detail})"
            )
        verdict = "admissible" if self.passed else "not admissible"
        lines.append(f"overall: {verdict}")
        return "\n".join(lines)


_TOL = 1e-12


def validate_admissibility(model: BeamModel, horizon: float, samples: int = 1024) -> AdmissibilityReport:
    """Check every admissibility condition on [0, horizon].

    Each condition is evaluated on a dense uniform sampling plus the analytic
    extrema of the schedules, and reported with its minimum slack (margin) and
    the sample time where that minimum occurs.  A schedule that raises during
    evaluation marks its conditions as failed with an "unevaluable" detail.

    Conditions, in order: delay regularity (tau'' bounded), delay bounds
    (0 < tau0 <= tau <= tau1), delay slope (tau' <= d < 1), damping positivity
    and monotonicity (mu1 > 0, mu1' <= 0), damping log-slope (|mu1'/mu1| <= M1),
    delayed ratio (|mu2| <= delta*mu1), delayed slope (|mu2'| <= M2*mu1),
    ratio/slope margin (0 <= delta < sqrt(1-d)), weight window (xi_bar inside
    the open admissible window), and positivity of the dissipation
    coefficients c1 and c2(t).
    """
    delay, damping = model.delay, model.damping

    base = np.linspace(0.0, horizon, samples)

    def grid_with(extra_fn) -> np.ndarray:
        try:
            extra = np.asarray(extra_fn(horizon), dtype=float)
        except Exception:
            extra = np.empty(0)
        ts = np.concatenate([base, extra[(extra >= 0.0) & (extra <= horizon)]])
        return np.unique(ts)

    conditions: list[AdmissibilityCondition] = []

    def check(name: str, fn) -> None:
        try:
            passed, margin, worst_t, detail = fn()
        except Exception as exc:  # unevaluable schedule
            conditions.append(
                AdmissibilityCondition(name, False, float("nan"), float("nan"), f"unevaluable: {exc}")
            )
            return
        conditions.append(AdmissibilityCondition(name, bool(passed), float(margin), float(worst_t), detail))

    t_delay = grid_with(delay.extrema_times)
    t_mu = grid_with(damping.mu1_schedule.extrema_times)
    t_mu2 = grid_with(damping.mu2_schedule.extrema_times)

    def delay_regularity():
        vals = np.abs(np.asarray(delay.ddtau(t_delay), dtype=float))
        sup = max(float(np.max(vals)), delay.ddtau_abs)
        ok = math.isfinite(sup)
        worst = float(t_delay[int(np.argmax(vals))])
        return ok, sup if ok else float("nan"), worst, f"sup|tau''|={sup:.6g}"

    def delay_bounds():
        tau = np.asarray(delay.tau(t_delay), dtype=float)
        slack = np.minimum(tau - delay.tau0, delay.tau1 - tau)
        i = int(np.argmin(slack))
        margin = min(float(slack[i]), delay.tau0)
        ok = delay.tau0 > 0.0 and float(slack[i]) >= -_TOL
        return ok, margin, float(t_delay[i]), f"tau0={delay.tau0:.6g} tau1={delay.tau1:.6g}"

    def delay_slope():
        dtau = np.asarray(delay.dtau(t_delay), dtype=float)
        slack = delay.d - dtau
        i = int(np.argmin(slack))
        margin = min(float(slack[i]), 1.0 - delay.d)
        ok = delay.d < 1.0 and float(slack[i]) >= -_TOL
        return ok, margin, float(t_delay[i]), f"d={delay.d:.6g}"

    def damping_positive_decreasing():
        mu1 = np.asarray(damping.mu1(t_mu), dtype=float)
        dmu1 = np.asarray(damping.dmu1(t_mu), dtype=float)
        i_pos = int(np.argmin(mu1))
        i_mon = int(np.argmax(dmu1))
        ok = float(mu1[i_pos]) > 0.0 and float(dmu1[i_mon]) <= _TOL
        margin = min(float(mu1[i_pos]), -float(dmu1[i_mon]))
        worst = float(t_mu[i_pos if mu1[i_pos] <= -dmu1[i_mon] else i_mon])
        return ok, margin, worst, f"min mu1={mu1[i_pos]:.6g} max mu1'={dmu1[i_mon]:.6g}"

    def damping_log_slope():
        mu1 = np.asarray(damping.mu1(t_mu), dtype=float)
        dmu1 = np.asarray(damping.dmu1(t_mu), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.abs(dmu1) / mu1
        slack = damping.M1 - ratio
        i = int(np.argmin(slack))
        ok = float(slack[i]) >= -_TOL
        return ok, float(slack[i]), float(t_mu[i]), f"sup|mu1'/mu1|={ratio[i]:.6g} M1={damping.M1:.6g}"

    def delayed_ratio():
        mu1 = np.asarray(damping.mu1(t_mu2), dtype=float)
        mu2 = np.asarray(damping.mu2(t_mu2), dtype=float)
        slack = damping.delta * mu1 - np.abs(mu2)
        i = int(np.argmin(slack))
        ok = float(slack[i]) >= -_TOL
        return ok, float(slack[i]), float(t_mu2[i]), f"delta={damping.delta:.6g}"

    def delayed_slope():
        mu1 = np.asarray(damping.mu1(t_mu2), dtype=float)
        dmu2 = np.asarray(damping.dmu2(t_mu2), dtype=float)
        slack = damping.M2 * mu1 - np.abs(dmu2)
        i = int(np.argmin(slack))
        ok = float(slack[i]) >= -_TOL
        return ok, float(slack[i]), float(t_mu2[i]), f"M2={damping.M2:.6g}"

    def ratio_slope_margin():
        if delay.d >= 1.0:
            return False, 1.0 - delay.d, 0.0, "d >= 1"
        root = math.sqrt(1.0 - delay.d)
        slack = root - damping.delta
        ok = damping.delta >= 0.0 and slack > 0.0
        return ok, slack, 0.0, f"sqrt(1-d)={root:.6g} delta={damping.delta:.6g}"

    def weight_window():
        lo, hi = xi_window(damping.delta, delay.d)
        slack = min(model.xi_bar - lo, hi - model.xi_bar)
        return slack > 0.0, slack, 0.0, f"window=({lo:.6g}, {hi:.6g}) xi_bar={model.xi_bar:.6g}"

    def dissipation_coefficients():
        st = model.stability
        c1 = st.c1()
        dtau = np.asarray(delay.dtau(t_delay), dtype=float)
        c2 = st.xi_bar * (1.0 - dtau) / 2.0 - st.delta * math.sqrt(1.0 - st.d) / 2.0
        i = int(np.argmin(c2))
        margin = min(c1, float(c2[i]))
        ok = c1 > 0.0 and float(c2[i]) > 0.0
        return ok, margin, float(t_delay[i]), f"c1={c1:.6g} min c2={c2[i]:.6g}"

    check("delay_regularity", delay_regularity)
    check("delay_bounds", delay_bounds)
    check("delay_slope", delay_slope)
    check("damping_positive_decreasing", damping_positive_decreasing)
    check("damping_log_slope", damping_log_slope)
    check("delayed_ratio", delayed_ratio)
    check("delayed_slope", delayed_slope)
    check("ratio_slope_margin", ratio_slope_margin)
    check("weight_window", weight_window)
    check("dissipation_coefficients", dissipation_coefficients)

    return AdmissibilityReport(conditions=tuple(conditions))
