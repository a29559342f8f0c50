"""Trajectory analysis: decay-rate fits, refinement studies, report artifacts.

Turns recorded traces into quantitative verdicts.  The decay fit is an
ordinary least-squares line on log energy; the refinement study re-runs a
configuration at halved resolutions and reports how the delay-channel error,
the energy-inequality residual, and the fitted decay rate move; report
emission writes the diffable text artifacts (CSV trace, flat key-value
summary, plot script) that acceptance checks consume.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .functionals import LyapunovWeights, centered_difference, j_inequality_residual
from .model import AdmissibilityReport
from .timestepper import Trace, history_oracle_velocity

# refuse refinement levels beyond this many grid points (memory guard)
_MAX_POINTS = 2_000_000


@dataclass(frozen=True)
class DecayFit:
    """Least-squares exponential fit E(t) ~ E(0) * M_fit * exp(-lambda_fit t).

    Parameters
    ----------
    lambda_fit : float
        Fitted decay rate (1/time); NaN when the energy is identically zero.
    M_fit : float
        Fitted prefactor relative to the initial energy.
    r_squared : float
        Coefficient of determination of the line on (t, log E), in [0, 1].
    window : tuple of float
        Time window (t_lo, t_hi) the fit used.
    """

    lambda_fit: float
    M_fit: float
    r_squared: float
    window: tuple


def fit_decay(trace, window=None) -> DecayFit:
    """Fit a decaying exponential to the recorded energy of a trace.

    Parameters
    ----------
    trace : object
        Anything with ``t`` and ``E`` arrays (a :class:`~piezobeam.timestepper.Trace`
        or an equivalent lightweight record).
    window : tuple of float, optional
        Fit window (t_lo, t_hi); defaults to the last seven eighths of the
        trace so the startup transient, where the delay history fills, is
        skipped.

    Returns
    -------
    DecayFit
        Fit parameters; ``lambda_fit`` is NaN (with ``r_squared`` 0) when the
        window contains no energy above the floor 1e3 * eps * E(0).

    Raises
    ------
    ValueError
        If the window is degenerate or holds fewer than 10 usable samples.
    """
    t = np.asarray(trace.t, dtype=float)
    E = np.asarray(trace.E, dtype=float)
    if window is None:
        window = (t[-1] / 8.0, t[-1])
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo:
        raise ValueError("decay fit window is degenerate")

    E0 = float(E[0])
    floor = 1e3 * np.finfo(float).eps * E0
    in_window = (t >= lo) & (t <= hi)
    if not np.any(in_window):
        raise ValueError("decay fit window contains no samples")
    usable = in_window & (E > max(floor, 0.0))
    n = int(np.count_nonzero(usable))
    if n == 0:
        # identically (numerically) zero energy: rate undefined
        return DecayFit(lambda_fit=math.nan, M_fit=math.nan, r_squared=0.0, window=(lo, hi))
    if n < 10:
        raise ValueError(f"decay fit window holds only {n} samples with positive energy; need 10")

    tt = t[usable]
    ln_e = np.log(E[usable])
    slope, intercept = np.polyfit(tt, ln_e, 1)
    pred = slope * tt + intercept
    ss_res = float(np.sum((ln_e - pred) ** 2))
    ss_tot = float(np.sum((ln_e - np.mean(ln_e)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return DecayFit(
        lambda_fit=float(-slope),
        M_fit=float(np.exp(intercept)) / E0,
        r_squared=float(min(max(r2, 0.0), 1.0)),
        window=(lo, hi),
    )


def delay_channel_error(trace: Trace, t_lo: float) -> float:
    """Sup-norm mismatch between the transported delay surface and the oracle.

    Compares ``z`` at full delay depth against direct interpolation of the
    recorded velocity history at the delayed times, over all records with
    ``t >= t_lo``.
    """
    worst = 0.0
    for k, t in enumerate(trace.t):
        if t < t_lo:
            continue
        oracle = history_oracle_velocity(trace, float(t))
        worst = max(worst, float(np.max(np.abs(trace.z_top[k] - oracle))))
    return worst


@dataclass(frozen=True)
class RefinementLevel:
    """One row of a refinement study."""

    nx: int
    ny: int
    dt: float
    delay_error: float
    energy_residual: float
    lambda_fit: float


@dataclass(frozen=True)
class RefinementTable:
    """Per-level measurements plus the observed inter-level behavior."""

    rows: tuple

    def delay_orders(self):
        """Observed convergence order of the delay-channel mismatch per halving."""
        errs = [r.delay_error for r in self.rows]
        return [float(np.log2(a / b)) if b > 0 and a > 0 else math.nan for a, b in zip(errs, errs[1:])]

    def residual_orders(self):
        """Observed order of |energy residual| per halving (NaN when at roundoff)."""
        vals = [abs(r.energy_residual) for r in self.rows]
        return [
            float(np.log2(a / b)) if b > 1e3 * np.finfo(float).eps and a > 0 else math.nan
            for a, b in zip(vals, vals[1:])
        ]

    def lambda_drifts(self):
        """Relative change of the fitted rate between successive levels."""
        lams = [r.lambda_fit for r in self.rows]
        return [abs(a - b) / abs(b) for a, b in zip(lams, lams[1:])]

    def as_text(self) -> str:
        lines = ["nx    ny    dt            delay_error   energy_residual  lambda_fit"]
        for r in self.rows:
            lines.append(
                f"{r.nx:<5d} {r.ny:<5d} {r.dt:<13.6g} {r.delay_error:<13.6g} "
                f"{r.energy_residual:<16.6g} {r.lambda_fit:.8g}"
            )
        lines.append("delay orders:  " + "  ".join(f"{v:.3f}" for v in self.delay_orders()))
        lines.append("lambda drifts: " + "  ".join(f"{v:.3e}" for v in self.lambda_drifts()))
        return "\n".join(lines) + "\n"


def refinement_study(config, levels: int) -> RefinementTable:
    """Re-run a configuration at successively halved (hx, hy, dt).

    Parameters
    ----------
    config : RunConfig
        Base run description; level 0 runs it as-is.
    levels : int
        Number of levels, at least 3.

    Returns
    -------
    RefinementTable
        One row per level with the delay-channel sup error (audited past one
        full delay), the worst energy-inequality residual, and the fitted
        decay rate.
    """
    # imported here: config builds on the solver modules, not the reverse
    from .config import RunConfig  # noqa: F401  (type of `config`)
    from .discretization import Grid
    from .timestepper import SchemeConfig, initialize, run

    if levels < 3:
        raise ValueError("refinement study needs at least 3 levels")

    base_grid = config.grid
    jobs = []
    for k in range(levels):
        nx = (base_grid.nx - 1) * 2**k + 1
        ny = (base_grid.ny - 1) * 2**k + 1
        if nx * ny > _MAX_POINTS:
            raise ValueError(f"refinement level {k} needs {nx * ny} grid points; guard is {_MAX_POINTS}")
        grid = Grid(nx=nx, ny=ny, length=base_grid.length)
        scheme = SchemeConfig(
            dt=config.scheme.dt / 2**k,
            t_end=config.scheme.t_end,
            scheme=config.scheme.scheme,
            record_every=config.scheme.record_every * 2**k,
        )
        jobs.append((grid, scheme))

    def run_level(job):
        grid, scheme = job
        state = initialize(config.model, grid, config.initial)
        trace = run(config.model, grid, state, scheme)
        dEdt = centered_difference(trace.t, trace.E)
        resid = dEdt - trace.dE_bound
        fit = fit_decay(trace)
        return RefinementLevel(
            nx=grid.nx,
            ny=grid.ny,
            dt=scheme.dt,
            delay_error=delay_channel_error(trace, config.model.delay.tau1),
            energy_residual=float(np.nanmax(resid)),
            lambda_fit=fit.lambda_fit,
        )

    with ThreadPoolExecutor(max_workers=levels) as pool:
        rows = tuple(pool.map(run_level, jobs))
    return RefinementTable(rows=rows)


# --- report artifacts ---------------------------------------------------------

CSV_COLUMNS = ("t", "E", "dEdt_fd", "dE_bound", "I1", "I2", "I3", "J", "Lyap", "diss_residual", "j_residual")

REPORT_KEYS = (
    "admissible",
    "C1",
    "C2_min",
    "max_energy_residual",
    "max_j_residual",
    "max_diss_residual",
    "gamma1",
    "gamma2",
    "lambda_fit",
    "M_fit",
    "r_squared",
)


def trace_columns(trace: Trace, weights: LyapunovWeights) -> dict:
    """Assemble the named CSV columns from a recorded trace."""
    dEdt = centered_difference(trace.t, trace.E)
    j_res = j_inequality_residual(trace.t, trace.J, trace.int_u2, trace.int_z1sq, trace.model)
    lyap = weights.combine(trace.E, trace.I1, trace.I2, trace.I3, trace.J)
    return {
        "t": trace.t,
        "E": trace.E,
        "dEdt_fd": dEdt,
        "dE_bound": trace.dE_bound,
        "I1": trace.I1,
        "I2": trace.I2,
        "I3": trace.I3,
        "J": trace.J,
        "Lyap": lyap,
        "diss_residual": trace.diss_residual,
        "j_residual": j_res,
    }


def report_values(
    trace: Trace,
    admissibility: AdmissibilityReport,
    weights: LyapunovWeights,
    gamma1: float,
    gamma2: float,
    fit: DecayFit,
) -> dict:
    """Assemble the flat report mapping (fixed key order, scalar values)."""
    cols = trace_columns(trace, weights)
    stability = trace.model.stability
    return {
        "admissible": admissibility.passed,
        "C1": stability.c1(),
        "C2_min": stability.c2_min(),
        "max_energy_residual": float(np.nanmax(cols["dEdt_fd"] - cols["dE_bound"])),
        "max_j_residual": float(np.nanmax(cols["j_residual"])),
        "max_diss_residual": float(np.max(cols["diss_residual"])),
        "gamma1": gamma1,
        "gamma2": gamma2,
        "lambda_fit": fit.lambda_fit,
        "M_fit": fit.M_fit,
        "r_squared": fit.r_squared,
    }


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    return repr(float(value))


def emit_report(
    out_dir,
    trace: Trace,
    admissibility: AdmissibilityReport,
    weights: LyapunovWeights,
    gamma1: float,
    gamma2: float,
    fit: DecayFit,
) -> dict:
    """Write the trace CSV, flat report, and plot script into ``out_dir``.

    All three artifacts are plain text with stable formatting: identical
    inputs produce byte-identical files.

    Returns
    -------
    dict
        Paths of the written files keyed by ``csv``, ``report``, ``plot``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    cols = trace_columns(trace, weights)
    csv_path = out / "trace.csv"
    with open(csv_path, "w", newline="") as f:
        f.write(",".join(CSV_COLUMNS) + "\n")
        for i in range(len(trace.t)):
            f.write(",".join(_fmt(cols[name][i]) for name in CSV_COLUMNS) + "\n")

    values = report_values(trace, admissibility, weights, gamma1, gamma2, fit)
    report_path = out / "report.txt"
    with open(report_path, "w", newline="") as f:
        for key in REPORT_KEYS:
            f.write(f"{key} = {_fmt(values[key])}\n")

    plot_path = out / "plot_trace.py"
    with open(plot_path, "w", newline="") as f:
        f.write(_PLOT_SCRIPT)

    return {"csv": csv_path, "report": report_path, "plot": plot_path}


_PLOT_SCRIPT = '''"""Plot the recorded trace from trace.csv (same directory)."""
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
with open(here / "trace.csv", newline="") as f:
    reader = csv.DictReader(f)
    rows = list(reader)

def col(name):
    return [float(r[name]) for r in rows]

t = col("t")
fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 8), sharex=True)
ax1.semilogy(t, col("E"), label="E")
ax1.semilogy(t, col("Lyap"), label="Lyapunov")
ax1.set_ylabel("energy scale")
ax1.legend()
ax2.plot(t, col("dEdt_fd"), label="dE/dt (fd)")
ax2.plot(t, col("dE_bound"), label="dissipation bound")
ax2.plot(t, col("j_residual"), label="J residual")
ax2.set_xlabel("t")
ax2.legend()
fig.tight_layout()
fig.savefig(here / "trace.png", dpi=150)
print("wrote", here / "trace.png")
'''
