"""Command-line entry point.

Subcommands: ``validate`` (admissibility report), ``simulate`` (trace CSV,
flat report, plot script), ``check`` (the full verification battery at the
config's scale), ``sweep`` (parameter sweep over a worker pool), ``refine``
(refinement study).  Exit codes: 0 success, 2 configuration error, 3
admissibility failure, 4 check failure.
"""
from __future__ import annotations

import argparse
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .analysis import (
    DecayFit,
    delay_channel_error,
    emit_report,
    fit_decay,
    refinement_study,
)
from .config import ConfigError, RunConfig, load_config
from .discretization import (
    Grid,
    dissipativity_residual,
    random_state,
    reduced_dense_generator,
)
from .functionals import (
    calibrate_weights,
    centered_difference,
    j_inequality_residual,
    sample_functionals,
    tolerance_energy,
    tolerance_generator,
)
from .model import (
    BeamModel,
    DampingSpec,
    constant_mu1,
    constant_mu2,
    validate_admissibility,
)
from .timestepper import (
    BeamState,
    SchemeConfig,
    initialize,
    run,
    run_transport_only,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INADMISSIBLE = 3
EXIT_CHECK = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="piezobeam",
        description="Simulate a delayed-damping piezoelectric beam and verify its decay properties.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--out", default=None, help="output directory (overrides config and PIEZOBEAM_OUT)")
        p.add_argument("--seed", type=int, default=None, help="probe-randomization seed override")

    common(sub.add_parser("validate", help="check the admissibility conditions and print the report"))
    common(sub.add_parser("simulate", help="run the configured trajectory and write trace artifacts"))
    common(sub.add_parser("check", help="run every verification check at the configured scale"))

    p_sweep = sub.add_parser("sweep", help="re-run the config over a list of values for one parameter")
    common(p_sweep)
    p_sweep.add_argument("--axis", required=True, help="dotted config path to vary, e.g. model.delta")
    p_sweep.add_argument("--values", required=True, help="comma-separated numeric values")

    p_refine = sub.add_parser("refine", help="run the config at successively halved resolutions")
    common(p_refine)
    p_refine.add_argument("--levels", type=int, default=3, help="number of refinement levels")

    return parser


def entry(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    out_dir = Path(args.out or os.environ.get("PIEZOBEAM_OUT") or cfg.out_dir)

    try:
        if args.command == "validate":
            return cmd_validate(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg, out_dir)
        if args.command == "check":
            return cmd_check(cfg)
        if args.command == "sweep":
            try:
                values = [float(v) for v in args.values.split(",") if v.strip()]
            except ValueError:
                print(f"sweep values must be numbers: {args.values!r}", file=sys.stderr)
                return EXIT_CONFIG
            if not values:
                print("sweep needs at least one value", file=sys.stderr)
                return EXIT_CONFIG
            return cmd_sweep(args.config, cfg, args.axis, values, out_dir)
        return cmd_refine(cfg, args.levels, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def cmd_validate(cfg: RunConfig) -> int:
    report = validate_admissibility(cfg.model, horizon=cfg.scheme.t_end)
    print(report.as_text().rstrip("\n"))
    if report.passed:
        return EXIT_OK
    first = next(c for c in report.conditions if not c.passed)
    print(f"not admissible: {first.name}")
    return EXIT_INADMISSIBLE


def _simulate_artifacts(cfg: RunConfig, out_dir) -> dict:
    """Shared simulate pipeline: run, calibrate, fit, emit."""
    state = initialize(cfg.model, cfg.grid, cfg.initial)
    trace = run(cfg.model, cfg.grid, state, cfg.scheme)
    weights, gamma1, gamma2 = calibrate_weights(
        cfg.model, cfg.grid, rng=np.random.default_rng(cfg.seed)
    )
    admissibility = validate_admissibility(cfg.model, horizon=cfg.scheme.t_end)
    try:
        fit = fit_decay(trace)
    except ValueError:
        # short runs cannot support a fit; emit the flag values instead
        fit = DecayFit(float("nan"), float("nan"), 0.0, (0.0, cfg.scheme.t_end))
    return emit_report(out_dir, trace, admissibility, weights, gamma1, gamma2, fit)


def cmd_simulate(cfg: RunConfig, out_dir) -> int:
    report = validate_admissibility(cfg.model, horizon=cfg.scheme.t_end)
    if not report.passed:
        first = next(c for c in report.conditions if not c.passed)
        print(f"not admissible: {first.name}", file=sys.stderr)
        return EXIT_INADMISSIBLE
    paths = _simulate_artifacts(cfg, out_dir)
    for key in ("csv", "report", "plot"):
        print(f"wrote {paths[key]}")
    return EXIT_OK


# --- sweep --------------------------------------------------------------------


def _sweep_worker(config_path: str, axis: str, value: float, out_dir: str, seed: int):
    """One sweep point, self-contained so a process pool can own it."""
    cfg = load_config(config_path).with_overrides({axis: value})
    cfg = replace(cfg, seed=seed)
    report = validate_admissibility(cfg.model, horizon=cfg.scheme.t_end)
    if not report.passed:
        first = next(c for c in report.conditions if not c.passed)
        return value, None, f"inadmissible: {first.name}"
    paths = _simulate_artifacts(cfg, out_dir)
    lines = Path(paths["report"]).read_text().splitlines()
    values = dict(line.split(" = ") for line in lines)
    return value, values, ""


def cmd_sweep(config_path, cfg: RunConfig, axis: str, values, out_dir) -> int:
    # fail fast on a bad axis before spawning workers
    cfg.with_overrides({axis: values[0]})
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [
        (str(config_path), axis, v, str(out / f"{axis.replace('.', '_')}={v:g}"), cfg.seed)
        for v in values
    ]
    with ProcessPoolExecutor(max_workers=min(len(jobs), os.cpu_count() or 1)) as pool:
        results = list(pool.map(_sweep_worker, *zip(*jobs)))

    summary = out / "sweep.csv"
    with open(summary, "w", newline="") as f:
        f.write(f"{axis},lambda_fit,M_fit,r_squared,admissible\n")
        for value, report, note in results:
            if report is None:
                f.write(f"{value!r},nan,nan,nan,false\n")
                print(f"{axis}={value:g}: {note}")
            else:
                f.write(
                    f"{value!r},{report['lambda_fit']},{report['M_fit']},"
                    f"{report['r_squared']},{report['admissible']}\n"
                )
                print(f"{axis}={value:g}: lambda_fit={report['lambda_fit']}")
    print(f"wrote {summary}")
    return EXIT_OK


def cmd_refine(cfg: RunConfig, levels: int, out_dir) -> int:
    table = refinement_study(cfg, levels)
    text = table.as_text()
    print(text, end="")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "refinement.txt").write_text(text)
    return EXIT_OK


# --- check battery ------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _check_admissibility(cfg: RunConfig) -> CheckResult:
    report = validate_admissibility(cfg.model, horizon=cfg.scheme.t_end)
    if report.passed:
        return CheckResult("admissibility", True, "all conditions hold")
    first = next(c for c in report.conditions if not c.passed)
    return CheckResult("admissibility", False, f"first failing condition: {first.name}")


def _check_dissipativity(cfg: RunConfig) -> CheckResult:
    grid, model = cfg.grid, cfg.model
    tol = tolerance_generator(grid, cfg.c_h)
    rng = np.random.default_rng(cfg.seed)
    worst = -np.inf
    for t in np.linspace(0.0, cfg.scheme.t_end, 20):
        for _ in range(100):
            state = random_state(grid, model, float(t), rng)
            worst = max(worst, dissipativity_residual(state, model, float(t), grid))
    fine = Grid(nx=2 * (grid.nx - 1) + 1, ny=2 * (grid.ny - 1) + 1, length=grid.length)
    shrink = tolerance_generator(fine, cfg.c_h) / tol
    ok = worst <= tol and shrink <= 0.5
    return CheckResult(
        "dissipativity", ok, f"max residual {worst:.3e} vs tol {tol:.3e}, tol shrink {shrink:.3f}"
    )


def _check_trajectory(cfg: RunConfig, trace) -> list:
    model, grid = cfg.model, cfg.grid
    tol_e = tolerance_energy(grid, cfg.scheme.dt, float(trace.E[0]), cfg.c_tol)
    upticks = float(np.max(np.diff(trace.E)))
    dEdt = centered_difference(trace.t, trace.E)
    resid = float(np.nanmax(dEdt - trace.dE_bound))
    ok_e = upticks <= tol_e and resid <= tol_e
    results = [
        CheckResult(
            "energy_monotone", ok_e, f"max uptick {upticks:.3e}, max bound excess {resid:.3e}, tol {tol_e:.3e}"
        )
    ]

    j_res = j_inequality_residual(trace.t, trace.J, trace.int_u2, trace.int_z1sq, model)
    j_max = float(np.nanmax(j_res))
    orders = _transport_orders(model)
    ok_j = j_max <= tol_e and all(o >= 0.8 for o in orders)
    results.append(
        CheckResult(
            "j_inequality",
            ok_j,
            f"max residual {j_max:.3e} vs tol {tol_e:.3e}, transport orders "
            + "/".join(f"{o:.2f}" for o in orders),
        )
    )
    return results


def _transport_orders(model: BeamModel) -> list:
    errs = []
    for ny in (33, 65, 129):
        grid = Grid(nx=9, ny=ny, length=1.0)
        profile = np.where(grid.y < 0.4, np.sin(np.pi * grid.y / 0.4) ** 2, 0.0)
        z0 = np.outer(np.sin(np.pi * grid.x / 2.0), profile)
        times, snaps = run_transport_only(
            model, grid, z0, inflow=lambda t: 0.0, dt=grid.hy / 8.0, t_end=0.15
        )
        js, z1s = [], []
        for t, z in zip(times, snaps):
            tau = float(model.delay.tau(t))
            weight = np.exp(-2.0 * tau * grid.y)
            js.append(model.xi_bar * tau * float(np.dot(grid.wx, (z**2 * weight) @ grid.wy)))
            z1s.append(float(np.dot(grid.wx, z[:, -1] ** 2)))
        resid = j_inequality_residual(
            np.asarray(times), np.asarray(js), np.zeros(len(times)), np.asarray(z1s), model
        )
        errs.append(float(np.nanmax(np.abs(resid))))
    return [float(np.log2(a / b)) for a, b in zip(errs, errs[1:])]


def _check_decay(cfg: RunConfig, trace) -> CheckResult:
    fit = fit_decay(trace)
    other_scheme = "explicit-rk4" if cfg.scheme.scheme == "trapezoid" else "trapezoid"
    state = initialize(cfg.model, cfg.grid, cfg.initial)
    other = run(cfg.model, cfg.grid, state, replace(cfg.scheme, scheme=other_scheme))
    fit_other = fit_decay(other)
    agreement = abs(fit.lambda_fit - fit_other.lambda_fit) / abs(fit.lambda_fit)

    coarse_grid = Grid(nx=(cfg.grid.nx - 1) // 2 + 1, ny=(cfg.grid.ny - 1) // 2 + 1, length=cfg.grid.length)
    coarse_state = initialize(cfg.model, coarse_grid, cfg.initial)
    coarse = run(
        cfg.model,
        coarse_grid,
        coarse_state,
        replace(cfg.scheme, dt=2 * cfg.scheme.dt, record_every=max(1, cfg.scheme.record_every // 2)),
    )
    drift = abs(fit.lambda_fit - fit_decay(coarse).lambda_fit) / abs(fit.lambda_fit)

    ok = fit.lambda_fit > 0 and fit.r_squared >= 0.99 and agreement <= 0.02 and drift <= 0.05
    return CheckResult(
        "decay_fit",
        ok,
        f"lambda {fit.lambda_fit:.4f}, r2 {fit.r_squared:.4f}, scheme gap "
        f"{100 * agreement:.3f}%, refinement drift {100 * drift:.3f}%",
    )


def _check_delay_channel(cfg: RunConfig, trace) -> CheckResult:
    bound = cfg.c_delay * (cfg.grid.hy + cfg.scheme.dt)
    err = delay_channel_error(trace, cfg.model.delay.tau1)

    fine_grid = Grid(nx=cfg.grid.nx, ny=2 * (cfg.grid.ny - 1) + 1, length=cfg.grid.length)
    fine_state = initialize(cfg.model, fine_grid, cfg.initial)
    fine = run(
        cfg.model,
        fine_grid,
        fine_state,
        replace(cfg.scheme, dt=cfg.scheme.dt / 2, record_every=2 * cfg.scheme.record_every),
    )
    err_fine = delay_channel_error(fine, cfg.model.delay.tau1)
    ratio = err_fine / err if err > 0 else np.nan

    ok = err <= bound and err_fine <= bound / 2 and 0.4 <= ratio <= 0.6
    return CheckResult(
        "delay_channel",
        ok,
        f"sup error {err:.3e} vs bound {bound:.3e}, halving ratio {ratio:.3f}",
    )


def _check_lyapunov(cfg: RunConfig, trace) -> CheckResult:
    rng = np.random.default_rng(cfg.seed)
    weights, gamma1, gamma2 = calibrate_weights(cfg.model, cfg.grid, rng=rng)
    lyap = weights.combine(trace.E, trace.I1, trace.I2, trace.I3, trace.J)
    on_traj = bool(np.all(lyap >= gamma1 * trace.E) and np.all(lyap <= gamma2 * trace.E))

    ok_probes = True
    for _ in range(200):
        t = float(rng.uniform(0.0, cfg.scheme.t_end))
        state = random_state(cfg.grid, cfg.model, t, rng)
        s = sample_functionals(state, cfg.model, t, cfg.grid)
        lyap_p = weights.combine(s.E, s.I1, s.I2, s.I3, s.J)
        if not (gamma1 * s.E <= lyap_p <= gamma2 * s.E):
            ok_probes = False
            break
    ok = gamma1 > 0 and gamma2 > gamma1 and on_traj and ok_probes
    return CheckResult(
        "lyapunov_equivalence",
        ok,
        f"gamma1 {gamma1:.3f}, gamma2 {gamma2:.3f}, trajectory bracket {on_traj}, probes {ok_probes}",
    )


def _check_scheme_oracle(cfg: RunConfig) -> CheckResult:
    from scipy.integrate import solve_ivp

    model = cfg.model
    grid = Grid(nx=3, ny=2, length=cfg.model.params.length)
    state = random_state(grid, model, 0.0, np.random.default_rng(cfg.seed))
    y0 = np.concatenate([state.v, state.u, state.p, state.q, state.z[:, 1:].ravel()])
    sol = solve_ivp(
        lambda t, y: reduced_dense_generator(model, t, grid) @ y,
        (0.0, 1.0),
        y0,
        method="DOP853",
        rtol=1e-10,
        atol=1e-12,
    )
    ref = sol.y[:, -1]
    scale = float(np.max(np.abs(ref)))

    observed = {}
    for scheme, floor in (("trapezoid", 1.9), ("explicit-rk4", 3.8)):
        errs = []
        for dt in (0.04, 0.02, 0.01, 0.005):
            trace = run(model, grid, state, SchemeConfig(dt=dt, t_end=1.0, scheme=scheme, record_every=10**9))
            got = np.concatenate(
                [
                    trace.final_state.v,
                    trace.final_state.u,
                    trace.final_state.p,
                    trace.final_state.q,
                    trace.final_state.z[:, 1:].ravel(),
                ]
            )
            errs.append(float(np.max(np.abs(got - ref))) / scale)
        orders = [float(np.log2(a / b)) for a, b in zip(errs, errs[1:])]
        observed[scheme] = (min(orders), floor)
    ok = all(got >= floor for got, floor in observed.values())
    detail = ", ".join(f"{scheme} order {got:.2f} (need {floor})" for scheme, (got, floor) in observed.items())
    return CheckResult("scheme_oracle", ok, detail)


def _check_conservative_limit(cfg: RunConfig) -> CheckResult:
    frozen = BeamModel(
        params=cfg.model.params,
        delay=cfg.model.delay,
        damping=DampingSpec(
            mu1_schedule=constant_mu1(0.0),
            mu2_schedule=constant_mu2(0.0),
            M1=0.0,
            M2=0.0,
            delta=0.0,
        ),
        xi_bar=cfg.model.xi_bar,
    )
    grid = Grid(nx=101, ny=9, length=cfg.model.params.length)
    dt = min(0.03125, 0.95 * grid.hy / frozen.speed_max)
    state = BeamState.zeros(grid)
    state.v[:] = np.sin(np.pi * grid.x / (2.0 * grid.length))
    steps = 10_000
    trace = run(
        frozen,
        grid,
        state,
        SchemeConfig(dt=dt, t_end=steps * dt, scheme="trapezoid", record_every=100),
    )
    drift = float(np.max(np.abs(trace.E - trace.E[0]))) / float(trace.E[0])
    ok = drift <= 1e-8
    return CheckResult("conservative_limit", ok, f"relative drift {drift:.3e} over {steps} steps")


def _check_determinism(cfg: RunConfig) -> CheckResult:
    short = replace(
        cfg,
        scheme=replace(cfg.scheme, t_end=min(cfg.scheme.t_end, 2.0)),
    )
    with tempfile.TemporaryDirectory() as tmp:
        a = _simulate_artifacts(short, Path(tmp) / "a")
        b = _simulate_artifacts(short, Path(tmp) / "b")
        same = a["csv"].read_bytes() == b["csv"].read_bytes()
        same = same and a["report"].read_bytes() == b["report"].read_bytes()
    return CheckResult("determinism", same, "re-run artifacts byte-identical" if same else "artifacts differ")


def cmd_check(cfg: RunConfig) -> int:
    admissibility = _check_admissibility(cfg)
    results = [admissibility]
    if not admissibility.passed:
        _print_checks(results)
        return EXIT_INADMISSIBLE

    state = initialize(cfg.model, cfg.grid, cfg.initial)
    trace = run(cfg.model, cfg.grid, state, cfg.scheme)

    results.append(_check_dissipativity(cfg))
    results.extend(_check_trajectory(cfg, trace))
    results.append(_check_decay(cfg, trace))
    results.append(_check_delay_channel(cfg, trace))
    results.append(_check_lyapunov(cfg, trace))
    results.append(_check_scheme_oracle(cfg))
    results.append(_check_conservative_limit(cfg))
    results.append(_check_determinism(cfg))

    _print_checks(results)
    if all(r.passed for r in results):
        print("all checks passed")
        return EXIT_OK
    return EXIT_CHECK


def _print_checks(results) -> None:
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")


def main() -> None:
    sys.exit(entry())


if __name__ == "__main__":
    main()
