from pathlib import Path

import pytest

from piezobeam.analysis import CSV_COLUMNS
from piezobeam.cli import entry

DEFAULT_TOML = str(Path(__file__).resolve().parents[1] / "configs" / "default.toml")

TEMPLATE = """\
seed = {seed}

[model]
rho = 1.0
alpha1 = 1.0
gamma = 0.5
beta = 1.0
mu = 1.0
length = 1.0
delta = {delta}
M1 = {M1}
M2 = {M2}
xi_bar = 1.0

[model.tau]
{tau_block}

[model.mu1]
{mu1_block}

[model.mu2]
{mu2_block}

[grid]
nx = {nx}
ny = {ny}

[initial]
v0 = {{ kind = "half_sine" }}
p0 = {{ kind = "half_sine" }}

[time]
t_end = {t_end}
record_every = {record_every}

[output]
dir = "{out_dir}"
"""

SINUSOIDAL_TAU = 'kind = "sinusoidal"\ncenter = 0.5\namplitude = 0.2\nomega = 0.5'
DEFAULT_MU1 = 'kind = "offset-exp"\noffset = 1.0\namp = 1.0\nrate = 1.0'
DEFAULT_MU2 = 'kind = "proportional"\nfactor = 0.3'


def write_config(
    path,
    nx=17,
    ny=5,
    t_end=2.0,
    record_every=2,
    seed=99,
    delta=0.3,
    M1=1.0,
    M2=0.3,
    tau_block=SINUSOIDAL_TAU,
    mu1_block=DEFAULT_MU1,
    mu2_block=DEFAULT_MU2,
    out_dir="out",
):
    path.write_text(
        TEMPLATE.format(
            seed=seed,
            delta=delta,
            M1=M1,
            M2=M2,
            tau_block=tau_block,
            mu1_block=mu1_block,
            mu2_block=mu2_block,
            nx=nx,
            ny=ny,
            t_end=t_end,
            record_every=record_every,
            out_dir=out_dir,
        )
    )
    return path


def test_validate_default_config_passes(capsys):
    assert entry(["validate", "--config", DEFAULT_TOML]) == 0
    out = capsys.readouterr().out
    assert "overall: admissible" in out
    assert "PASS weight_window" in out


@pytest.mark.parametrize(
    "patch,expected",
    [
        ({"delta": 1.2}, "ratio_slope_margin"),
        ({"tau_block": 'kind = "constant"\nvalue = 0.0'}, "delay_bounds"),
        (
            {"mu1_block": 'kind = "offset-exp"\noffset = 1.0\namp = -0.5\nrate = 1.0'},
            "damping_positive_decreasing",
        ),
    ],
)
def test_validate_names_first_failing_condition(tmp_path, capsys, patch, expected):
    cfg = write_config(tmp_path / "bad.toml", **patch)
    assert entry(["validate", "--config", str(cfg)]) == 3
    assert f"not admissible: {expected}" in capsys.readouterr().out


def test_config_errors_exit_2(tmp_path, capsys):
    assert entry(["validate", "--config", str(tmp_path / "absent.toml")]) == 2
    bad = tmp_path / "bad.toml"
    bad.write_text("[model\n")
    assert entry(["validate", "--config", str(bad)]) == 2
    unknown = tmp_path / "unknown.toml"
    unknown.write_text(write_config(tmp_path / "ok.toml").read_text() + "\n[mystery]\nx = 1\n")
    assert entry(["validate", "--config", str(unknown)]) == 2
    assert "config error" in capsys.readouterr().err


def test_simulate_writes_deterministic_artifacts(tmp_path):
    cfg = write_config(tmp_path / "run.toml", nx=33, ny=9)
    assert entry(["simulate", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert entry(["simulate", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    a, b = tmp_path / "a", tmp_path / "b"
    for name in ("trace.csv", "report.txt", "plot_trace.py"):
        assert (a / name).exists()
        assert (a / name).read_bytes() == (b / name).read_bytes()
    header = (a / "trace.csv").read_text().splitlines()[0]
    assert header == ",".join(CSV_COLUMNS)


def test_simulate_inadmissible_exit_3(tmp_path, capsys):
    cfg = write_config(tmp_path / "bad.toml", delta=1.2)
    assert entry(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    assert "not admissible" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_output_directory_precedence(tmp_path, monkeypatch):
    cfg = write_config(tmp_path / "run.toml", out_dir=str(tmp_path / "from_config"))
    monkeypatch.setenv("PIEZOBEAM_OUT", str(tmp_path / "from_env"))
    assert entry(["simulate", "--config", str(cfg), "--out", str(tmp_path / "from_flag")]) == 0
    assert (tmp_path / "from_flag" / "trace.csv").exists()
    assert not (tmp_path / "from_env").exists()

    assert entry(["simulate", "--config", str(cfg)]) == 0
    assert (tmp_path / "from_env" / "trace.csv").exists()
    assert not (tmp_path / "from_config").exists()

    monkeypatch.delenv("PIEZOBEAM_OUT")
    assert entry(["simulate", "--config", str(cfg)]) == 0
    assert (tmp_path / "from_config" / "trace.csv").exists()


def test_seed_override_keeps_determinism(tmp_path):
    cfg = write_config(tmp_path / "run.toml")
    for sub, seed in (("a", "7"), ("b", "7"), ("c", "8")):
        assert entry(["simulate", "--config", str(cfg), "--out", str(tmp_path / sub), "--seed", seed]) == 0
    same = (tmp_path / "a" / "report.txt").read_bytes() == (tmp_path / "b" / "report.txt").read_bytes()
    assert same
    # a different probe seed may move the calibrated constants (and through
    # them the Lyapunov column) but never the dynamics columns
    rows_a = (tmp_path / "a" / "trace.csv").read_text().splitlines()
    rows_c = (tmp_path / "c" / "trace.csv").read_text().splitlines()
    assert [r.split(",")[:2] for r in rows_a] == [r.split(",")[:2] for r in rows_c]


def test_check_passes_on_admissible_config(tmp_path, capsys):
    cfg = write_config(tmp_path / "run.toml", nx=65, ny=17, t_end=30.0, record_every=4)
    assert entry(["check", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "all checks passed" in out
    assert out.count("PASS ") == 10


def test_check_fails_without_effective_damping(tmp_path, capsys):
    cfg = write_config(
        tmp_path / "flat.toml",
        nx=65,
        ny=17,
        t_end=8.0,
        record_every=4,
        delta=0.0,
        M1=0.0,
        M2=0.0,
        mu1_block='kind = "constant"\nvalue = 0.0001',
        mu2_block='kind = "constant"\nvalue = 0.0',
    )
    assert entry(["check", "--config", str(cfg)]) == 4
    out = capsys.readouterr().out
    assert "FAIL decay_fit" in out


def test_check_inadmissible_exit_3(tmp_path, capsys):
    cfg = write_config(tmp_path / "bad.toml", delta=1.2)
    assert entry(["check", "--config", str(cfg)]) == 3
    assert "FAIL admissibility" in capsys.readouterr().out


def test_sweep_writes_summary_and_per_value_reports(tmp_path):
    cfg = write_config(tmp_path / "run.toml")
    code = entry(
        [
            "sweep",
            "--config",
            str(cfg),
            "--out",
            str(tmp_path / "sweep"),
            "--axis",
            "model.delta",
            "--values",
            "0.3,0.45,1.2",
        ]
    )
    assert code == 0
    lines = (tmp_path / "sweep" / "sweep.csv").read_text().splitlines()
    assert lines[0] == "model.delta,lambda_fit,M_fit,r_squared,admissible"
    assert len(lines) == 4
    assert lines[1].endswith("true") and lines[2].endswith("true")
    assert lines[3].endswith("false")
    assert (tmp_path / "sweep" / "model_delta=0.3" / "report.txt").exists()
    assert (tmp_path / "sweep" / "model_delta=0.45" / "trace.csv").exists()
    assert not (tmp_path / "sweep" / "model_delta=1.2").exists()
    # the two admissible rows carry real fitted rates
    assert float(lines[1].split(",")[1]) != 0.0


def test_sweep_rejects_bad_axis_and_values(tmp_path, capsys):
    cfg = write_config(tmp_path / "run.toml")
    base = ["sweep", "--config", str(cfg), "--out", str(tmp_path / "s")]
    assert entry(base + ["--axis", "model.nonexistent", "--values", "0.1"]) == 2
    assert entry(base + ["--axis", "model.delta", "--values", "a,b"]) == 2
    assert entry(base + ["--axis", "model.delta", "--values", ""]) == 2


def test_refine_reports_table(tmp_path, capsys):
    cfg = write_config(tmp_path / "run.toml")
    assert entry(["refine", "--config", str(cfg), "--out", str(tmp_path / "r"), "--levels", "3"]) == 0
    out = capsys.readouterr().out
    assert "lambda drifts" in out
    table = (tmp_path / "r" / "refinement.txt").read_text()
    assert table.splitlines()[1].startswith("17")
    assert entry(["refine", "--config", str(cfg), "--out", str(tmp_path / "r"), "--levels", "2"]) == 2
