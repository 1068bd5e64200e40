"""Config parsing, case orchestration, file formats and the CLI."""

import math
import os

import numpy as np
import pytest

from cutcell import (
    ConfigError,
    DragSeries,
    ForceCoefficients,
    convergence_study,
    load_config,
    parse_config,
    read_drag_csv,
    run_case,
    serialize_config,
    validate_drag,
    write_drag_csv,
)
from cutcell.app import OUTDIR_ENV, read_snapshot_field
from cutcell.cli import main as cli_main

MINIMAL = """
domain.x_min = -2
domain.x_max = 2
domain.y_min = -2
domain.y_max = 2
grid.nx = 32
grid.ny = 32
flow.re = 100
flow.dt = 1e-3
flow.tmax = 0
"""

CONFINED_MOVING = """
# narrow channel, cylinder oscillating along the axis
domain.x_min = -3
domain.x_max = 3
domain.y_min = -1
domain.y_max = 1
grid.h = 5e-3
flow.re = 800
flow.dt = 1e-3
flow.tmax = 0.1
body.shape = circle
body.radius = 0.5
body.center_x = -1
body.motion = sinusoidal
body.alpha = 0.25
bc.preset = confined
solver.kind = iterative
solver.tol = 1e-10
"""


def drag_case(tmpdir, n=128, tmax=0.1, extra=""):
    return parse_config(f"""
domain.x_min = -3
domain.x_max = 3
domain.y_min = -3
domain.y_max = 3
grid.nx = {n}
grid.ny = {n}
flow.re = 1000
flow.dt = 1e-3
flow.tmax = {tmax}
body.shape = circle
body.radius = 0.5
output.dir = {tmpdir}
{extra}
""")


@pytest.fixture(autouse=True)
def _isolated_outdir(monkeypatch):
    monkeypatch.delenv(OUTDIR_ENV, raising=False)


# -- config ----------------------------------------------------------------------

def test_minimal_config_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.preset == "open"
    assert cfg.shape == "none"
    assert cfg.solver == "auto"
    assert (cfg.re, cfg.dt, cfg.tmax) == (100.0, 1e-3, 0.0)


def test_config_roundtrips_through_serialize():
    cfg = parse_config(CONFINED_MOVING)
    assert cfg.h == 5e-3 and cfg.preset == "confined" and cfg.re == 800.0
    again = parse_config(serialize_config(cfg))
    assert again == cfg
    assert parse_config(serialize_config(again)) == again


def test_config_error_names_bad_radius():
    with pytest.raises(ConfigError, match="body.radius"):
        parse_config(MINIMAL + "body.shape = circle\nbody.radius = -1\n")


def test_config_unknown_key_reports_line():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(MINIMAL + "bodyy.radius = 1\n")


def test_config_missing_required_keys_are_named():
    with pytest.raises(ConfigError, match="flow.re"):
        parse_config("domain.x_min = 0\n")


def test_config_requires_resolution():
    text = MINIMAL.replace("grid.nx = 32\n", "").replace("grid.ny = 32\n", "")
    with pytest.raises(ConfigError, match="grid"):
        parse_config(text)


def test_config_rejects_body_leaving_domain():
    with pytest.raises(ConfigError, match="body"):
        parse_config(CONFINED_MOVING.replace("flow.tmax = 0.1",
                                             "flow.tmax = 20")
                     .replace("body.alpha = 0.25", "body.alpha = 2.0"))


def test_config_moving_body_rejects_plain_direct_solver():
    with pytest.raises(ConfigError, match="rebuild_direct"):
        parse_config(CONFINED_MOVING.replace("solver.kind = iterative",
                                             "solver.kind = direct"))
    cfg = parse_config(CONFINED_MOVING.replace(
        "solver.kind = iterative",
        "solver.kind = direct\nsolver.rebuild_direct = true"))
    assert cfg.rebuild_direct


def test_load_config_reads_file(tmp_path):
    path = tmp_path / "case.cfg"
    path.write_text(MINIMAL)
    assert load_config(path) == parse_config(MINIMAL)


# -- drag series and CSV -----------------------------------------------------------

def sample_series():
    s = DragSeries()
    vals = [(0.1, 1.0 / 3.0, 1e-17, math.pi, -2.5),
            (0.2, 0.7, -1e-9, 0.3, 0.4),
            (0.30000000000000004, 12345.6789012345678, 0.0, 1.0, 2.0)]
    for t, cd, cl, cdp, cdv in vals:
        s.append(ForceCoefficients(t=t, cd=cd, cl=cl, cd_pressure=cdp,
                                   cd_viscous=cdv))
    return s


def test_drag_csv_roundtrip_is_exact(tmp_path):
    s = sample_series()
    path = tmp_path / "drag.csv"
    write_drag_csv(s, path)
    header = path.read_text().splitlines()[0]
    assert header == "T,Cd,Cl,Cd_p,Cd_v"
    back = read_drag_csv(path)
    for col in DragSeries.COLUMNS:
        np.testing.assert_array_equal(back.column(col), s.column(col))


def test_drag_series_requires_increasing_time():
    s = sample_series()
    with pytest.raises(ConfigError, match="increasing"):
        s.append(ForceCoefficients(t=0.3, cd=0.0, cl=0.0, cd_pressure=0.0,
                                   cd_viscous=0.0))


# -- run_case -----------------------------------------------------------------------

def test_run_case_tmax_zero_writes_initial_snapshot(tmp_path):
    cfg = parse_config(MINIMAL + f"output.dir = {tmp_path}\n")
    series, files = run_case(cfg)
    assert len(series) == 0
    vtks = [f for f in files if f.endswith(".vtk")]
    assert len(vtks) == 1 and os.path.exists(vtks[0])
    assert any(f.endswith("_drag.csv") for f in files)


def test_run_case_snapshots_are_y_symmetric(tmp_path):
    cfg = drag_case(tmp_path, n=48, tmax=0.01,
                    extra="output.snapshot_every = 10\nflow.dt = 1e-3\n")
    series, files = run_case(cfg)
    assert len(series) == 10
    assert series.max_div <= 1e-9
    last = sorted(f for f in files if f.endswith(".vtk"))[-1]
    u = read_snapshot_field(last, "u")
    v = read_snapshot_field(last, "v")
    w = read_snapshot_field(last, "vorticity")
    # corner rows mirror about the centerline; file precision is 9 digits
    assert np.max(np.abs(u - u[:, ::-1])) <= 1e-7
    assert np.max(np.abs(v + v[:, ::-1])) <= 1e-7
    assert np.max(np.abs(w + w[:, ::-1])) <= 1e-6


def test_run_case_drag_csv_matches_series(tmp_path):
    cfg = drag_case(tmp_path, n=48, tmax=0.005, extra="output.drag_every = 2\n")
    series, files = run_case(cfg)
    csv = next(f for f in files if f.endswith("_drag.csv"))
    back = read_drag_csv(csv)
    assert len(back) == len(series) == 2  # steps 2 and 4 of 5
    np.testing.assert_array_equal(back.column("Cd"), series.column("Cd"))
    cd = series.column("Cd")
    assert np.all(np.abs(cd - series.column("Cd_p") - series.column("Cd_v"))
                  <= 1e-12 * np.abs(cd))


# -- validate_drag --------------------------------------------------------------------

def test_validate_drag_threshold_pass_and_fail(tmp_path):
    cfg = drag_case(tmp_path, n=128, tmax=0.1,
                    extra="validate.t_lo = 0.1\nvalidate.t_hi = 0.2\n")
    report = validate_drag(cfg, threshold=1.0)
    assert report.passed and report.n_samples > 0
    assert 0.0 < report.max_rel < 1.0
    assert report.mean_rel <= report.max_rel
    strict = validate_drag(cfg, threshold=1e-6)
    assert not strict.passed
    assert "FAIL" in strict.render()
    assert os.path.exists(tmp_path / "case_validate.txt")


def test_validate_drag_requires_fixed_cylinder(tmp_path):
    cfg = parse_config(MINIMAL + f"output.dir = {tmp_path}\n")
    with pytest.raises(ConfigError, match="cylinder"):
        validate_drag(cfg)


# -- convergence_study ---------------------------------------------------------------

def conv_config(tmpdir, case, n0, levels):
    # dt=1.5 puts the Helmholtz shift at 1 so the ladder measures the spatial
    # truncation instead of a mass-dominated error floor
    return parse_config(f"""
domain.x_min = -2
domain.x_max = 2
domain.y_min = -2
domain.y_max = 2
grid.nx = {n0}
grid.ny = {n0}
flow.re = 1
flow.dt = 1.5
flow.tmax = 0
body.shape = circle
body.radius = 0.3
convergence.case = {case}
convergence.n0 = {n0}
convergence.levels = {levels}
output.dir = {tmpdir}
""")


def test_convergence_poisson_second_order(tmp_path):
    report = convergence_study(conv_config(tmp_path, "poisson", 32, 3))
    assert all(p >= 1.95 for p in report.orders)
    assert report.passed


def test_convergence_disk_case_runs(tmp_path):
    report = convergence_study(conv_config(tmp_path, "disk", 64, 2))
    assert report.errors[1] < report.errors[0]
    assert report.orders[0] >= 1.9
    assert os.path.exists(tmp_path / "case_convergence.txt")


def test_convergence_rejects_single_level(tmp_path):
    with pytest.raises(ConfigError, match="levels"):
        convergence_study(conv_config(tmp_path, "poisson", 32, 1))


# -- CLI --------------------------------------------------------------------------------

def test_cli_run_and_exit_codes(tmp_path, capsys):
    path = tmp_path / "case.cfg"
    path.write_text(MINIMAL + f"output.dir = {tmp_path}\n")
    assert cli_main(["run", str(path)]) == 0
    out = capsys.readouterr().out
    assert "drag records" in out


def test_cli_validate_drag_failure_exit_code(tmp_path):
    path = tmp_path / "case.cfg"
    cfg_text = f"""
domain.x_min = -3
domain.x_max = 3
domain.y_min = -3
domain.y_max = 3
grid.nx = 64
grid.ny = 64
flow.re = 1000
flow.dt = 1e-3
flow.tmax = 0.02
body.shape = circle
body.radius = 0.5
validate.t_lo = 0.01
validate.t_hi = 0.04
output.dir = {tmp_path}
"""
    path.write_text(cfg_text)
    assert cli_main(["validate-drag", str(path), "--threshold", "1e-9"]) == 1
    assert cli_main(["validate-drag", str(path), "--threshold", "10"]) == 0


def test_cli_bad_config_is_a_usage_error(tmp_path, capsys):
    missing = tmp_path / "nope.cfg"
    assert cli_main(["run", str(missing)]) == 2
    assert "error:" in capsys.readouterr().err
    bad = tmp_path / "bad.cfg"
    bad.write_text("flow.re = -5\n")
    assert cli_main(["run", str(bad)]) == 2


def test_cli_outdir_env_override(tmp_path, monkeypatch, capsys):
    override = tmp_path / "elsewhere"
    monkeypatch.setenv(OUTDIR_ENV, str(override))
    path = tmp_path / "case.cfg"
    path.write_text(MINIMAL + "output.dir = should_not_be_used\n")
    assert cli_main(["run", str(path)]) == 0
    assert (override / "case_drag.csv").exists()
    assert not os.path.exists("should_not_be_used")
