import numpy as np
import pytest

from kslab import io
from kslab.cli import main
from kslab.config import (
    ConfigError,
    emit_run_config,
    emit_sweep_plan,
    parse_run_config,
    parse_sweep_plan,
)
from kslab.solver import RegKind


RUN_TEXT = """
[domain]
kind = disk

[grid]
radial_n = 256
radial_ratio = 1.0

[regularization]
kind = cutoff_flux
epsilon = 1e-3

[initial]
kind = gaussian
mass = 4.0
width = 0.2

[time]
t_end = 5e-4
dt_policy = cfl
snapshot_dt = 1e-4

[output]
seed = 7
"""

SUPERCRITICAL_TEXT = """
[domain]
kind = disk

[grid]
radial_n = 384
radial_ratio = 1.0

[regularization]
kind = cutoff_flux
epsilon = 3e-4

[initial]
kind = gaussian
mass = 37.699
width = 0.05

[time]
t_end = 6e-3
snapshot_dt = 5e-4

[stopping]
stop_factor = 1.2

[output]
seed = 1
"""


def test_config_round_trip_is_identity():
    cfg = parse_run_config(None, text=RUN_TEXT)
    text1 = emit_run_config(cfg)
    cfg2 = parse_run_config(None, text=text1)
    assert emit_run_config(cfg2) == text1
    assert cfg2.reg == RegKind("cutoff_flux", 1e-3)
    assert cfg2.solver.t_end == 5e-4


def test_config_missing_field_errors():
    with pytest.raises(ConfigError):
        parse_run_config(None, text="[domain]\nkind = disk\n")
    with pytest.raises(ConfigError):
        parse_run_config(None, text=RUN_TEXT.replace("epsilon = 1e-3", "epsilon = -1"))


def test_sweep_plan_round_trip():
    text = (
        "[sweep]\nepsilons = 0.003 0.001\nregs = cutoff_flux\nseed = 2\n\n"
        + RUN_TEXT.replace("[regularization]\nkind = cutoff_flux\nepsilon = 1e-3\n\n", "")
    )
    plan = parse_sweep_plan(None, text=text)
    assert plan.epsilons == [0.003, 0.001]
    text2 = emit_sweep_plan(plan)
    plan2 = parse_sweep_plan(None, text=text2)
    assert plan2.epsilons == plan.epsilons
    assert emit_sweep_plan(plan2) == text2


def test_snapshot_round_trip(tmp_path):
    vals = np.arange(12.0).reshape(3, 4)
    path = tmp_path / "s.ksw"
    io.write_snapshot(path, vals, 0.1, 0.2, 1.5, RegKind("nonlinear_diffusion", 2e-3))
    out = io.read_snapshot(path)
    assert np.array_equal(out["values"], vals)
    assert out["hx"] == 0.1 and out["hy"] == 0.2 and out["t"] == 1.5
    assert out["reg"] == RegKind("nonlinear_diffusion", 2e-3)
    raw = path.read_bytes()
    assert raw[:4] == b"KSW1"


def test_csv_schema_sidecar(tmp_path):
    p = tmp_path / "x.csv"
    io.write_csv(p, ["a", "b"], [{"a": 1.0, "b": 2.0}], {"a": "first", "b": "second"})
    assert p.exists()
    schema = (tmp_path / "x.csv.schema.txt").read_text()
    assert "a: first" in schema


def test_cmd_run_subcritical_exit0(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text(RUN_TEXT)
    rc = main(["--out", str(tmp_path / "out"), "run", str(cfg)])
    assert rc == 0
    assert (tmp_path / "out" / "diagnostics.csv").exists()
    assert (tmp_path / "out" / "manifest.ini").exists()
    lines = (tmp_path / "out" / "diagnostics.csv").read_text().strip().splitlines()
    assert len(lines) > 1  # header plus per-step rows


def test_cmd_run_concentration_exit2(tmp_path):
    cfg = tmp_path / "super.ini"
    cfg.write_text(SUPERCRITICAL_TEXT)
    rc = main(["--out", str(tmp_path / "out2"), "run", str(cfg)])
    assert rc == 2
    man = io.read_manifest(tmp_path / "out2" / "manifest.ini")
    assert man["concentrated"] == "True"


def test_cmd_run_missing_field_exit1(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[domain]\nkind = disk\n")
    assert main(["run", str(cfg)]) == 1


def test_cmd_sweep_empty_epsilons_exit1(tmp_path):
    plan = tmp_path / "plan.ini"
    plan.write_text("[sweep]\nepsilons =\n\n" + RUN_TEXT)
    assert main(["--out", str(tmp_path / "s"), "sweep", str(plan)]) == 1


def test_cmd_sweep_minimal_and_report(tmp_path):
    plan = tmp_path / "plan.ini"
    plan.write_text(
        "[sweep]\nepsilons = 0.003 0.001\nregs = cutoff_flux nonlinear_diffusion\n"
        "matched_offsets = 0.0005\nrho_ladder = 0.05 0.08 0.12\n\n" + RUN_TEXT
    )
    rc = main(["--out", str(tmp_path / "s"), "sweep", str(plan)])
    assert rc == 0
    report = tmp_path / "s" / "sweep_report.csv"
    assert report.exists()
    header = report.read_text().splitlines()[0]
    for col in ("reg", "epsilon", "alpha", "beta"):
        assert col in header
    assert main(["report", str(tmp_path / "s")]) == 0


def test_cmd_check_unknown_suite_exits_nonzero():
    with pytest.raises(SystemExit):
        main(["check", "nonsense"])


def test_cmd_check_sobolev(tmp_path):
    rc = main(["--out", str(tmp_path), "check", "sobolev"])
    assert rc == 0
    assert (tmp_path / "check_sobolev.csv").exists()


def test_manifest_reexecution_identity(tmp_path):
    # identical config + seed produce identical manifests and diagnostics
    cfg = tmp_path / "run.ini"
    cfg.write_text(RUN_TEXT)
    main(["--out", str(tmp_path / "a"), "run", str(cfg)])
    main(["--out", str(tmp_path / "b"), "run", str(cfg)])
    assert (tmp_path / "a" / "manifest.ini").read_bytes() == (tmp_path / "b" / "manifest.ini").read_bytes()
    assert (tmp_path / "a" / "diagnostics.csv").read_bytes() == (tmp_path / "b" / "diagnostics.csv").read_bytes()
