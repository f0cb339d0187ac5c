import csv
import subprocess
import sys

import pytest
import yaml

from sofc_cathode.cli import loads, main
from sofc_cathode.cli.commands import (
    EXIT_ASSERTION,
    EXIT_OK,
    EXIT_SOLVER,
    EXIT_VALIDATION,
    cmd_compare,
    cmd_crosscheck,
    cmd_run,
    cmd_sensitivity,
    cmd_sweep,
    cmd_verify,
    fmt,
    read_measurements,
    synthetic_measurements,
)
from sofc_cathode.core import ValidationError

from conftest import EXAMPLE_CONFIG


@pytest.fixture
def base(example_config):
    data = example_config.to_dict()
    data["sweep"] = {"temperatures_C": [700.0, 800.0], "j_cell_A_per_m2": [500.0, 2000.0]}
    data["sensitivity"] = {"x_O2_bulk": [0.1, 0.21], "temperature_C": 800.0, "j_cell_A_per_m2": 2000.0}
    data["benchmark"]["nodes"] = [20, 50]
    return data


@pytest.fixture
def write_config(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)

    def write(data, name="cfg.yaml"):
        path = tmp_path / name
        path.write_text(yaml.safe_dump(data, sort_keys=False))
        return path

    return write


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


# -- configuration ----------------------------------------------------------


def test_example_round_trip(example_config):
    again = loads(example_config.dump(), base_dir=example_config.base_dir)
    assert again == example_config


def test_exponent_floats_without_dot():
    text = EXAMPLE_CONFIG.read_text().replace("tol: 1.0e-10", "tol: 1e-10")
    assert loads(text).solver.tol == 1e-10


def test_all_violations_reported(example_config):
    data = example_config.to_dict()
    data["geometry"]["h2_m"] = -1.0
    data["operating"]["x_O2_bulk"] = 2.0
    data["solver"]["spline_bc"] = "clamped"
    data["operating"]["bogus_key"] = 1
    with pytest.raises(ValidationError) as err:
        loads(yaml.safe_dump(data))
    keys = " ".join(k for k, _ in err.value.violations)
    for part in ("h2_m", "x_O2_bulk", "spline_bc", "bogus_key"):
        assert part in keys


def test_missing_section():
    with pytest.raises(ValidationError, match="operating"):
        loads("geometry: {h1_m: 0.0, h2_m: 5.0e-5}\nmaterials: {}\n")


def test_overrides(example_config):
    cfg = example_config.with_overrides(tol=1e-8, nodes=60, workers=2, out_dir="elsewhere")
    assert (cfg.solver.tol, cfg.solver.nodes, cfg.output.workers, cfg.output.directory) == (
        1e-8, 60, 2, "elsewhere")
    with pytest.raises(ValidationError):
        example_config.with_overrides(nodes=2)


def test_fmt_round_trips():
    for v in (0.1, 1e-300, 2.2474298156669346e-05, -0.0):
        assert float(fmt(v)) == v
    assert fmt(None) == "" and fmt(3) == "3"


# -- commands ---------------------------------------------------------------


def test_run(base, write_config, capsys):
    path = write_config(base)
    assert main(["run", "--config", str(path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "delta_c_m: " in out and "sigma_eta_V: " in out
    profile = rows("out/run_lscf.csv")
    assert len(profile) == 100
    assert float(profile[0]["Lambda"]) == 0.0
    summary = open("out/summary.txt").read()
    assert summary.startswith("command: run\n")


def test_cli_overrides_apply(base, write_config):
    path = write_config(base)
    assert main(["run", "--config", str(path), "--nodes", "40", "--out", "o2", "--tol", "1e-9"]) == EXIT_OK
    assert len(rows("o2/run_lscf.csv")) == 40


def test_zero_current_run(base, write_config, capsys):
    base["operating"]["j_cell_A_per_m2"] = 0.0
    assert main(["run", "--config", str(write_config(base))]) == EXIT_OK
    assert "delta_c_m: n/a" in capsys.readouterr().out


def test_validation_exit_code(base, write_config, capsys):
    base["materials"]["D2_m2_per_s"] = -1.0
    base["operating"]["temperature_C"] = -400.0
    assert main(["run", "--config", str(write_config(base))]) == EXIT_VALIDATION
    err = capsys.readouterr().err
    assert "D2_m2_per_s" in err and "temperature_C" in err


def test_solver_failure_exit_code(base, write_config, capsys):
    base["operating"]["j_cell_A_per_m2"] = 1.0e6
    assert main(["run", "--config", str(write_config(base))]) == EXIT_SOLVER
    assert "LimitingCurrentError" in capsys.readouterr().err


def test_sweep_records_failures_as_rows(base, write_config):
    base["sweep"]["j_cell_A_per_m2"] = [2000.0, 1.0e6]
    cfg = loads(yaml.safe_dump(base))
    result = cmd_sweep(cfg)
    assert result.exit_code == EXIT_OK
    table = rows(result.csv_path)
    assert [r["status"] for r in table] == ["ok", "LimitingCurrentError"] * 2
    assert table[1]["delta_c"] == ""


def test_sweep_all_failed(base, write_config):
    base["sweep"]["j_cell_A_per_m2"] = [1.0e6]
    assert cmd_sweep(loads(yaml.safe_dump(base))).exit_code == EXIT_SOLVER


def test_run_sweep_sensitivity_agree(base, write_config):
    base["sweep"] = {"temperatures_C": [800.0], "j_cell_A_per_m2": [2000.0]}
    base["sensitivity"]["x_O2_bulk"] = [0.21]
    cfg = loads(yaml.safe_dump(base))
    run = cmd_run(cfg)
    sweep = rows(cmd_sweep(cfg).csv_path)[0]
    sens = rows(cmd_sensitivity(cfg).csv_path)[0]
    assert sweep == sens
    run_delta = next(l for l in run.summary if l.startswith("delta_c_m")).split(": ")[1]
    assert sweep["delta_c"] == run_delta


def test_outputs_bit_identical(base, write_config):
    path = write_config(base)
    texts = []
    for out in ("a", "b"):
        for cmd in ("run", "sweep", "sensitivity"):
            assert main([cmd, "--config", str(path), "--out", out]) == EXIT_OK
        texts.append([open(f"{out}/{c}_lscf.csv").read() for c in ("run", "sweep", "sensitivity")])
    assert texts[0] == texts[1]


def test_workers_do_not_change_bytes(base, write_config):
    path = write_config(base)
    assert main(["sweep", "--config", str(path), "--out", "serial"]) == EXIT_OK
    assert main(["sweep", "--config", str(path), "--out", "parallel", "--workers", "3"]) == EXIT_OK
    assert open("serial/sweep_lscf.csv").read() == open("parallel/sweep_lscf.csv").read()


def test_verify(base, write_config):
    result = cmd_verify(loads(yaml.safe_dump(base)))
    assert result.exit_code == EXIT_OK
    assert "trend_assertions: passed" in result.summary
    assert [r["N"] for r in rows(result.csv_path)][::5] == ["20", "50"]


def test_verify_single_node_count_warns(base, write_config, caplog):
    base["benchmark"]["nodes"] = [20]
    result = cmd_verify(loads(yaml.safe_dump(base)))
    assert result.exit_code == EXIT_OK
    assert any("single node count" in line for line in result.summary)
    assert "vacuous" in caplog.text


def test_verify_low_alpha(base, write_config):
    base["benchmark"]["alpha"] = 1.5
    assert cmd_verify(loads(yaml.safe_dump(base))).exit_code == EXIT_OK


def test_verify_reports_trend_failure(base, write_config):
    # identical node counts cannot show a decrease
    base["benchmark"]["nodes"] = [20, 20]
    result = cmd_verify(loads(yaml.safe_dump(base)))
    assert result.exit_code == EXIT_ASSERTION
    assert result.failures


def test_crosscheck(base, write_config):
    result = cmd_crosscheck(loads(yaml.safe_dump(base)))
    assert result.exit_code == EXIT_OK, result.failures
    table = rows(result.csv_path)
    assert list(table[0]) == ["z", "d_phi_el", "d_phi_ion", "d_j_el", "d_j_ion", "d_C_O2", "d_J_O2"]
    worst = max(float(v) for r in table for k, v in r.items() if k != "z")
    assert worst < 1e-4


def test_crosscheck_refuses_zero_current(base, write_config):
    base["operating"]["j_cell_A_per_m2"] = 0.0
    assert main(["crosscheck", "--config", str(write_config(base))]) == EXIT_VALIDATION


def test_sensitivity_is_weak(base, write_config):
    base["sensitivity"]["x_O2_bulk"] = [0.05, 0.5]
    result = cmd_sensitivity(loads(yaml.safe_dump(base)))
    spread = float(next(l for l in result.summary if l.startswith("delta_c_relative_spread")).split(": ")[1])
    assert 0.0 < spread < 0.10


def test_compare_with_synthetic_data(base, write_config, tmp_path):
    cfg = loads(yaml.safe_dump(base))
    data = synthetic_measurements(cfg, [500.0, 1000.0, 2000.0])
    measured = tmp_path / "measured.csv"
    measured.write_text("j_cell,sigma_eta\n" + "".join(f"{fmt(j)},{fmt(e)}\n" for j, e in data))
    result = cmd_compare(cfg, measured)
    assert result.exit_code == EXIT_OK
    rms = [l for l in result.summary if l.startswith("rms[")]
    assert len(rms) == 1 and rms[0].split(": ")[1].startswith("0.0 ")
    assert len(rows(result.csv_path)) == 3


def test_compare_series_per_temperature(base, write_config, tmp_path):
    measured = tmp_path / "m.csv"
    measured.write_text("T,x_O2,j_cell,sigma_eta\n1073.15,0.21,1000,0.01\n973.15,0.21,1000,0.02\n")
    result = cmd_compare(loads(yaml.safe_dump(base)), measured)
    assert sum(l.startswith("rms[") for l in result.summary) == 2


def test_compare_empty_file(base, write_config, tmp_path, caplog):
    measured = tmp_path / "empty.csv"
    measured.write_text("")
    result = cmd_compare(loads(yaml.safe_dump(base)), measured)
    assert result.exit_code == EXIT_OK
    assert rows(result.csv_path) == []
    assert "no data rows" in caplog.text


def test_compare_bad_files(base, write_config, tmp_path):
    cfg = loads(yaml.safe_dump(base))
    with pytest.raises(ValidationError, match="missing column"):
        bad = tmp_path / "bad.csv"
        bad.write_text("current,eta\n1,2\n")
        read_measurements(bad, 1073.15, 0.21)
    with pytest.raises(ValidationError, match="cannot read"):
        cmd_compare(cfg, tmp_path / "nope.csv")
    with pytest.raises(ValidationError, match="no measurement file"):
        cmd_compare(cfg)
    garbage = tmp_path / "garbage.csv"
    garbage.write_text("j_cell,sigma_eta\n1000,abc\n")
    with pytest.raises(ValidationError):
        read_measurements(garbage, 1073.15, 0.21)


def test_measured_path_relative_to_config(base, write_config, tmp_path):
    (tmp_path / "data").mkdir()
    (tmp_path / "data" / "m.csv").write_text("j_cell,sigma_eta\n1000,0.01\n")
    base["compare"] = {"measured_csv": "data/m.csv"}
    path = write_config(base, "cfg.yaml")
    assert main(["compare", "--config", str(path)]) == EXIT_OK


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "sofc_cathode.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for name in ("run", "sweep", "verify", "crosscheck", "sensitivity", "compare"):
        assert name in proc.stdout
