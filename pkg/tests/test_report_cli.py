import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from trapcheck import cli, hamiltonian_flow as hf, report as rp, sds_metric as sm
from trapcheck.errors import ConfigError, InputError

REFERENCE = {"n": 4, "mass": 1, "Lambda": 0.03}


def write_config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(data if isinstance(data, str) else json.dumps(data), encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def quick_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run1")
    cfg = rp.config_from_dict(dict(REFERENCE))
    report = rp.run_full_report(cfg, out_dir=out, quick=True)
    return cfg, report, out


# ------------------------------------------------------------------ config

def test_config_defaults_filled():
    cfg = rp.config_from_dict(dict(REFERENCE))
    assert cfg.T == 50.0 and cfg.dt == 1e-3 and cfg.seeds == 16
    assert cfg.eps == [0.1, 0.01, 0.001] and cfg.k == [1, 2]
    assert cfg.out_dir == "trapcheck_out" and cfg.seed == 0
    assert cfg.params.lambda_small == pytest.approx(0.01, rel=1e-15)


def test_config_round_trip(tmp_path):
    cfg = rp.config_from_dict({**REFERENCE, "T": 3.0, "eps": [0.5], "k": [3]})
    text = cfg.to_json()
    again = rp.parse_config(write_config(tmp_path, text))
    assert again == cfg
    assert again.to_json() == text
    assert list(json.loads(text)) == sorted(json.loads(text))


@pytest.mark.parametrize(
    "data, fragment",
    [
        ({"n": 4, "mass": 1}, "missing required keys ['Lambda']"),
        ({**REFERENCE, "colour": 1}, "unknown keys"),
        ({**REFERENCE, "n": 4.0}, "n must be an integer"),
        ({**REFERENCE, "dt": -1e-3}, "T and dt must be positive"),
        ({**REFERENCE, "eps": []}, "eps must be a non-empty list"),
        ({**REFERENCE, "k": [5]}, "k values"),
        ({**REFERENCE, "mass": True}, "mass must be a finite number"),
        ({**REFERENCE, "n": 3}, "n"),
        ([1, 2], "top level"),
    ],
)
def test_config_errors(data, fragment):
    with pytest.raises(ConfigError) as info:
        rp.config_from_dict(data, "cfg.json")
    assert fragment in str(info.value)
    assert str(info.value).startswith("cfg.json")


def test_config_nondegeneracy_error():
    # λ = 0.05 > 1/27 for n = 4, M = 1
    with pytest.raises(ConfigError, match="nondegeneracy violated"):
        rp.config_from_dict({"n": 4, "mass": 1, "Lambda": 0.15})


def test_parse_config_reports_line_and_column(tmp_path):
    path = write_config(tmp_path, '{\n  "n": 4,\n  "mass": 1,\n  "Lambda": \n}\n')
    with pytest.raises(ConfigError) as info:
        rp.parse_config(path)
    assert f"{path}:5:1:" in str(info.value)


def test_parse_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read config"):
        rp.parse_config(tmp_path / "absent.json")


def test_config_error_is_input_error():
    assert issubclass(ConfigError, InputError) and issubclass(ConfigError, ValueError)


# ------------------------------------------------------------------ starts and CSV

def test_gamma_and_perturbed_starts(p4):
    g = rp.gamma_start(p4)
    assert g.r == 3.0 and g.xi == 0.0
    x = rp.perturbed_start(p4, 1e-3)
    assert x.xi == 1e-3 and abs(hf.symbol_p(p4, x)) <= 1e-12
    with pytest.raises(InputError):
        rp.perturbed_start(p4, 10.0)


def test_csv_layout_and_precision(p4):
    traj = hf.integrate(p4, rp.gamma_start(p4), 0.01, 1e-3)
    text = rp.trajectory_csv_text(traj)
    assert "\r" not in text
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["t", "r", "xi", "omega_1", "omega_2", "omega_3", "eta_1", "eta_2", "eta_3", "p_value"]
    assert len(rows) == 1 + 11
    parsed = np.array(rows[1:], dtype=float)
    np.testing.assert_array_equal(parsed[:, 1], traj.r)  # 17 digits round-trip exactly
    np.testing.assert_array_equal(parsed[:, -1], traj.p_values)


def test_csv_to_path(p4, tmp_path):
    traj = hf.integrate(p4, rp.gamma_start(p4), 0.005, 1e-3)
    dest = tmp_path / "t.csv"
    rp.dump_trajectory_csv(traj, dest)
    assert dest.read_bytes().decode("utf-8") == rp.trajectory_csv_text(traj)


# ------------------------------------------------------------------ geometry block

def test_geometry_block_n5_photon_sphere():
    # n = 5, M = 1: r_p = (4)^(1/2) = 2
    p = sm.SdsParams(5, 1.0, 0.06)
    geo = rp.geometry_block(p)
    assert geo["r_p"] == pytest.approx(2.0, rel=1e-15)
    assert geo["lambda_small"] == pytest.approx(0.01, rel=1e-15)
    assert geo["r_minus"] < 2.0 < geo["r_plus"]
    assert geo["alpha_p"] == pytest.approx(math.sqrt(sm.mu(p, 2.0)), rel=1e-14)


# ------------------------------------------------------------------ full report (quick)

def test_quick_report_passes_and_has_sections(quick_run):
    _, report, out = quick_run
    assert report.passed, report.failed
    data = json.loads((out / "report.json").read_text(encoding="utf-8"))
    for key in ("config", "geometry", "dynamics", "subprincipal", "psi_inner", "verdicts", "anchors"):
        assert key in data
    assert [v["item"] for v in data["verdicts"]] == list(range(1, 13))
    assert all(v["verdict"] == "pass" for v in data["verdicts"])
    assert len(data["anchors"]) == 12 and all(a["statement"] for a in data["anchors"])
    assert data["quick"] is True


def test_quick_report_dynamics(quick_run):
    cfg, report, _ = quick_run
    dyn = report.data["dynamics"]
    assert dyn["gamma_p_drift"] <= 1e-8
    assert dyn["gamma_max_r_offset"] <= 1e-6
    assert dyn["perturbed_exited"] and dyn["perturbed_exit_side"] == "plus"
    assert dyn["seeds_all_exited"] and dyn["seed_count"] == cfg.seeds
    assert dyn["seed_max_exit_time"] <= 200.0


def test_quick_report_csv_rows(quick_run):
    cfg, _, out = quick_run
    lines = (out / "trajectory_gamma.csv").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1 + math.floor(rp.QUICK_T / cfg.dt + 1e-9) + 1


def test_quick_report_gamma_csv_columns(quick_run):
    _, _, out = quick_run
    data = np.loadtxt(out / "trajectory_gamma.csv", delimiter=",", skiprows=1)
    assert np.max(np.abs(data[:, 1] - 3.0)) <= 1e-6
    assert np.max(np.abs(data[:, -1] - data[0, -1])) <= 1e-8
    assert np.all(np.diff(data[:, 0]) > 0)


def test_report_is_byte_identical_across_runs(quick_run, tmp_path):
    cfg, _, out = quick_run
    rp.run_full_report(cfg, out_dir=tmp_path, quick=True)
    for name in ("report.json", "trajectory_gamma.csv", "trajectory_perturbed.csv"):
        assert (tmp_path / name).read_bytes() == (out / name).read_bytes()


def test_report_json_is_strict(quick_run):
    _, report, _ = quick_run
    json.loads(report.to_json(), parse_constant=lambda c: pytest.fail(f"non-finite {c}"))


# ------------------------------------------------------------------ CLI

def test_cli_geometry(capsys):
    assert cli.main(["geometry", "--n", "5", "--mass", "1", "--lambda-cosmo", "0.06"]) == 0
    geo = json.loads(capsys.readouterr().out)
    assert geo["r_p"] == pytest.approx(2.0, rel=1e-15)


def test_cli_geometry_invalid_params(capsys):
    assert cli.main(["geometry", "--n", "4", "--mass", "1", "--lambda-cosmo", "0.2"]) == 2
    assert "error" in capsys.readouterr().err


def test_cli_trajectory_rows(tmp_path, capsys):
    cfg = write_config(tmp_path, {**REFERENCE, "T": 0.5})
    out = tmp_path / "g.csv"
    assert cli.main(["trajectory", "--config", str(cfg), "--gamma", "--output", str(out)]) == 0
    assert len(out.read_text(encoding="utf-8").splitlines()) == 1 + 501
    assert cli.main(["trajectory", "--config", str(cfg), "--perturbed", "1e-3"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 1 + 501


def test_cli_trajectory_reports_exit(tmp_path, capsys):
    cfg = write_config(tmp_path, {**REFERENCE, "T": 5.0})
    assert cli.main(["trajectory", "--config", str(cfg), "--perturbed=-1e-3"]) == 0
    assert "minus side" in capsys.readouterr().err


def test_cli_input_error_exit_code(tmp_path, capsys):
    bad = write_config(tmp_path, {"n": 4, "mass": 1, "Lambda": 0.15})
    assert cli.main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "nondegeneracy" in capsys.readouterr().err
    assert cli.main(["run", "--config", str(tmp_path / "nope.json")]) == 2


def test_cli_usage_error_exit_code():
    with pytest.raises(SystemExit) as info:
        cli.main(["run"])
    assert info.value.code == 2


def test_cli_failing_check_exit_code(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(rp, "check_jordan", lambda cfg: (False, {"forced": True}))
    cfg = write_config(tmp_path, {**REFERENCE, "seeds": 2})
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--quick"]) == 1
    out = capsys.readouterr().out
    assert "[FAIL] 11 jordan_toy" in out


def test_cli_env_overrides_out(tmp_path, monkeypatch):
    cfg = write_config(tmp_path, {**REFERENCE, "seeds": 2})
    target = tmp_path / "from_env"
    monkeypatch.setenv("TRAPCHECK_OUT", str(target))
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "ignored"), "--quick", "--seed", "3"]) == 0
    data = json.loads((target / "report.json").read_text(encoding="utf-8"))
    assert data["config"]["seed"] == 3
    assert not (tmp_path / "ignored").exists()


def test_console_script_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "trapcheck.cli", "geometry", "--n", "4", "--mass", "1", "--lambda-cosmo", "0.03"],
        capture_output=True, text=True, check=False,
    )
    assert res.returncode == 0
    assert json.loads(res.stdout)["r_p"] == 3.0
