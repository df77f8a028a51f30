"""CLI surface: subcommands, exit codes, file outputs."""

import json

import pytest

from kreflux.cli import main
from kreflux.scenario import bundled_config_path

SHORT = """
R = 2.5
L_d = 0.00782
L_q = 0.0120
psi_m = 0.10
pole_pairs = 4
speed_rpm = 1000
duration = 0.2
alpha = 20pi
a = 20pi
gamma = 1
i_q_ref = 1.0
dt_truth = 1e-5
dt_sample = 1e-4
init_angle_offset = -1.5707963
init_mag_scale = 2.0
"""


@pytest.fixture()
def short_cfg(tmp_path):
    path = tmp_path / "short.cfg"
    path.write_text(SHORT)
    return path


def test_simulate_writes_csv_and_metrics(short_cfg, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["simulate", str(short_cfg), "--out", str(out)]) == 0
    assert (out / "kre.csv").exists()
    metrics = json.loads((out / "kre_metrics.json").read_text())
    assert metrics["observer"] == "kre"
    assert metrics["diverged"] is False
    # single-observer runs also get the canonical summary name
    assert json.loads((out / "metrics.json").read_text()) == metrics
    assert "kre" in capsys.readouterr().out


def test_simulate_all_observers(short_cfg, tmp_path):
    out = tmp_path / "all"
    assert main(["simulate", str(short_cfg), "--observer", "all",
                 "--out", str(out)]) == 0
    for obs in ("kre", "grad_aut", "grad_tie"):
        assert (out / f"{obs}.csv").exists()


def test_missing_config_is_usage_error(tmp_path, capsys):
    assert main(["simulate", str(tmp_path / "nope.cfg")]) == 2
    assert "config error" in capsys.readouterr().err


def test_bad_config_is_usage_error(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text(SHORT + "\nunknown_knob = 3\n")
    assert main(["simulate", str(path)]) == 2
    assert "unknown_knob" in capsys.readouterr().err


def test_usage_error_exit_code():
    assert main([]) == 2
    assert main(["simulate"]) == 2


def test_compare_command(short_cfg, tmp_path, capsys):
    out = tmp_path / "cmp"
    code = main(["compare", str(short_cfg), "--observers", "kre,grad_aut",
                 "--out", str(out)])
    assert code == 0
    assert (out / "kre.csv").exists()
    assert (out / "grad_aut.csv").exists()
    assert "grad_aut" in capsys.readouterr().out


def test_compare_reports_divergence(tmp_path):
    # gradient observer at gamma=5 and 10 kHz on the non-salient machine
    path = tmp_path / "div.cfg"
    path.write_text(SHORT.replace("L_q = 0.0120", "L_q = 0.00782")
                    .replace("alpha = 20pi", "alpha = 200pi")
                    .replace("gamma = 1", "gamma = 5")
                    .replace("duration = 0.2", "duration = 1.0"))
    code = main(["compare", str(path), "--observers", "grad_aut"])
    assert code == 3


def test_verify_subset_and_json(short_cfg, tmp_path, capsys):
    report_path = tmp_path / "verdict.json"
    code = main(["verify", str(short_cfg), "--checks", "pe_q,convergence",
                 "--json", str(report_path)])
    assert code == 0
    verdict = json.loads(report_path.read_text())
    assert verdict["passed"] is True
    names = [c["name"] for c in verdict["checks"]]
    assert names == ["pe", "q_positivity", "convergence"]
    assert "PASS" in capsys.readouterr().out


def test_verify_mutation_fails(capsys):
    cfg = str(bundled_config_path("salient"))
    code = main(["verify", cfg, "--checks", "identity", "--break-omega1"])
    assert code == 1
    assert "FAIL" in capsys.readouterr().out


def test_pe_command(short_cfg, capsys):
    assert main(["pe", str(short_cfg)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["is_pe"] is True
    assert out["delta_hat"] > 0


def test_sweep_command(short_cfg, capsys):
    code = main(["sweep", str(short_cfg), "--param", "gamma",
                 "--values", "1,5"])
    assert code == 0
    text = capsys.readouterr().out
    assert "outcome" in text and "ok" in text
