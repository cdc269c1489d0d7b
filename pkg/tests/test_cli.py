import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from harvnet.analytic import solve_availability
from harvnet.cli import load_scenario, main
from harvnet.coverage import coverage_prob
from harvnet.model import ScenarioError

PC = 1 / (1 + math.pi / 4)

BASE_DOC = {
    "tiers": [
        {"density": 1.0, "tx_power": 1.0, "harvest_rate": 2.0, "battery": 6},
        {"density": 10.0, "tx_power": 1.0, "harvest_rate": 1.0, "battery": 5},
    ],
    "path_loss_exp": 4.0,
    "sir_target": 1.0,
    "over_provisioning": 1.1,
    "sim": {"window_side": 6.0, "replicates": 6, "seed": 7},
}


@pytest.fixture(scope="module")
def scenario_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("scn") / "base.json"
    path.write_text(json.dumps(BASE_DOC))
    return str(path)


@pytest.fixture(scope="module")
def infeasible_file(tmp_path_factory):
    doc = dict(BASE_DOC)
    doc.pop("over_provisioning")
    doc["user_density"] = 30.0
    path = tmp_path_factory.mktemp("scn") / "infeasible.json"
    path.write_text(json.dumps(doc))
    return str(path)


def rows(capsys):
    return list(csv.reader(io.StringIO(capsys.readouterr().out)))


def test_load_scenario_over_provisioning(scenario_file):
    scenario, doc = load_scenario(scenario_file)
    harvested = 1.0 * 2.0 + 10.0 * 1.0
    assert scenario.user_density == pytest.approx(harvested / (1.1 * PC))
    assert doc["sim"]["seed"] == 7


def test_load_scenario_db_and_errors(tmp_path):
    doc = dict(BASE_DOC)
    doc.pop("sir_target")
    doc["sir_target_db"] = 3.0
    p = tmp_path / "db.json"
    p.write_text(json.dumps(doc))
    scenario, _ = load_scenario(str(p))
    assert scenario.sir_target == pytest.approx(10 ** 0.3)

    missing = {"tiers": [{"density": 1.0, "tx_power": 1.0, "battery": 4}],
               "sir_target": 1.0, "user_density": 5.0}
    p2 = tmp_path / "missing.json"
    p2.write_text(json.dumps(missing))
    with pytest.raises(ScenarioError, match="harvest_rate"):
        load_scenario(str(p2))

    p3 = tmp_path / "no_target.json"
    p3.write_text(json.dumps({"tiers": BASE_DOC["tiers"], "user_density": 5.0}))
    with pytest.raises(ScenarioError, match="sir_target"):
        load_scenario(str(p3))

    p4 = tmp_path / "no_users.json"
    p4.write_text(json.dumps({"tiers": BASE_DOC["tiers"], "sir_target": 1.0}))
    with pytest.raises(ScenarioError, match="user_density"):
        load_scenario(str(p4))


def test_load_scenario_shadowing_block(tmp_path):
    doc = json.loads(json.dumps(BASE_DOC))
    doc["tiers"][0]["shadowing"] = {"mean_db": -1.0, "std_db": 6.0}
    p = tmp_path / "sh.json"
    p.write_text(json.dumps(doc))
    scenario, _ = load_scenario(str(p))
    assert scenario.tiers[0].shadowing.std_db == 6.0
    assert scenario.tiers[1].shadowing.std_db == 0.0


def test_availability_output_matches_library(scenario_file, capsys):
    assert main(["availability", scenario_file]) == 0
    table = rows(capsys)
    assert table[0] == ["tier", "policy", "rho", "gamma", "feasible",
                        "iterations", "residual"]
    scenario, _ = load_scenario(scenario_file)
    want = solve_availability(scenario).rho
    got = [float(r[2]) for r in table[1:]]
    assert got == pytest.approx(list(want), abs=1e-9)
    assert table[1][1] == "S(1)"
    assert float(table[1][3]) == pytest.approx(1.1, abs=1e-12)


def test_availability_policy2_lowers_tier(scenario_file, capsys):
    assert main(["availability", scenario_file]) == 0
    free = [float(r[2]) for r in rows(capsys)[1:]]
    assert main(["availability", scenario_file, "--policy2", "k=2"]) == 0
    table = rows(capsys)
    pinned = [float(r[2]) for r in table[1:]]
    assert table[2][1] == "S(5)"
    assert pinned[1] < free[1] - 1e-3
    assert main(["availability", scenario_file, "--policy2", "k=2:2"]) == 0
    cut2 = [float(r[2]) for r in rows(capsys)[1:]]
    assert pinned[1] < cut2[1] < free[1]


def test_strict_flag_flags_infeasible(scenario_file, infeasible_file, capsys):
    assert main(["availability", infeasible_file, "--strict"]) == 2
    table = rows(capsys)
    assert table[1][4] == "False"
    assert float(table[1][2]) == 0.0
    assert main(["availability", infeasible_file]) == 0
    assert main(["availability", scenario_file, "--strict"]) == 0


def test_region_output(scenario_file, capsys):
    assert main(["region", scenario_file, "--grid", "11"]) == 0
    free = rows(capsys)
    assert free[0] == ["grid", "rho1_star_given_rho2", "rho2_star_given_rho1"]
    assert len(free) == 12
    vals = np.array([[float(x) for x in r] for r in free[1:]])
    assert np.all((vals >= 0.0) & (vals <= 1.0))
    assert main(["region", scenario_file, "--grid", "11",
                 "--constrain", "k=1", "--constrain", "k=2"]) == 0
    pinned = np.array([[float(x) for x in r] for r in rows(capsys)[1:]])
    assert np.all(pinned[:, 1] <= vals[:, 1] + 1e-9)
    assert np.all(pinned[:, 2] <= vals[:, 2] + 1e-9)


def test_coverage_command(scenario_file, capsys):
    assert main(["coverage", scenario_file]) == 0
    table = rows(capsys)
    assert table[0] == ["sir_target", "path_loss_exp", "coverage"]
    assert float(table[1][2]) == pytest.approx(PC, abs=1e-12)
    assert main(["coverage", scenario_file, "--sir-target-db", "0"]) == 0
    assert float(rows(capsys)[1][2]) == pytest.approx(PC, abs=1e-12)
    assert main(["coverage", scenario_file, "--sir-target-db", "5"]) == 0
    assert float(rows(capsys)[1][2]) < PC


def test_rate_sweep_and_single_target(scenario_file, tmp_path, capsys):
    assert main(["rate", scenario_file, "--rate-target", "0.0"]) == 0
    table = rows(capsys)
    assert table[0] == ["rate_target", "rate_ccdf"]
    assert float(table[1][1]) == 1.0

    doc = dict(BASE_DOC)
    doc["sweep"] = {"variable": "rate_target", "start": 0.0, "stop": 1.0,
                    "steps": 5}
    p = tmp_path / "sweep.json"
    p.write_text(json.dumps(doc))
    assert main(["rate", str(p)]) == 0
    table = rows(capsys)
    assert len(table) == 6
    vals = [float(r[1]) for r in table[1:]]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_rate_surface_runs_without_feasibility(infeasible_file, capsys):
    assert main(["rate", infeasible_file, "--surface", "--grid", "4"]) == 0
    table = rows(capsys)
    assert table[0] == ["rho1", "rho2", "rate_ccdf"]
    assert len(table) == 17
    assert all(0.0 <= float(r[2]) <= 1.0 for r in table[1:])


def test_rate_requires_rho_when_infeasible(infeasible_file, capsys):
    assert main(["rate", infeasible_file, "--rate-target", "0.1"]) == 1
    assert "infeasible" in capsys.readouterr().err
    assert main(["rate", infeasible_file, "--rate-target", "0.1",
                 "--rho", "0.5,0.5"]) == 0


def test_simulate_command(scenario_file, capsys):
    assert main(["simulate", scenario_file, "--replicates", "4"]) == 0
    table = rows(capsys)
    assert table[0][0] == "estimator"
    assert table[1][0] == "coverage"
    assert 0.0 < float(table[1][3]) < 1.0
    assert main(["simulate", scenario_file, "--estimator", "association",
                 "--replicates", "4"]) == 0
    table = rows(capsys)
    assert [r[0] for r in table[1:]] == ["association", "association"]
    assert main(["simulate", scenario_file, "--estimator", "area",
                 "--tier", "2", "--replicates", "4"]) == 0
    table = rows(capsys)
    assert table[1][1] == "2"
    assert main(["simulate", scenario_file, "--estimator", "area",
                 "--tier", "9", "--replicates", "4"]) == 1


def test_usage_errors(scenario_file, capsys):
    assert main(["availability", "/nonexistent/x.json"]) == 1
    assert main(["frobnicate", scenario_file]) == 1
    assert main(["availability", scenario_file, "--policy2", "k=9"]) == 1
    assert main(["availability", scenario_file, "--policy2", "k=1:99"]) == 1
    assert main(["availability", scenario_file, "--policy2", "k=zap"]) == 1
    assert main(["rate", scenario_file, "--rho", "0.5"]) == 1
    assert main(["rate", scenario_file, "--rho", "a,b"]) == 1
    capsys.readouterr()


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "availability" in capsys.readouterr().out


def test_validate_passes_on_fast_scenario(scenario_file, capsys):
    assert main(["validate", scenario_file]) == 0
    out = capsys.readouterr().out
    assert "all checks passed" in out
    assert "FAIL" not in out
    for name in ("inverse-vs-dense", "availability-ctmc-tier1",
                 "coverage-mc", "service-area-tier1", "association-tier2",
                 "rate-mc"):
        assert any(line.startswith("PASS " + name)
                   for line in out.splitlines()), name


def test_validate_catches_a_broken_constant(scenario_file, capsys,
                                            monkeypatch):
    # simulate a regression: coverage_prob suddenly reports garbage, which
    # the spatial oracle must flag
    monkeypatch.setattr("harvnet.coverage.coverage_prob", lambda sc: 0.9)
    assert main(["validate", scenario_file]) == 3
    out = capsys.readouterr().out
    assert "FAIL coverage-mc" in out
    assert "validation FAILED" in out


def test_module_entry_point(scenario_file):
    proc = subprocess.run(
        [sys.executable, "-m", "harvnet.cli", "coverage", scenario_file],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("sir_target,")
