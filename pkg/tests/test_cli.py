import json
import sys
from dataclasses import replace

import pytest
import yaml
from loguru import logger

from cli import CSV_COLUMNS, EXIT_CHECK, EXIT_INPUT, EXIT_OK, main
from scenarios import ExpectedValue, get_named_scenario, named_scenario_to_json


@pytest.fixture(autouse=True)
def restore_logging():
    yield
    logger.remove()
    logger.add(sys.__stderr__, level="WARNING")


def test_list(capsys):
    assert main(["list"]) == EXIT_OK
    listing = json.loads(capsys.readouterr().out)
    assert "bell" in listing["scenarios"]
    assert "random" in listing["sweep_families"]
    assert "diamond" in listing["checks"]


def test_run_named_scenario_json(capsys):
    assert main(["run", "--scenario", "bell", "--seed", "3"]) == EXIT_OK
    body = json.loads(capsys.readouterr().out)
    assert body["scenario"] == "bell"
    assert body["schema_version"] == 1
    assert body["w_a"] == pytest.approx(0.5, abs=1e-12)
    assert all(e["passed"] for e in body["expectations"])


def test_run_named_scenario_csv(capsys):
    assert main(["run", "--scenario", "classically-correlated", "--format", "csv"]) == EXIT_OK
    out = capsys.readouterr().out
    header, row = out.strip("\n").split("\n")
    columns = header.split(",")
    assert columns[0] == "scenario"
    assert set(columns) <= set(CSV_COLUMNS)
    assert {"w_b", "chi_term_b", "thm4_slack", "wb_slack"} <= set(columns)
    assert row.startswith("classically-correlated,")
    assert "\r" not in out


def test_run_state_level_scenario(capsys):
    assert main(["run", "--scenario", "epsilon-mixture"]) == EXIT_OK
    body = json.loads(capsys.readouterr().out)
    assert body["w_a"] == pytest.approx(0.1, abs=1e-12)


def test_run_scenario_file_and_output(tmp_path):
    source = tmp_path / "bell.json"
    source.write_text(named_scenario_to_json(get_named_scenario("bell")), encoding="utf-8")
    target = tmp_path / "report.json"
    assert main(["run", "--config", str(source), "--output", str(target)]) == EXIT_OK
    assert json.loads(target.read_text(encoding="utf-8"))["scenario"] == "bell"


def test_failed_expectation_exits_with_check_failure(tmp_path):
    wrong = replace(get_named_scenario("bell"), expected=(ExpectedValue("p1", 0.0, 1e-12, "deliberately wrong"),))
    source = tmp_path / "wrong.json"
    source.write_text(named_scenario_to_json(wrong), encoding="utf-8")
    assert main(["run", "--config", str(source)]) == EXIT_CHECK


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--scenario", "no-such-scenario"],
        ["run"],
        ["teleport"],
        ["run", "--scenario", "bell", "--tolerance", "bogus=1"],
        ["run", "--scenario", "bell", "--tolerance", "iq_tol"],
        ["run", "--scenario", "bell", "--format", "xml"],
        ["verify", "--only", "no-such-check"],
    ],
)
def test_input_errors_exit_with_one(argv, capsys):
    assert main(argv) == EXIT_INPUT
    assert capsys.readouterr().err.startswith("error=")


def test_missing_scenario_file(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == EXIT_INPUT
    assert "error=" in capsys.readouterr().err


def test_tolerance_override_is_scoped(capsys):
    from config import get_config

    before = get_config().DECOMPOSITION_TOL
    assert main(["run", "--scenario", "bell", "--tolerance", "decomposition_tol=1e-8"]) == EXIT_OK
    assert get_config().DECOMPOSITION_TOL == before


def test_sweep_csv(tmp_path, capsys):
    spec = tmp_path / "eps.yaml"
    spec.write_text(yaml.safe_dump({"family": "epsilon-mixture", "parameter": "eps",
                                    "start": 0.0, "stop": 0.3, "steps": 4}), encoding="utf-8")
    assert main(["sweep", "--config", str(spec), "--format", "csv"]) == EXIT_OK
    lines = capsys.readouterr().out.strip("\n").split("\n")
    assert len(lines) == 5
    header = lines[0].split(",")
    assert header[:3] == ["scenario", "parameter", "value"]
    w_a = [float(line.split(",")[header.index("w_a")]) for line in lines[1:]]
    assert w_a == pytest.approx([0.0, 0.05, 0.1, 0.15], abs=1e-12)


def test_sweep_json_random_family(tmp_path, capsys):
    spec = tmp_path / "random.json"
    spec.write_text(json.dumps({"family": "random", "start": 0, "stop": 1, "steps": 2}), encoding="utf-8")
    assert main(["sweep", "--config", str(spec), "--seed", "4"]) == EXIT_OK
    body = json.loads(capsys.readouterr().out)
    assert [row["value"] for row in body["rows"]] == [0, 1]
    assert all(-1 <= row["w_b"] <= 1 for row in body["rows"])


@pytest.mark.parametrize(
    "spec",
    [
        {"family": "epsilon-mixture", "start": 0.3, "stop": 0.1, "steps": 3},
        {"family": "epsilon-mixture", "start": 0.0, "stop": 0.1, "steps": 0},
        {"family": "epsilon-mixture", "parameter": "d", "start": 0.0, "stop": 0.1, "steps": 2},
        {"family": "ghz", "start": 0.0, "stop": 1.0, "steps": 2},
    ],
)
def test_invalid_sweeps_exit_with_one(tmp_path, spec):
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps(spec), encoding="utf-8")
    assert main(["sweep", "--config", str(path)]) == EXIT_INPUT


def test_verify_subset(capsys):
    assert main(["verify", "--only", "gamma-equivalence,global-dephasing", "--dims", "2,3"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] is True
    assert [c["name"] for c in report["checks"]] == ["gamma-equivalence", "global-dephasing"]


def test_verify_reports_are_byte_identical_across_runs(tmp_path):
    checks = "isolated-maximum,partial-summation,superchannel"
    first, second = tmp_path / "first.json", tmp_path / "second.json"
    for path in (first, second):
        assert main(["verify", "--only", checks, "--dims", "2", "--seed", "7", "--output", str(path)]) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()
    assert json.loads(first.read_text(encoding="utf-8"))["seed"] == 7


def test_verify_csv(capsys):
    assert main(["verify", "--only", "gamma-equivalence", "--format", "csv"]) == EXIT_OK
    header, row = capsys.readouterr().out.strip("\n").split("\n")
    assert header == "check,passed,slack,cases"
    assert row.startswith("gamma-equivalence,1,")
