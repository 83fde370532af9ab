import json
import math
from fractions import Fraction

import numpy as np
import pytest

import cli
from eval.audit_validate import validate_audits
from eval.schema_validate import validate_report
from fibration.config import RunConfig, parallel_map, parse_floats, parse_params, thread_count
from fibration.errors import DomainError
from fibration.phase_space import STC, IntegralValue
from fibration.report import Report, jsonable, slices_to_csv, to_json


def _run(tmp_path, *argv):
    out = tmp_path / "report.out"
    code = cli.run(list(argv) + ["--out", str(out)])
    text = out.read_text(encoding="utf-8") if out.exists() else None
    return code, text


def _report(tmp_path, *argv):
    code, text = _run(tmp_path, *argv)
    assert text is not None
    report = json.loads(text)
    ok, errors = validate_report(report)
    assert ok, errors
    ok, errors = validate_audits(report)
    assert ok, errors
    return code, report


# ----------------------------
# config
# ----------------------------
def test_parse_params():
    assert parse_params(None) == STC
    assert parse_params("0.5,1.5,1,2").g == 2.0
    with pytest.raises(DomainError):
        parse_params("1,2,3")
    with pytest.raises(DomainError):
        parse_params("a,b,c,d")


def test_parse_floats_count():
    assert parse_floats("1, 2.5,3", 3) == [1.0, 2.5, 3.0]
    with pytest.raises(DomainError):
        parse_floats("1,2", 3)


def test_run_config_validation():
    assert RunConfig(tolerances={"fiber": 1e-8}).tol("fiber") == 1e-8
    assert RunConfig().tol("flow") == 1e-12
    with pytest.raises(DomainError):
        RunConfig(format="xml")
    with pytest.raises(DomainError):
        RunConfig(tolerances={"flow": -1.0})


def test_thread_count_env(monkeypatch):
    monkeypatch.setenv("MONODROMY_LAB_THREADS", "1")
    assert thread_count() == 1
    monkeypatch.setenv("MONODROMY_LAB_THREADS", "many")
    with pytest.raises(DomainError):
        thread_count()


def test_parallel_map_keeps_order():
    assert parallel_map(abs, [-3, 1, -2], processes=1) == [3, 1, 2]


# ----------------------------
# report
# ----------------------------
def test_jsonable_conversions():
    data = {
        "c": 1 + 2j,
        "f": Fraction(7, 2),
        "n": float("nan"),
        "a": np.array([[1, 2]], dtype=np.int64),
        "v": IntegralValue(1.0, 2.0, 3.0),
    }
    out = jsonable(data)
    assert out == {"c": [1.0, 2.0], "f": "7/2", "n": None, "a": [[1, 2]], "v": {"h1": 1.0, "h2": 2.0, "k": 3.0}}


def test_report_passed_and_json():
    r = Report("reduce", STC, 0)
    r.add("ok", 0.0, 1.0)
    assert r.passed
    text = to_json(r)
    assert text.endswith("\n")
    assert text == to_json(r)
    r.add("bad", 2.0, 1.0)
    assert not r.passed
    assert json.loads(to_json(r))["passed"] is False


def test_slices_to_csv():
    rows = slices_to_csv([{
        "k": 1.8,
        "rank2": [[0.1, 0.2]],
        "rank1": [{"family": "l1", "h1": 0.3, "h2": 0.4, "type": "FFR"}],
        "rank0": [{"sigma_u": -1, "sigma_v": 1, "h1": 2.5, "h2": -1.5}],
    }]).splitlines()
    assert rows[0] == "k,rank,family,h1,h2,type"
    assert rows[1] == "1.8,2,,0.1,0.2,"
    assert rows[2] == "1.8,1,l1,0.3,0.4,FFR"
    assert rows[3] == "1.8,0,-1+1,2.5,-1.5,"


# ----------------------------
# commands
# ----------------------------
def test_reduce_command(tmp_path):
    code, report = _report(tmp_path, "reduce", "--k", "1", "--delzant", "--point", "1.0,0.2,2.0,-0.3")
    assert code == 0
    assert report["data"]["delzant"]["area"] == "7/2"
    assert report["data"]["type"] == "CP2#2CP2bar"


def test_reduce_singular_level(tmp_path):
    code, text = _run(tmp_path, "reduce", "--k", "2")
    assert code == 1
    assert text is None


def test_a2_command(tmp_path):
    code, report = _report(tmp_path, "a2", "--loop", "all")
    assert code == 0
    assert report["data"]["loops"]["3"]["matrix"] == [[2, 1], [-1, 0]]
    names = {a["name"] for a in report["audits"]}
    assert {"relation_equal", "loop1.transposition", "loop4.min_separation"} <= names


def test_lax_command_at_c_star(tmp_path):
    code, report = _report(tmp_path, "lax-check", "--trajectory-time", "0")
    assert code == 0
    assert report["data"]["triple_root"]["a1"] == pytest.approx(-1.0, abs=1e-12)
    assert sorted(r["multiplicity"] for r in report["data"]["roots"]) == [3, 3]


def test_flow_command(tmp_path):
    code, report = _report(tmp_path, "flow", "--field", "H1", "--time", "2", "--samples", "4", "--seed", "9")
    assert code == 0
    assert len(report["data"]["states"]) == 5


def test_flow_same_seed_same_bytes(tmp_path):
    a = _run(tmp_path, "flow", "--time", "1", "--samples", "2", "--seed", "4")[1]
    b = _run(tmp_path, "flow", "--time", "1", "--samples", "2", "--seed", "4")[1]
    assert a == b


def test_bifdiag_json_and_csv(tmp_path):
    code, report = _report(tmp_path, "bifdiag", "--k", "1.8", "--samples", "40", "--thread-samples", "10")
    assert code == 0
    assert report["data"]["ffr_counts"] == [{"k": 1.8, "count": 2}]
    assert math.isclose(report["data"]["b_max"], 1.7583, abs_tol=1e-4)

    code, text = _run(tmp_path, "bifdiag", "--k", "1.8", "--samples", "40", "--thread-samples", "10", "--report", "csv")
    assert code == 0
    assert text.splitlines()[0] == "k,rank,family,h1,h2,type"


@pytest.mark.parametrize("argv", [
    ["bifdiag", "--k", "-3"],
    ["flow", "--format", "csv"],
    ["flow", "--tol", "bogus=1"],
    ["flow", "--tol", "flow=abc"],
    ["lax-check", "--family", "l1", "--b", "3"],
    ["fiber", "--value", "1,2"],
    ["monodromy", "--loop", "custom"],
    ["monodromy", "--loop", "gamma1", "--radius", "0"],
    ["monodromy", "--loop", "gamma1", "--radius", "0.01"],
    ["monodromy", "--loop", "gamma1", "--base", "1,2"],
    ["lax-check", "--samples", "0"],
])
def test_errors_exit_one(tmp_path, argv):
    code, text = _run(tmp_path, *argv)
    assert code == 1
    assert text is None


def test_fiber_command(tmp_path):
    code, report = _report(tmp_path, "fiber", "--value", "2,1,1.8")
    assert code == 0
    assert report["data"]["residual"] < 1e-10


# ----------------------------
# validators
# ----------------------------
def test_schema_rejects_extra_field(tmp_path):
    _, report = _report(tmp_path, "reduce", "--k", "3")
    report["extra"] = 1
    ok, errors = validate_report(report)
    assert not ok
    assert any("extra" in e for e in errors)


def test_schema_rejects_bad_enum(tmp_path):
    _, report = _report(tmp_path, "reduce", "--k", "3")
    report["data"]["type"] = "T4"
    ok, _ = validate_report(report)
    assert not ok


def test_audit_validator_catches_passed_flag(tmp_path):
    _, report = _report(tmp_path, "reduce", "--k", "3")
    report["audits"][0]["passed"] = False
    ok, errors = validate_audits(report)
    assert not ok
    assert any("passed=" in e for e in errors)


def test_audit_validator_checks_determinants():
    report = {
        "command": "a2", "passed": True, "audits": [],
        "data": {"loops": {"1": {"matrix": [[2, 0], [0, 1]]}}},
    }
    ok, errors = validate_audits(report)
    assert not ok
    assert errors == ["loop 1: det = 2"]


# ----------------------------
# flags
# ----------------------------
def test_flag_names():
    parser = cli.build_parser()
    args = parser.parse_args(["lax-check", "--trajectory-time", "1.5", "--samples", "7", "--report", "json"])
    assert (args.trajectory_time, args.samples, args.format) == (1.5, 7, "json")
    args = parser.parse_args(["a2", "--verify-normal-form"])
    assert args.verify_normal_form
    args = parser.parse_args(["monodromy", "--loop", "gamma3", "--base", "2,1,1.8", "--radius", "0.4"])
    assert (args.base, args.radius) == ("2,1,1.8", 0.4)
    assert parser.parse_args(["bifdiag", "--k", "1", "--format", "csv"]).format == "csv"


def test_lax_trajectory_samples(tmp_path):
    code, report = _report(tmp_path, "lax-check", "--trajectory-time", "2", "--samples", "5", "--seed", "3")
    assert code == 0
    assert report["data"]["lax_trajectory"]["samples"] == 5
    assert report["data"]["lax_trajectory"]["duration"] == 2.0


def test_monodromy_passes_placement(tmp_path, monkeypatch):
    import pipeline.workflow as workflow

    seen = {}

    def fake_agent(loop_name, params, seed, waypoints=None, **kwargs):
        seen.update(kwargs, loop=loop_name)
        raise DomainError("stop")

    monkeypatch.setattr(workflow, "run_agent", fake_agent)
    code, _ = _run(tmp_path, "monodromy", "--loop", "gamma2", "--base", "2,1.2,1.8", "--radius", "0.3",
                   "--tol", "rounding=1e-5")
    assert code == 1
    assert seen["loop"] == "gamma2"
    assert seen["base"] == IntegralValue(2.0, 1.2, 1.8)
    assert seen["radius"] == 0.3
    assert seen["tolerances"] == {"rounding": 1e-5}


def test_fiber_tolerance_reaches_solver(tmp_path):
    _, loose = _report(tmp_path, "fiber", "--value", "2,1,1.8", "--tol", "fiber=1e-3")
    _, tight = _report(tmp_path, "fiber", "--value", "2,1,1.8", "--tol", "fiber=1e-12")
    assert loose["data"]["residual"] < 1e-3
    assert tight["data"]["residual"] < 1e-12
    assert tight["data"]["residual"] < loose["data"]["residual"]


def test_quiet_run_restores_stdout(tmp_path, capsys):
    import sys

    before = sys.stdout
    code, _ = _run(tmp_path, "reduce", "--k", "3")
    assert code == 0
    assert sys.stdout is before
    assert "Report saved to" in capsys.readouterr().out
