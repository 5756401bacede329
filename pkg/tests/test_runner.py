import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from semipert.cli import main
from semipert.errors import ConfigError
from semipert.runner import (
    ExperimentConfig, build_rde, build_wentzell, compare_reports, compile_expression, diff_is_empty, record, run,
    strip_volatile, write_outputs,
)


def test_expression_sandbox():
    f = compile_expression("sqrt(s*(1-s)) + pi", "s")
    assert f(np.array([0.5]))[0] == pytest.approx(0.5 + math.pi)
    assert compile_expression(2, "s")(np.zeros(3)).tolist() == [2.0, 2.0, 2.0]
    for bad in ("__import__('os')", "open('x')", "s.__class__", "r + 1"):
        with pytest.raises(ConfigError):
            compile_expression(bad, "s")
    with pytest.raises(ConfigError):
        compile_expression("s +", "s")


@pytest.mark.parametrize("data,field", [
    ({}, "seed"),
    ({"seed": -1}, "seed"),
    ({"seed": 0, "mesh_family": [64, 32]}, "mesh_family"),
    ({"seed": 0, "mesh_family": [64]}, "mesh_family"),
    ({"seed": 0, "tolerances": {"x": 0}}, "tolerances.x"),
    ({"seed": 0, "workers": 0}, "workers"),
    ({"seed": 0, "bogus": 1}, "config"),
    ({"seed": 0, "kind": "rde-solve"}, "kind"),
])
def test_config_validation_names_field(data, field):
    with pytest.raises(ConfigError) as exc:
        ExperimentConfig.from_mapping(data, kind="admissibility-audit")
    assert exc.value.field == field


def test_problem_builders():
    prob = build_wentzell({"a": "sqrt(s*(1-s))", "phi1": {"points": [[0.5, -0.25]]}, "holder_delta": 0.5})
    prob.validate()
    assert build_wentzell({}).name == "wentzell-canonical"
    with pytest.raises(ConfigError, match="p must lie"):
        build_rde({"p": 2.0})
    rp = build_rde({"mu": {"atoms": [[-1.0, 0.5]], "density": "exp(r)"}})
    assert rp.mu.total_variation > 0.5
    with pytest.raises(ConfigError):
        build_rde({"mu": {"atoms": [[0.0, 1.0]]}})


def test_record_verdicts_restricted():
    with pytest.raises(ValueError):
        record("x", "y", "MAYBE")
    r = record("x", "y", "PASS", {"v": np.float64(math.inf)}, {"r": [np.float64(1.0)]})
    assert r["constants"]["v"] == "inf" and r["residuals"]["r"] == [1.0]


def test_compare_reports():
    base = {"kind": "k", "checks": [record("a", "x", "PASS", {"c": 1.0}), record("b", "x", "PASS")]}
    same = json.loads(json.dumps(base))
    assert diff_is_empty(compare_reports(base, same))
    cand = json.loads(json.dumps(base))
    cand["checks"][0]["verdict"] = "FAIL"
    cand["checks"][0]["constants"]["c"] = 1.2
    d = compare_reports(base, cand)
    assert d["verdict_flips"][0]["check"] == "a"
    assert d["drifts"][0]["quantity"] == "constants.c"
    assert compare_reports(base, cand, rel_tol=0.5)["drifts"] == []
    with pytest.raises(ConfigError):
        compare_reports(base, {"kind": "other", "checks": []})


def test_solve_de_run_is_deterministic(tmp_path):
    cfg = ExperimentConfig.from_mapping({"seed": 1, "mesh_family": [32], "time": {"t_final": 0.5, "steps": 5}},
                                        kind="wentzell-solve")
    a, b = run(cfg), run(cfg)
    assert strip_volatile(a) == strip_volatile(b)
    paths = write_outputs(a, tmp_path)
    rows = list(csv.reader(open(paths["trajectory"])))
    assert rows[0][:2] == ["mesh", "time"] and len(rows) == 7
    rep = json.load(open(paths["report"]))
    assert rep["schema_version"] and "timestamp" in rep["volatile"]
    assert all(c["anchor"] for c in rep["checks"])


def test_partial_failure_emits_fail_record():
    # initial data that does not vanish at s = pi fails inside the task
    cfg = ExperimentConfig.from_mapping(
        {"seed": 0, "mesh_family": [8], "problem": {"initial": "1 + s"}, "time": {"t_final": 0.1, "steps": 2}},
        kind="rde-solve")
    rep = run(cfg)
    assert rep["verdict"] == "FAIL"
    assert "error" in rep["checks"][0]


def test_cli_end_to_end(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("kind: wentzell-solve\nseed: 3\nproblem: {initial: 'sin(pi*s)'}\ntime: {t_final: 0.2, steps: 4}\n")
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["solve-de", "--config", str(cfg), "--mesh-family", "32", "--out", str(out1)]) == 0
    assert main(["solve-de", "--config", str(cfg), "--mesh-family", "32", "--out", str(out2),
                 "--workers", "2", "--no-trajectory"]) == 0
    assert (out1 / "trajectory.csv").exists() and not (out2 / "trajectory.csv").exists()
    assert main(["diff", str(out1 / "report.json"), str(out2 / "report.json")]) == 0
    assert main(["solve-de", "--seed", "1", "--config", str(cfg), "--mesh-family", "64,32"]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("problem: {a: 's'}\n")
    assert main(["solve-de", "--seed", "1", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2
    err = capsys.readouterr().err
    assert "problem.a" in err and "integrable" in err
    bad.write_text("problem: {p: 2.0}\n")
    assert main(["solve-rde", "--seed", "1", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2
    assert "gamma window" in capsys.readouterr().err
