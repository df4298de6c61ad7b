import json

import pytest

from smess.cli import main
from smess.fixtures import ieee33_path, tiny_paths


def _tiny(name):
    return str(next(p for p in tiny_paths() if p.stem == name))


def test_build_writes_model_and_counts(tmp_path, capsys):
    assert main(["build", "--scenario", str(ieee33_path()), "--out", str(tmp_path)]) == 0
    counts = json.loads((tmp_path / "counts.json").read_text())
    assert counts["ok"] and counts["cardinalities"]["N"] == 33
    assert (tmp_path / "model.lp").read_bytes().startswith(b"\\ ieee33")
    out = capsys.readouterr().out
    assert "deviation fuel_segment" in out and "deviation substation_injection" in out


def test_build_is_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["build", "--scenario", _tiny("tiny_meg_fuel"), "--out", str(d)]) == 0
    for f in ("model.lp", "counts.json"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    assert json.loads((a / "meta.json").read_text())["build"]["version"]


def test_solve_validate_round_trip(tmp_path):
    scn = _tiny("tiny_tie")
    assert main(["solve", "--scenario", scn, "--out", str(tmp_path), "--gap", "0"]) == 0
    result = json.loads((tmp_path / "result.json").read_text())
    assert result["status"] == "optimal" and result["objective"] == pytest.approx(1100.0)
    assert "seconds" not in result
    assert main(["validate", "--scenario", scn, "--schedule", str(tmp_path / "schedule.json"),
                 "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "report.json").read_text())["pass"] is True
    assert (tmp_path / "resilience.tsv").read_text().startswith("span\t")


def test_validate_failure_exit_code(tmp_path):
    scn = _tiny("tiny_tie")
    main(["solve", "--scenario", scn, "--out", str(tmp_path), "--gap", "0"])
    doc = json.loads((tmp_path / "schedule.json").read_text())
    bad = tmp_path / "bad.json"
    doc["values"]["delta"] = [row if row[:2] != ["5", 1] else ["5", 1, 1.0] for row in doc["values"]["delta"]]
    bad.write_text(json.dumps(doc))
    code = main(["validate", "--scenario", scn, "--schedule", str(bad), "--out", str(tmp_path / "v")])
    assert code == 1
    assert "9i" in (tmp_path / "v" / "report.tsv").read_text()


def test_compare_writes_table(tmp_path):
    scn = _tiny("tiny_line4")
    assert main(["compare", "--scenario", scn, "--out", str(tmp_path), "--gap", "0",
                 "--cases", "Case1", "Case5"]) == 0
    rows = (tmp_path / "compare.tsv").read_text().splitlines()
    assert rows[0].startswith("case\tstatus\tobjective") and len(rows) == 3
    curves = (tmp_path / "curves.tsv").read_text().splitlines()
    assert len(curves) == 1 + 3


def test_flags_reach_the_model(tmp_path):
    scn = _tiny("tiny_line4")
    assert main(["solve", "--scenario", scn, "--out", str(tmp_path), "--gap", "0", "--phi-travel", "1000",
                 "--phi-fuel", "1000", "--disk-segments", "16", "--case", "Case5"]) == 0
    terms = json.loads((tmp_path / "result.json").read_text())["terms"]
    assert terms["travel_penalty"] == 0


def test_input_errors(tmp_path, capsys):
    assert main(["solve", "--scenario", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["solve", "--scenario", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["solve", "--scenario", _tiny("tiny_tie"), "--gap", "2", "--out", str(tmp_path)]) == 2
    assert main(["validate", "--scenario", _tiny("tiny_tie"), "--schedule", str(tmp_path / "none.json"),
                 "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_backend_error_exit_code(tmp_path, monkeypatch):
    monkeypatch.setenv("SMESS_CBC", str(tmp_path / "no-cbc"))
    assert main(["solve", "--scenario", _tiny("tiny_tie"), "--backend", "cbc", "--out", str(tmp_path)]) == 3


def test_infeasible_exit_code(tmp_path):
    doc = json.loads(open(_tiny("tiny_tie")).read())
    doc["fleet"]["modules"][0]["soc_init"] = 0.05  # below soc_min: parsed, but no feasible SOC path
    path = tmp_path / "s.json"
    path.write_text(json.dumps(doc))
    assert main(["solve", "--scenario", str(path), "--out", str(tmp_path)]) == 1
    assert json.loads((tmp_path / "result.json").read_text())["status"] == "infeasible"
