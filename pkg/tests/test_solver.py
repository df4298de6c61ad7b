import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import TINY, solved, status_of, tiny, tiny_variant
from smess.assembly import assemble
from smess.lpformat import read_model, write_model
from smess.milp import BINARY, EQ, GE, LE, LinExpr, Model
from smess.solver import (BackendError, IntegralityError, Schedule, SolveOptions, cbc_path, extract_schedule,
                          parse_cbc_solution, solve)
from smess.validate import recompute_objective


def _cbc_available():
    try:
        cbc_path()
        return True
    except BackendError:
        return False


needs_cbc = pytest.mark.skipif(not _cbc_available(), reason="CBC executable not available")


# ------------------------------------------------------------------ LP text


def test_empty_model_document():
    doc = read_model(write_model(Model("empty")))
    assert doc.rows == [] and doc.objective == {} and doc.sense == "max"


def test_lp_round_trip_tiny():
    m = assemble(tiny("tiny_meg_fuel"))
    doc = read_model(write_model(m))
    names = [v.name for v in m.vars]
    assert len(doc.rows) == len(m.constraints)
    for con, row in zip(m.constraints, doc.rows):
        assert row.name == con.name and row.sense == con.sense and row.rhs == con.rhs
        assert row.terms == {names[v]: c for v, c in con.terms}
    assert doc.objective == {names[v]: c for v, c in m.objective.normalized()}
    assert set(doc.binaries) == {v.name for v in m.vars if v.kind == BINARY}
    assert all(doc.bounds[v.name] == (v.lb, v.ub) for v in m.vars if v.kind != BINARY)


_coef = st.floats(-1e3, 1e3, allow_nan=False).filter(lambda c: c != 0)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 6), rows=st.lists(st.tuples(st.lists(st.tuples(st.integers(0, 5), _coef), min_size=1,
                                                            max_size=4),
                                                   st.sampled_from([LE, GE, EQ]), st.floats(-1e4, 1e4)),
                                         max_size=8))
def test_lp_round_trip_property(n, rows):
    m = Model("prop")
    for k in range(n):
        m.add_var("y", (k,), BINARY if k % 2 else "continuous", lb=-5 if k % 3 == 0 else 0)
    for r, (terms, sense, rhs) in enumerate(rows):
        m.add_row("p", (r,), [(v % n, c) for v, c in terms], sense, rhs)
    m.set_objective(LinExpr.var(0, 2.5))
    doc = read_model(write_model(m))
    for con, row in zip(m.constraints, doc.rows):
        assert row.terms == pytest.approx({m.vars[v].name: c for v, c in con.terms})
        assert row.rhs == con.rhs and row.sense == con.sense


def test_write_is_byte_stable():
    m = assemble(tiny("tiny_tie"))
    assert write_model(m) == write_model(m)
    assert write_model(m).decode().splitlines()[1] == "Maximize"


# -------------------------------------------------------------------- solve


def test_highs_reads_lp_text_identically():
    scn = tiny("tiny_tie")
    r = solve(assemble(scn), SolveOptions(gap=0.0, from_lp_file=True), scn.time.span_count)
    assert r.objective == pytest.approx(solved("tiny_tie").objective, abs=1e-6)


@needs_cbc
@pytest.mark.parametrize("name", TINY)
def test_two_backends_agree(name):
    a, b = solved(name), solved(name, backend="cbc")
    assert a.status == b.status == "optimal"
    assert a.objective == pytest.approx(b.objective, abs=1e-6)


def test_infeasible_two_owners():
    m = assemble(tiny("tiny_line4"))
    r = status_of(m, {"zeta(Mod1,2,1)": 1, "zeta(Mod1,4,1)": 1})
    assert r.status == "infeasible" and r.schedule is None and not r.has_incumbent


def test_solve_does_not_mutate_model():
    m = assemble(tiny("tiny_line4"))
    before = write_model(m)
    solve(m, SolveOptions(gap=0.0))
    assert write_model(m) == before


def test_fixed_seed_is_deterministic():
    scn = tiny("tiny_meg_fuel")
    m = assemble(scn)
    a = solve(m, SolveOptions(gap=0.0, seed=3), scn.time.span_count)
    b = solve(m, SolveOptions(gap=0.0, seed=3), scn.time.span_count)
    assert np.array_equal(a.values, b.values)


def test_missing_backend(monkeypatch):
    monkeypatch.setenv("SMESS_CBC", "/nonexistent/cbc")
    with pytest.raises(BackendError):
        solve(assemble(tiny("tiny_line4")), SolveOptions(backend="cbc"))
    with pytest.raises(BackendError):
        solve(assemble(tiny("tiny_line4")), SolveOptions(backend="gurobi"))


def test_crashing_backend_surfaces_diagnostics(monkeypatch, tmp_path):
    fake = tmp_path / "cbc"
    fake.write_text("#!/bin/sh\necho boom >&2\nexit 7\n")
    fake.chmod(0o755)
    monkeypatch.setenv("SMESS_CBC", str(fake))
    with pytest.raises(BackendError) as exc:
        solve(assemble(tiny("tiny_line4")), SolveOptions(backend="cbc"))
    assert "boom" in exc.value.diagnostics


def test_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(gap=1.5)
    with pytest.raises(ValueError):
        SolveOptions(time_limit=0)


def test_parse_cbc_solution_grammar():
    text = "Optimal - objective value 12.5\n      0 x(a,1)   1   0\n**    3 y(b)   2.5   0\n"
    assert parse_cbc_solution(text) == ("optimal", {"x(a,1)": 1.0, "y(b)": 2.5})
    assert parse_cbc_solution("Infeasible - objective value 0\n")[0] == "infeasible"
    assert parse_cbc_solution("Stopped on time - objective value 3\n")[0] == "time-limit"
    assert parse_cbc_solution("")[0] == "error"


# ------------------------------------------------------------------ extract


def test_extract_rejects_fractional_binary():
    m = Model()
    m.add_var("b", (1,), BINARY)
    with pytest.raises(IntegralityError):
        extract_schedule(m, [0.4999])
    assert extract_schedule(m, [1 - 5e-5]).near_integral_fixes == 1
    with pytest.raises(ValueError):
        extract_schedule(m, [0.0, 1.0])


def test_all_zero_vector_is_idle():
    def no_load(doc):
        for n in doc["network"]["nodes"]:
            n["p_kw"] = 0.0
    scn = tiny_variant("tiny_line4", no_load)
    m = assemble(scn)
    s = extract_schedule(m, np.zeros(len(m.vars)), scn.time.span_count)
    assert recompute_objective(scn, s).as_tuple() == (0.0, 0.0, 0.0)


@pytest.mark.parametrize("name", TINY)
def test_soc_series_matches_dynamics(name):
    scn, s = tiny(name), solved(name).schedule
    dt, base = scn.time.span_length_h, scn.network.base_kva
    for k in scn.fleet.modules:
        soc = k.soc_init
        for t in range(1, scn.time.span_count + 1):
            pc = sum(s.get("Pc", k.id, i, t) for i in scn.access.storage_nodes) * base
            pd = sum(s.get("Pd", k.id, i, t) for i in scn.access.storage_nodes) * base
            soc += (k.eff_charge * pc - pd / k.eff_discharge) * dt / k.energy_kwh
            assert s.get("SOC", k.id, t) == pytest.approx(soc, abs=1e-6)


def test_schedule_document_round_trip(tmp_path):
    s = solved("tiny_meg_fuel").schedule
    s.dump(tmp_path / "s.json")
    again = Schedule.load(tmp_path / "s.json")
    assert again.values == s.values and again.span_count == s.span_count
    json.loads((tmp_path / "s.json").read_text())


def test_incumbent_matches_recomputed_objective():
    for name in TINY:
        r = solved(name)
        assert recompute_objective(tiny(name), r.schedule).total == pytest.approx(r.objective, abs=1e-6)
