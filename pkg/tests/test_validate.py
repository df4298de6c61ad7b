import json

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from helpers import CASES, TINY, solved, status_of, tiny
from smess.assembly import assemble
from smess.milp import count_by_family
from smess.scenario import parse_scenario
from smess.fixtures import tiny_documents
from smess.validate import (CHECKERS, DimensionError, check_schedule, idle_schedule, recompute_objective,
                            resilience_series)


def _corrupt(name, edits):
    s = solved(name).schedule.copy()
    for fam, idx, value in edits:
        old = s.get(fam, *idx, default=0.0)
        s.set(fam, idx, value(old) if callable(value) else value)
    return s


def _families(name, schedule, case=None):
    return check_schedule(tiny(name), schedule, case=case).families


# ---------------------------------------------------------------- soundness


@pytest.mark.parametrize("name", TINY)
@pytest.mark.parametrize("case", CASES)
def test_solver_schedules_pass(name, case):
    r = solved(name, case)
    rep = check_schedule(tiny(name).with_study(case=case), r.schedule, tol=1e-6)
    assert rep.passed, rep.violations[:5]


def test_checker_covers_every_emitted_family():
    emitted = set()
    for name in TINY:
        for case in CASES:
            scn = tiny(name).with_study(case=case)
            emitted |= set(count_by_family(assemble(scn)).rows_by_family)
        scn = tiny(name).with_study(strict_pickup=True, exact_travel=True)
        emitted |= set(count_by_family(assemble(scn)).rows_by_family)
    assert emitted == set(CHECKERS)


CORRUPTIONS = [
    ("1a", "tiny_meg_fuel", [("x", ("Carr1", "2", 2), 0.0)]),
    ("1b", "tiny_meg_fuel", [("x", ("MEG1", "3", 2), 0.0), ("x", ("MEG1", "4", 2), 1.0)]),
    ("1g", "tiny_meg_fuel", [("x", ("MEG1", "3", 0), 0.0), ("x", ("MEG1", "4", 0), 1.0)]),
    ("2a", "tiny_meg_fuel", [("gamma", ("Mod1", "Carr1", 2), 1.0)]),
    ("2c", "tiny_tie", [("zeta", ("Mod1", "4", 0), 0.0), ("zeta", ("Mod1", "3", 0), 1.0)]),
    ("5a", "tiny_meg_fuel", [("c", ("Mod1", "2", 1), 1.0)]),
    ("5b", "tiny_meg_fuel", [("Pd", ("Mod1", "2", 1), 0.2)]),
    ("5c", "tiny_tie", [("Qs", ("Mod1", "4", 2), 0.3)]),
    ("5d", "tiny_meg_fuel", [("SOC", ("Mod1", 2), lambda s: s + 0.05)]),
    ("5e", "tiny_two_mods", [("SOC", ("Mod1", 0), 0.5), ("SOC", ("Mod1", 1), 0.5)]),
    ("5f", "tiny_meg_fuel", [("SOC", ("Mod1", 3), 0.05)]),
    ("6a", "tiny_meg_fuel", [("PG", ("MEG1", "4", 2), 0.1)]),
    ("6b", "tiny_meg_fuel", [("QG", ("MEG1", "3", 2), 0.4)]),
    ("7b", "tiny_meg_fuel", [("B", ("MEG1", "DP", 1), 5.0)]),
    ("7d", "tiny_meg_fuel", [("B", ("MEG1", "3", 2), 40.0), ("Bp", ("MEG1", "3", 2), 40.0)]),
    ("7f", "tiny_meg_fuel", [("Bp", ("MEG1", "3", 2), 40.0)]),
    ("7h", "tiny_meg_fuel", [("SOF", ("FT1", 3), 0.3)]),
    ("7i", "tiny_meg_fuel", [("SOF", ("3", 2), 0.5)]),
    ("7j", "tiny_meg_fuel", [("l", ("MEG1", "4", 1), 1.0)]),
    ("7l", "tiny_meg_fuel", [("l", ("FT1", "4", 3), 1.0)]),
    ("7n", "tiny_meg_fuel", [("SOF", ("DP", 0), 0.6)]),
    ("8g", "tiny_tie", [("kappa", br + (3,), 1.0) for br in (("1", "2"), ("2", "3"), ("3", "4"),
                                                              ("1", "5"), ("5", "4"))]),
    ("9e", "tiny_meg_fuel", [("delta", ("3", 3), 0.0)]),
    ("9g", "tiny_meg_fuel", [("V2", ("3", 2), 1.5)]),
    ("9i", "tiny_tie", [("delta", ("5", 1), 1.0)]),
    ("9c", "tiny_meg_fuel", [("P", ("2", "3", 2), lambda p: p + 0.1)]),
    ("9m", "tiny_meg_fuel", [("eta", ("4", 2), 0.0)]),
    ("10", "tiny_tie", [("chi", ("1", "2", 2), lambda c: 1.0 - c)]),
]


@pytest.mark.parametrize("family,name,edits", CORRUPTIONS, ids=[c[0] for c in CORRUPTIONS])
def test_single_corruption_names_family(family, name, edits):
    fams = _families(name, _corrupt(name, edits))
    assert family in fams, fams


def test_corruption_suite_size():
    assert len({c[0] for c in CORRUPTIONS}) >= 20


def test_double_owner_is_single_2a_violation():
    s = _corrupt("tiny_tie", [("zeta", ("Mod1", "3", 2), 1.0)])
    rep = check_schedule(tiny("tiny_tie"), s)
    assert [v.family for v in rep.violations] == ["2a"]


@pytest.fixture(scope="module")
def trip_schedule():
    scn = tiny("tiny_two_mods")
    r = status_of(assemble(scn), {"v(Carr1,5,1)": 1})
    assert check_schedule(scn, r.schedule).passed
    assert r.schedule.get("v", "Carr1", "5", 2) == 1 and r.schedule.get("x", "Carr1", "5", 3) == 1
    return r.schedule


def test_shortened_trip_flagged(trip_schedule):
    s = trip_schedule.copy()
    s.set("v", ("Carr1", "5", 2), 0.0)
    s.set("x", ("Carr1", "5", 2), 1.0)
    for k in ("Mod1", "Mod2"):
        if s.get("gamma", k, "Carr1", 2):
            s.set("gamma", (k, "Carr1", 2), 0.0)
            s.set("zeta", (k, "5", 2), 1.0)
    fams = check_schedule(tiny("tiny_two_mods"), s).families
    assert "1d" in fams


def test_inflated_trip_flagged(trip_schedule):
    s = trip_schedule.copy()
    for t in (3, 4):
        s.set("x", ("Carr1", "5", t), 0.0)
        s.set("v", ("Carr1", "5", t), 1.0)
    assert {"1c", "xtravel"} & check_schedule(tiny("tiny_two_mods"), s).families


def test_dimension_mismatch():
    s = solved("tiny_line4").schedule.copy()
    s.span_count = 7
    with pytest.raises(DimensionError):
        check_schedule(tiny("tiny_line4"), s)


def test_report_serializations():
    s = _corrupt("tiny_tie", [("zeta", ("Mod1", "3", 2), 1.0)])
    rep = check_schedule(tiny("tiny_tie"), s)
    doc = json.loads(rep.to_json())
    assert doc["pass"] is False and doc["violations"][0]["family"] == "2a"
    assert rep.to_tsv().splitlines()[0].split("\t")[0] == "family"
    assert rep.max_residual > 0


# ------------------------------------------------------- objective, series


def test_idle_schedule_is_zero():
    scn = tiny("tiny_line4")
    s = idle_schedule(scn)
    assert check_schedule(scn, s).passed
    assert recompute_objective(scn, s).as_tuple() == (0.0, 0.0, 0.0)
    ser = resilience_series(scn, s)
    assert list(ser.served_kw) == [0.0] * scn.time.span_count


@pytest.mark.parametrize("name", TINY)
def test_case5_dominates_case1_cumulative(name):
    scn = tiny(name)
    c1 = resilience_series(scn, solved(name, "Case1").schedule)
    c5 = resilience_series(scn, solved(name, "Case5").schedule)
    assert all(b >= a - 1e-6 for a, b in zip(c1.cumulative_restored, c5.cumulative_restored))


@pytest.mark.parametrize("name", TINY)
def test_cumulative_restored_non_decreasing(name):
    ser = resilience_series(tiny(name), solved(name).schedule)
    assert len(ser.served_kw) == tiny(name).time.span_count
    assert all(b >= a for a, b in zip(ser.cumulative_restored, ser.cumulative_restored[1:]))


def test_repaired_final_span_serves_everything():
    scn = tiny("tiny_tie")
    ser = resilience_series(scn, solved("tiny_tie").schedule)
    total = sum(n.weight * n.p_kw[-1] for n in scn.network.nodes)
    assert ser.served_kw[-1] == pytest.approx(total)


def test_decomposition_shape():
    t = recompute_objective(tiny("tiny_meg_fuel"), solved("tiny_meg_fuel").schedule)
    assert set(t.travel_spans) == {"carrier", "generator", "tanker"}
    assert set(t.exchange_spans) == {"generator", "tanker"}
    assert t.total == pytest.approx(t.restored - t.travel_penalty - t.fuel_penalty)


def test_series_outputs():
    ser = resilience_series(tiny("tiny_tie"), solved("tiny_tie").schedule)
    assert len(ser.to_tsv().splitlines()) == 1 + tiny("tiny_tie").time.span_count
    assert [r["served_kw"] for r in json.loads(ser.to_json())] == list(ser.served_kw)


# ------------------------------------------------------------ properties


@settings(max_examples=80, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(name=st.sampled_from(TINY), data=st.data())
def test_binary_flip_is_caught_or_harmless(name, data):
    """Flipping one binary either keeps the schedule valid or yields a labelled violation."""
    s = solved(name).schedule.copy()
    fams = sorted(f for f in ("x", "v", "zeta", "gamma", "c", "d", "delta", "eta", "kappa", "mu", "l", "b")
                  if s.values.get(f))
    fam = data.draw(st.sampled_from(fams))
    idx = data.draw(st.sampled_from(sorted(s.values[fam], key=str)))
    s.set(fam, idx, 1.0 - s.values[fam][idx])
    rep = check_schedule(tiny(name), s)
    assert all(v.family in CHECKERS and v.residual >= 0 for v in rep.violations)
    assert rep.passed == (not rep.violations)
    if rep.passed:
        assert recompute_objective(tiny(name), s).total <= solved(name).objective + 1e-6


@settings(max_examples=40, deadline=None)
@given(scale=st.floats(1.0001, 3.0), name=st.sampled_from(["tiny_meg_fuel", "tiny_two_mods", "tiny_tie"]))
def test_scaled_module_power_is_caught(scale, name):
    s = solved(name).schedule.copy()
    scn = tiny(name)
    k = scn.fleet.modules[0]
    i, t = next((i, t) for i in scn.access.storage_nodes for t in range(1, scn.time.span_count + 1)
                if s.get("zeta", k.id, i, t) == 1)
    cap = k.p_discharge_max_kw / scn.network.base_kva
    s.set("d", (k.id, i, t), 1.0)
    s.set("c", (k.id, i, t), 0.0)
    s.set("Pd", (k.id, i, t), cap * scale)
    assert "5b" in check_schedule(scn, s).families


def test_strict_pickup_flag_changes_rows():
    doc = tiny_documents()["tiny_feeder6"]
    doc["study"]["strict_pickup"] = True
    scn = parse_scenario(doc)
    assert "xpickup" in count_by_family(assemble(scn)).rows_by_family
