import pytest

from helpers import row_violations, status_of, tiny
from smess.fixtures import ieee33_document
from smess.fleet import emit_routing, emit_smess_coupling
from smess.milp import LinExpr, Model
from smess.scenario import parse_scenario


def _routing(scn, coupling=False):
    m = Model("routing")
    emit_routing(m, scn, "carrier")
    if coupling:
        emit_smess_coupling(m, scn)
    return m


@pytest.fixture(scope="module")
def scn33_at_11():
    doc = ieee33_document()
    for c in doc["fleet"]["carriers"]:
        c["start"] = "11"
    for k in doc["fleet"]["modules"]:
        k["start"] = "11"
    return parse_scenario(doc)


# ------------------------------------------------------------------ routing


def test_parked_all_horizon(scn33):
    m = _routing(scn33)
    fixes = {f"x(Carr1,8,{t})": 1 for t in range(13)} | {f"x(Carr2,8,{t})": 1 for t in range(13)}
    assert status_of(m, fixes).status == "optimal"


def test_two_span_trip_exact(scn33_at_11):
    assert scn33_at_11.travel.spans("Carr1", "11", "24") == 2
    m = _routing(scn33_at_11)
    r = status_of(m, {"v(Carr1,24,1)": 1, "x(Carr1,24,3)": 1})
    assert r.status == "optimal"
    s = r.schedule
    assert s.get("v", "Carr1", "24", 2) == 1
    assert s.get("S", "Carr1", 1) == pytest.approx(2)
    assert [s.get("R", "Carr1", t) for t in (1, 2, 3)] == pytest.approx([2, 1, 0])


def test_two_span_trip_cannot_be_shortened(scn33_at_11):
    m = _routing(scn33_at_11)
    assert status_of(m, {"v(Carr1,24,1)": 1, "x(Carr1,24,2)": 1}).status == "infeasible"


def test_exact_travel_forbids_inflated_trip(scn33_at_11):
    base = _routing(scn33_at_11)
    assert status_of(base, {"v(Carr1,24,1)": 1, "v(Carr1,24,3)": 1, "x(Carr1,24,4)": 1}).status == "optimal"
    strict = _routing(scn33_at_11.with_study(exact_travel=True))
    fixes = {"v(Carr1,24,1)": 1, "v(Carr1,24,3)": 1, "x(Carr1,24,4)": 1}
    assert status_of(strict, fixes).status == "infeasible"


def test_one_span_trip_to_29(scn33):
    m = _routing(scn33)
    r = status_of(m, {"v(Carr2,29,1)": 1, "x(Carr2,29,2)": 1})
    assert r.status == "optimal"


# ----------------------------------------------------------------- coupling


def test_idle_carrier_pins_module():
    scn = tiny("tiny_line4")
    D = scn.time.span_count
    for t in range(D + 1):
        m = _routing(scn, coupling=True)
        fixes = {f"v(Carr1,{i},{u})": 0 for i in ("2", "4") for u in range(D + 1)}
        fixes[f"zeta(Mod1,2,{t})"] = 0
        assert status_of(m, fixes).status == "infeasible"
    m = _routing(scn, coupling=True)
    fixes = {f"v(Carr1,{i},{u})": 0 for i in ("2", "4") for u in range(D + 1)}
    assert status_of(m, fixes).status == "optimal"


def test_carrier_capacity(scn33):
    fixes = {f"gamma(Mod{k},Carr1,1)": 1 for k in (1, 2, 3)}
    assert status_of(_routing(scn33, coupling=True), fixes).status == "infeasible"
    fixes.pop("gamma(Mod3,Carr1,1)")
    assert status_of(_routing(scn33, coupling=True), fixes).status == "optimal"


def test_arrival_hands_modules_to_node(scn33):
    m = _routing(scn33, coupling=True)
    fixes = {"v(Carr2,29,1)": 1, "x(Carr2,29,2)": 1, "gamma(Mod2,Carr2,1)": 1, "gamma(Mod3,Carr2,1)": 1}
    for k in (2, 3):
        for name in (f"zeta(Mod{k},29,2)", f"alpha(Carr2,29,Mod{k},2)"):
            m.set_objective(LinExpr.var(m.var_by_name(name), -1.0))  # push towards 0
            r = status_of(m, fixes)
            fixes = {}
            assert r.status == "optimal"
            assert r.values[m.var_by_name(name)] == pytest.approx(1.0)


# ----------------------------------------------------------- row-level checks


def test_soc_dynamics_charge(model33):
    base = {"SOC(Mod1,0)": 0.5, "Pc(Mod1,8,1)": 0.5, "c(Mod1,8,1)": 1, "zeta(Mod1,8,1)": 1}
    sel = lambda con: con.name.endswith("(Mod1,1)")  # noqa: E731
    assert not row_violations(model33, "5d", base | {"SOC(Mod1,1)": 0.7375}, sel)
    assert row_violations(model33, "5d", base | {"SOC(Mod1,1)": 0.74}, sel)


def test_meg_power_rows(model33):
    sel = lambda con: "(MEG1,3,1)" in con.name  # noqa: E731
    disk = lambda con: "(MEG1,1)" in con.name  # noqa: E731
    parked = {"x(MEG1,3,1)": 1, "PG(MEG1,3,1)": 0.8}
    assert not row_violations(model33, "6b", parked, disk)
    assert not row_violations(model33, "6a", parked, sel)
    assert row_violations(model33, "6b", parked | {"QG(MEG1,3,1)": 0.7}, disk)
    assert row_violations(model33, "6a", {"PG(MEG1,3,1)": 0.8}, sel)


def test_extra_fuel_demand(model33):
    # 50 L aboard, a half hour at full load needs 100.3 L -> 50.3 L must come from the site
    sel = lambda con: "(MEG1,1)" in con.name or "(MEG1,3,1)" in con.name  # noqa: E731
    base = {"SOF(MEG1,0)": 0.1, "B(MEG1,3,1)": 100.3, "b(MEG1,1)": 0}
    assert not row_violations(model33, "7f", base | {"Bp(MEG1,3,1)": 50.3}, sel)
    assert row_violations(model33, "7f", base | {"Bp(MEG1,3,1)": 50.0}, sel)
    assert row_violations(model33, "7f", base | {"Bp(MEG1,3,1)": 50.3, "b(MEG1,1)": 1}, sel)


def test_tanker_release(model33):
    vals = {"SOF(FT1,0)": 1.0, "SOF(FT1,1)": 0.0, "Dh(FT1,22,1)": 2000.0, "l(FT1,22,1)": 1,
            "x(FT1,22,1)": 1, "SOF(22,0)": 0.0, "SOF(22,1)": 2000.0 / 5000.0}
    assert not row_violations(model33, "7h", vals, lambda c: c.name.endswith("(FT1,1)"))
    assert not row_violations(model33, "7i", vals, lambda c: c.name.endswith("(22,1)"))
    assert not row_violations(model33, "7m", vals, lambda c: c.name.endswith("(FT1,22,1)"))
    assert row_violations(model33, "7i", vals | {"SOF(22,1)": 0.3}, lambda c: c.name.endswith("(22,1)"))


def test_meg_at_depot_burns_nothing(model33):
    sel = lambda c: c.name.endswith("(MEG1,DP,1)")  # noqa: E731
    assert row_violations(model33, "7b", {"B(MEG1,DP,1)": 1.0}, sel)
    assert not row_violations(model33, "7b", {}, sel)
