import networkx as nx
import pytest

from helpers import TINY, solved, status_of, tiny, tiny_variant
from smess.assembly import (Cardinalities, apply_case_variant, assemble, structure_check, table1_by_family,
                            table1_closed_form)
from smess.lpformat import write_model
from smess.milp import count_by_family
from smess.scenario import fault_sets_at
from smess.validate import recompute_objective


def _single_load(doc):
    doc["time"]["span_count"] = 12
    doc["faults"] = []
    for n in doc["network"]["nodes"]:
        n["p_kw"], n["q_kvar"], n["weight"] = 0.0, 0.0, 1
    doc["network"]["nodes"][3].update(p_kw=100.0, q_kvar=10.0, weight=5)
    doc["study"].update(phi_travel=0.0, phi_fuel=0.0)


def test_objective_single_load_full_horizon():
    scn = tiny_variant("tiny_line4", _single_load)
    r = status_of(assemble(scn))
    assert r.status == "optimal"
    assert r.objective == pytest.approx(3000.0)
    assert recompute_objective(scn, r.schedule).restored == pytest.approx(3000.0)


def test_zero_loads_idle_objective():
    def zero(doc):
        for n in doc["network"]["nodes"]:
            n["p_kw"] = 0.0
    scn = tiny_variant("tiny_line4", zero)
    assert status_of(assemble(scn)).objective == pytest.approx(0.0)


def test_baseline_penalties_accepted():
    scn = tiny("tiny_line4")
    assert scn.study.phi_travel == 0.1 and scn.study.phi_fuel == 0.1


def test_case5_adds_no_rows():
    scn = tiny("tiny_meg_fuel")
    m = assemble(scn, case="Case1")
    assert apply_case_variant(m, scn, "Case5") == 0
    assert "case" not in count_by_family(assemble(scn, case="Case5")).rows_by_family


def test_unknown_case_rejected():
    scn = tiny("tiny_line4")
    with pytest.raises(ValueError):
        apply_case_variant(assemble(scn), scn, "Case9")


def _substation_only_value(scn) -> float:
    """Weighted energy of every node reachable from the substation through healthy branches."""
    if not scn.study.substation_energized:
        return 0.0
    net, dt, total = scn.network, scn.time.span_length_h, 0.0
    for t in range(1, scn.time.span_count + 1):
        f = fault_sets_at(scn, t)
        g = nx.Graph()
        g.add_nodes_from(i for i in net.node_ids if i not in f.nodes_open)
        g.add_edges_from(b.key for b in net.branches
                         if b.key not in f.branches_open and not set(b.key) & f.nodes_open)
        for i in nx.node_connected_component(g, net.substation):
            n = net.node(i)
            total += n.weight * n.p_kw[t - 1] * dt
    return total


@pytest.mark.parametrize("name", TINY)
def test_case1_is_substation_only(name):
    scn = tiny(name).with_study(case="Case1")
    r = solved(name, "Case1")
    assert recompute_objective(scn, r.schedule).restored == pytest.approx(_substation_only_value(scn), abs=1e-6)


@pytest.mark.parametrize("name", TINY)
def test_tiny_models_are_small(name):
    c = count_by_family(assemble(tiny(name)))
    assert c.binary + c.continuous < 5000


def test_table1_structure_33(scn33, model33):
    check = structure_check(model33, scn33)
    assert check.ok, check.mismatches
    card = Cardinalities.of(scn33)
    assert (card.T, card.N, card.L, card.NS, card.NG, card.NDP) == (12, 33, 37, 4, 3, 1)
    assert (card.MS, card.K, card.MG, card.MF) == (2, 4, 1, 1)
    ref = table1_by_family(card)
    closed = table1_closed_form(card)
    assert sum(ref["binary"].values()) == closed["binary"]
    assert sum(ref["continuous"].values()) == closed["continuous"]
    assert sum(ref["rows"].values()) == closed["constraints"]


def test_table1_exact_without_deviation_families(scn33, model33):
    check = structure_check(model33, scn33)
    touched = {f for d in check.itemized for part in (d.binary, d.continuous, d.rows) for f in part}
    counts = count_by_family(model33)
    for fam, n in table1_by_family(check.cardinalities)["rows"].items():
        if fam not in touched:
            assert counts.rows_by_family.get(fam, 0) == n, fam


def test_disk_segments_deviation_tracks_k(scn33):
    for k in (4, 12):
        scn = scn33.with_study(disk_segments=k)
        check = structure_check(assemble(scn), scn)
        assert check.ok
        assert "disk_segments" in {d.name for d in check.itemized}
    assert "disk_segments" not in {d.name for d in structure_check(assemble(scn33), scn33).itemized}


def test_assembly_is_deterministic():
    scn = tiny("tiny_meg_fuel")
    assert write_model(assemble(scn)) == write_model(assemble(scn))
