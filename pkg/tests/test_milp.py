import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import status_of
from smess.milp import (BINARY, EQ, LE, LinExpr, Model, ModelError, and_product, count_by_family,
                        piecewise_bigM, polygonal_disk)
from smess.scenario import parse_scenario
from smess.fixtures import tiny_documents
from smess.bigm import fuel_segments


def _and_model(n, polarity=None):
    m = Model("and")
    lits = [m.add_var("b", (k,), BINARY) for k in range(n)]
    pol = polarity or [True] * n
    z = and_product(m, [(v, p) for v, p in zip(lits, pol)], "z", ())
    return m, lits, z


@pytest.mark.parametrize("bits", list(itertools.product((0, 1), repeat=3)))
def test_and_product_truth_table(bits):
    m, lits, z = _and_model(3)
    for v, b in zip(lits, bits):
        m.add_row("fix", (v,), [(v, 1.0)], EQ, b)
    m.set_objective(LinExpr.var(z))  # maximize z: must still equal AND
    r = status_of(m)
    assert r.status == "optimal"
    assert r.values[z] == pytest.approx(float(all(bits)))
    m.set_objective(LinExpr.var(z, -1.0))
    assert status_of(m).values[z] == pytest.approx(float(all(bits)))


def test_and_product_negated_literal_arrival_pattern():
    # alpha = (not x_prev) and x_now and gamma_prev
    m, (xp, xn, g), z = _and_model(3, [False, True, True])
    for v, b in zip((xp, xn, g), (0, 1, 1)):
        m.add_row("fix", (v,), [(v, 1.0)], EQ, b)
    m.set_objective(LinExpr.var(z, -1.0))
    assert status_of(m).values[z] == pytest.approx(1.0)


def test_and_product_rejects_continuous_and_single_literal():
    m = Model()
    a = m.add_var("a", (), BINARY)
    c = m.add_var("c", ())
    with pytest.raises(ModelError):
        and_product(m, [a, c], "z", ())
    with pytest.raises(ModelError):
        and_product(m, [a], "z", ())


def _disk(k, radius=1.0):
    m = Model()
    x = m.add_var("x", ())
    y = m.add_var("y", ())
    rows = polygonal_disk(m, LinExpr.var(x), LinExpr.var(y), radius, k, "disk", ())
    return rows


def _inside(rows, px, py, tol=1e-9):
    return all(r.violation([px, py]) <= tol for r in rows)


def test_disk_square_points():
    rows = _disk(4)
    assert len(rows) == 4
    assert _inside(rows, 0.9, 0.0)
    assert not _inside(rows, 0.6, 0.6)
    # the k=4 polygon is |x| + |y| <= 1
    assert _inside(rows, 0.5, 0.5)
    assert not _inside(rows, 0.5, 0.5 + 1e-6)


def test_disk_axis_vertex_k8():
    rows = _disk(8, 0.527)
    assert _inside(rows, 0.527, 0.0)
    assert not _inside(rows, 0.527 + 1e-6, 0.0)


def test_meg_rating_disk():
    rows = _disk(8, 1.0)
    assert _inside(rows, 0.8, 0.0)
    assert math.hypot(0.8, 0.7) > 1.0
    assert not _inside(rows, 0.8, 0.7)


@settings(max_examples=200, deadline=None)
@given(k=st.sampled_from([4, 6, 8, 12, 16, 32]), angle=st.floats(0, 2 * math.pi), frac=st.floats(0, 1.5))
def test_disk_is_inner_approximation(k, angle, frac):
    rows = _disk(k)
    px, py = frac * math.cos(angle), frac * math.sin(angle)
    if _inside(rows, px, py, tol=0.0):
        assert math.hypot(px, py) <= 1.0 + 1e-12
    if frac <= math.cos(math.pi / k) - 1e-9:
        assert _inside(rows, px, py)


def test_disk_rejects_bad_segments():
    with pytest.raises(ModelError):
        _disk(6, -1.0)
    with pytest.raises(ModelError):
        _disk(5)


def _fuel_model(p_kw):
    doc = tiny_documents()["tiny_meg_fuel"]
    g = doc["fleet"]["generators"][0]
    g.update(p_max_kw=800, s_rated_kva=1000, q_max_kvar=600, fuel_capacity_l=500,
             fuel_curve=[{"p_kw": p, "rate_l_per_h": r}
                         for p, r in [(200, 64.4), (400, 109.8), (600, 155.2), (800, 200.6)]])
    scn = parse_scenario(doc)
    bps, ys, zs = fuel_segments(scn, "MEG1")
    m = Model()
    val = m.add_var("B", ())
    drv = m.add_var("P", ())
    hi = scn.fleet.generators[0].fuel_max_per_span_l
    piecewise_bigM(m, LinExpr.var(val), LinExpr.var(drv), bps, ys, zs, 1000.0, ("MEG1", 1),
                   (0.0, hi), (0.0, bps[-1]))
    m.add_row("fix", (), [(drv, 1.0)], EQ, p_kw / scn.network.base_kva)
    m.set_objective(LinExpr.var(val))
    up = status_of(m).values[val]
    m.set_objective(LinExpr.var(val, -1.0))
    lo = status_of(m).values[val]
    return up, lo, scn.time.span_length_h


@pytest.mark.parametrize("p_kw,rate", [(300, 87.1), (400, 109.8), (800, 200.6)])
def test_piecewise_fuel_curve(p_kw, rate):
    up, lo, dt = _fuel_model(p_kw)
    assert up == pytest.approx(lo, abs=1e-6)
    assert up / dt == pytest.approx(rate, abs=1e-6)


def test_piecewise_rejects_small_bigm_and_bad_breakpoints():
    m = Model()
    v, d = m.add_var("B", ()), m.add_var("P", ())
    with pytest.raises(ModelError):
        piecewise_bigM(m, LinExpr.var(v), LinExpr.var(d), [0, 1, 2], [1, 1], [0, 0], 0.1, (), (0, 10), (0, 2))
    with pytest.raises(ModelError):
        piecewise_bigM(m, LinExpr.var(v), LinExpr.var(d), [0, 2, 1], [1, 1], [0, 0], 100, (), (0, 10), (0, 2))


def test_count_by_family_empty_and_simple():
    c = count_by_family(Model())
    assert (c.binary, c.continuous, c.constraints) == (0, 0, 0)
    m = Model()
    a = m.add_var("a", (1,), BINARY)
    b = m.add_var("b", (1,))
    m.add_row("k", (1,), [(a, 1.0), (b, 1.0)], LE, 1.0)
    c = count_by_family(m)
    assert (c.binary, c.continuous, c.constraints) == (1, 1, 1)
    assert c.rows_by_family == {"k": 1}


def test_model_errors():
    m = Model()
    m.add_var("a", (1,))
    with pytest.raises(ModelError):
        m.add_var("a", (1,))
    with pytest.raises(ModelError):
        m.add_var("b", (), lb=2, ub=1)
    with pytest.raises(ModelError):
        m.add_row("r", (), [(5, 1.0)], LE, 0)
    with pytest.raises(ModelError):
        m.set_objective(LinExpr.var(7))


def test_linexpr_constant_moves_to_rhs():
    m = Model()
    a = m.add_var("a", ())
    con = m.add_row("r", (), LinExpr.var(a, 2.0) + 3.0, LE, 5.0)
    assert con.terms == ((a, 2.0),) and con.rhs == 2.0
