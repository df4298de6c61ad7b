"""Constraint emitters for MER routing, SMESS coupling, module and generator operation,
and fuel logistics.  Row families carry the equation tags used by the validator."""

from __future__ import annotations

import logging

from .bigm import BigM, big_m_catalog, fuel_segments
from .milp import BINARY, CONTINUOUS, EQ, GE, LE, LinExpr, Model, and_product, piecewise_bigM, polygonal_disk
from .scenario import Scenario

log = logging.getLogger(__name__)

MER_CLASSES = ("carrier", "generator", "tanker")

# transition coefficients of the mobility model
_B_LO = (1.2, 0.4, 0.8)
_B_UP = (1.0, 0.5, 0.7)
EPSILON = 1.0


def mers_of(scn: Scenario, mer_class: str) -> tuple:
    return {"carrier": scn.fleet.carriers, "generator": scn.fleet.generators,
            "tanker": scn.fleet.tankers}[mer_class]


def _sum(model: Model, family: str, keys) -> LinExpr:
    h = model.handles[family]
    return LinExpr((h[k], 1.0) for k in keys)


# ------------------------------------------------------------------ routing


def emit_routing(model: Model, scn: Scenario, mer_class: str, bigm: BigM | None = None) -> None:
    """Routing rows for every MER of one class (carriers, generators or tankers)."""
    bigm = bigm or big_m_catalog(scn)
    D = scn.time.span_count
    for mer in mers_of(scn, mer_class):
        j = mer.id
        sites = scn.sites_of(j)
        if mer.start not in sites:
            raise ValueError(f"{j}: start {mer.start} outside its site set")
        tab = scn.travel.table[j]
        for a in sites:
            for b in sites:
                if a != b and (a, b) not in tab:
                    raise ValueError(f"{j}: missing travel time {a}->{b}")
        for t in range(D + 1):
            for i in sites:
                model.add_var("x", (j, i, t), BINARY)
            for i in sites:
                model.add_var("v", (j, i, t), BINARY)
        for t in range(D + 1):
            model.add_var("S", (j, t), CONTINUOUS)
            model.add_var("R", (j, t), CONTINUOUS)
        for t in range(D + 1):
            model.add_var("omega", (j, t), BINARY)

        x = lambda i, t: model.var("x", j, i, t)  # noqa: E731
        v = lambda i, t: model.var("v", j, i, t)  # noqa: E731
        sv = lambda t: [(v(i, t), 1.0) for i in sites]  # noqa: E731

        for t in range(D + 1):
            model.add_row("1a", (j, t), [(x(i, t), 1.0) for i in sites] + sv(t), EQ, 1.0)
        for t in range(D):
            for i in sites:
                c1, c2, c3 = _B_LO
                terms = [(x(i, t + 1), 1.0), (x(i, t), -1.0), (v(i, t), -c1), (v(i, t + 1), c1)]
                terms += [(vv, -c2) for vv, _ in sv(t)] + [(vv, c2) for vv, _ in sv(t + 1)]
                model.add_row("1b", (j, i, t), terms, GE, -c3, part="lo")
                c1, c2, c3 = _B_UP
                terms = [(x(i, t + 1), 1.0), (x(i, t), -1.0), (v(i, t), -c1), (v(i, t + 1), c1)]
                terms += [(vv, c2) for vv, _ in sv(t)] + [(vv, -c2) for vv, _ in sv(t + 1)]
                model.add_row("1b", (j, i, t), terms, LE, c3, part="up")
        for t in range(1, D + 1):
            S = model.var("S", j, t)
            for i in sites:
                tsum = sum(tab[(i, b)] for b in sites if b != i)
                terms = [(S, 1.0), (x(i, t - 1), -tsum)]
                terms += [(v(b, t), -float(tab[(i, b)])) for b in sites if b != i]
                model.add_row("1c", (j, i, t), terms, GE, -tsum)
            model.add_row("1c", (j, t), [(S, 1.0)], GE, 0.0, part="nn")
        for t in range(1, D + 1):
            terms = [(model.var("R", j, t), 1.0), (model.var("R", j, t - 1), -1.0),
                     (model.var("S", j, t), -1.0)] + sv(t - 1)
            model.add_row("1d", (j, t), terms, EQ, 0.0)
        for t in range(D + 1):
            R = model.var("R", j, t)
            model.add_row("1e", (j, t), sv(t) + [(R, -1.0 / bigm.travel)], GE, 0.0, part="lo")
            model.add_row("1e", (j, t), sv(t) + [(R, -1.0)], LE, 0.0, part="up")
        for t in range(1, D + 1):
            w = model.var("omega", j, t)
            terms = [(w, 1.0)] + [(vv, -1.0) for vv, _ in sv(t - 1)] + [(vv, -1.0) for vv, _ in sv(t)]
            model.add_row("1f", (j, t), terms, GE, -2.0 + EPSILON, part="w")
            for i in sites:
                model.add_row("1f", (j, i, t), [(v(i, t), 1.0), (v(i, t - 1), -1.0), (w, -1.0)],
                              GE, -1.0, part="lo")
                model.add_row("1f", (j, i, t), [(v(i, t), 1.0), (v(i, t - 1), -1.0), (w, 1.0)],
                              LE, 1.0, part="up")
        model.add_row("1g", (j,), [(x(mer.start, 0), 1.0)], EQ, 1.0, part="x")
        model.add_row("1g", (j,), [(model.var("S", j, 0), 1.0)], EQ, 0.0, part="S")
        model.add_row("1g", (j,), [(model.var("R", j, 0), 1.0)], EQ, 0.0, part="R")
        model.add_row("1g", (j,), [(model.var("omega", j, 0), 1.0)], EQ, 0.0, part="w")

        if scn.study.exact_travel:
            _emit_exact_travel(model, scn, j, sites, tab)


def _emit_exact_travel(model: Model, scn: Scenario, j: str, sites, tab) -> None:
    """Optional rows pinning the started travel time to exactly T (no inflated trips)."""
    D = scn.time.span_count
    tmax = float(max(tab.values(), default=1))
    for t in range(1, D + 1):
        S = model.var("S", j, t)
        for i in sites:
            xi = model.var("x", j, i, t - 1)
            model.add_row("xtravel", (j, i, t), [(model.var("v", j, i, t), 1.0), (xi, 1.0)], LE, 1.0,
                          part="self")
            for b in sites:
                if b == i:
                    continue
                vb = model.var("v", j, b, t)
                model.add_row("xtravel", (j, i, b, t), [(S, 1.0), (xi, tmax), (vb, tmax)], LE,
                              tab[(i, b)] + 2 * tmax, part="ub")
        model.add_row("xtravel", (j, t), [(S, 1.0)] + [(model.var("x", j, i, t - 1), -tmax) for i in sites],
                      LE, 0.0, part="park")


# ---------------------------------------------------------------- coupling


def emit_smess_coupling(model: Model, scn: Scenario) -> None:
    """Ownership (2a)-(2c), carrier scenarios (3a)-(3c) and node scenarios (4a)-(4c)."""
    D = scn.time.span_count
    NS = scn.access.storage_nodes
    carriers = scn.fleet.carriers
    mods = scn.fleet.modules
    for k in mods:
        if k.start not in NS:
            raise ValueError(f"module {k.id} starts outside the storage nodes")
    for t in range(D + 1):
        for k in mods:
            for i in NS:
                model.add_var("zeta", (k.id, i, t), BINARY)
    for t in range(D + 1):
        for k in mods:
            for c in carriers:
                model.add_var("gamma", (k.id, c.id, t), BINARY)

    z = lambda k, i, t: model.var("zeta", k, i, t)  # noqa: E731
    g = lambda k, j, t: model.var("gamma", k, j, t)  # noqa: E731
    x = lambda j, i, t: model.var("x", j, i, t)  # noqa: E731

    for t in range(D + 1):
        for k in mods:
            terms = [(z(k.id, i, t), 1.0) for i in NS] + [(g(k.id, c.id, t), 1.0) for c in carriers]
            model.add_row("2a", (k.id, t), terms, EQ, 1.0)
    for t in range(1, D + 1):
        for c in carriers:
            model.add_row("2b", (c.id, t), [(g(k.id, c.id, t), k.weight) for k in mods], LE, c.capacity)
    for k in mods:
        model.add_row("2c", (k.id,), [(z(k.id, k.start, 0), 1.0)], EQ, 1.0)

    for t in range(1, D + 1):
        for c in carriers:
            j = c.id
            xs_t = [(x(j, i, t), 1.0) for i in NS]
            xs_p = [(x(j, i, t - 1), 1.0) for i in NS]
            for k in mods:
                model.add_row("3a", (j, k.id, t), [(g(k.id, j, t), 1.0)] + xs_t, LE, 1.0)
            for i in NS:
                for k in mods:
                    model.add_row("3b", (j, i, k.id, t),
                                  [(g(k.id, j, t), 1.0), (z(k.id, i, t - 1), -1.0), (x(j, i, t), -1.0),
                                   (x(j, i, t - 1), 1.0)], LE, 1.0)
            for k in mods:
                d = [(g(k.id, j, t), 1.0), (g(k.id, j, t - 1), -1.0)]
                model.add_row("3c", (j, k.id, t), d + xs_p + xs_t, GE, 0.0, part="lo")
                model.add_row("3c", (j, k.id, t), d + [(v, -1.0) for v, _ in xs_p + xs_t], LE, 0.0, part="up")
    for t in range(1, D + 1):
        for c in carriers:
            for i in NS:
                for k in mods:
                    and_product(model, [(x(c.id, i, t - 1), False), (x(c.id, i, t), True),
                                        (g(k.id, c.id, t - 1), True)],
                                family="alpha", index=(c.id, i, k.id, t), row_family="4a")
    for t in range(1, D + 1):
        for i in NS:
            for k in mods:
                al = [(model.var("alpha", c.id, i, k.id, t), -1.0) for c in carriers]
                model.add_row("4b", (i, k.id, t), [(z(k.id, i, t), 1.0)] + al, GE, 0.0)
                model.add_row("4c", (i, k.id, t), [(z(k.id, i, t), 1.0), (z(k.id, i, t - 1), -1.0)] + al,
                              LE, 0.0)


# --------------------------------------------------------------- operation


def emit_mod_operation(model: Model, scn: Scenario) -> None:
    """Mode exclusivity, output bounds, rating disk and SOC dynamics of modules."""
    D = scn.time.span_count
    NS = scn.access.storage_nodes
    base = scn.network.base_kva
    dt = scn.time.span_length_h
    seg = scn.study.disk_segments
    mods = scn.fleet.modules
    for t in range(1, D + 1):
        for k in mods:
            for i in NS:
                model.add_var("c", (k.id, i, t), BINARY)
                model.add_var("d", (k.id, i, t), BINARY)
    for t in range(1, D + 1):
        for k in mods:
            for i in NS:
                model.add_var("Pc", (k.id, i, t))
                model.add_var("Pd", (k.id, i, t))
                model.add_var("Qs", (k.id, i, t))
    for t in range(D + 1):
        for k in mods:
            model.add_var("SOC", (k.id, t))

    for t in range(1, D + 1):
        for k in mods:
            pcmax, pdmax, smax = k.p_charge_max_kw / base, k.p_discharge_max_kw / base, k.s_rated_kva / base
            for i in NS:
                idx = (k.id, i, t)
                c, d, zt = model.var("c", *idx), model.var("d", *idx), model.var("zeta", *idx)
                pc, pd, q = model.var("Pc", *idx), model.var("Pd", *idx), model.var("Qs", *idx)
                model.add_row("5a", idx, [(c, 1.0), (d, 1.0), (zt, -1.0)], LE, 0.0)
                model.add_row("5b", idx, [(pc, 1.0)], GE, 0.0, part="pc_lo")
                model.add_row("5b", idx, [(pc, 1.0), (c, -pcmax)], LE, 0.0, part="pc_up")
                model.add_row("5b", idx, [(pd, 1.0)], GE, 0.0, part="pd_lo")
                model.add_row("5b", idx, [(pd, 1.0), (d, -pdmax)], LE, 0.0, part="pd_up")
                model.add_row("5b", idx, [(q, 1.0), (zt, smax)], GE, 0.0, part="q_lo")
                model.add_row("5b", idx, [(q, 1.0), (zt, -smax)], LE, 0.0, part="q_up")
    for t in range(1, D + 1):
        for k in mods:
            p = LinExpr()
            for i in NS:
                p.iadd((model.var("Pd", k.id, i, t), 1.0))
                p.iadd((model.var("Pc", k.id, i, t), -1.0))
            q = _sum(model, "Qs", [(k.id, i, t) for i in NS])
            polygonal_disk(model, p, q, k.s_rated_kva / base, seg, "5c", (k.id, t))
    for t in range(1, D + 1):
        for k in mods:
            scale = base * dt / k.energy_kwh
            terms = [(model.var("SOC", k.id, t), 1.0), (model.var("SOC", k.id, t - 1), -1.0)]
            for i in NS:
                terms.append((model.var("Pc", k.id, i, t), -k.eff_charge * scale))
                terms.append((model.var("Pd", k.id, i, t), scale / k.eff_discharge))
            model.add_row("5d", (k.id, t), terms, EQ, 0.0)
    for k in mods:
        model.add_row("5e", (k.id,), [(model.var("SOC", k.id, 0), 1.0)], EQ, k.soc_init)
    for t in range(1, D + 1):
        for k in mods:
            s = model.var("SOC", k.id, t)
            model.add_row("5f", (k.id, t), [(s, 1.0)], GE, k.soc_min, part="lo")
            model.add_row("5f", (k.id, t), [(s, 1.0)], LE, k.soc_max, part="up")


def emit_meg_power(model: Model, scn: Scenario) -> None:
    D = scn.time.span_count
    NG = scn.access.generator_nodes
    base = scn.network.base_kva
    for t in range(1, D + 1):
        for m in scn.fleet.generators:
            for i in NG:
                model.add_var("PG", (m.id, i, t))
                model.add_var("QG", (m.id, i, t))
    for t in range(1, D + 1):
        for m in scn.fleet.generators:
            pmax, qmax = m.p_max_kw / base, m.q_max_kvar / base
            for i in NG:
                idx = (m.id, i, t)
                p, q, x = model.var("PG", *idx), model.var("QG", *idx), model.var("x", *idx)
                model.add_row("6a", idx, [(p, 1.0)], GE, 0.0, part="p_lo")
                model.add_row("6a", idx, [(p, 1.0), (x, -pmax)], LE, 0.0, part="p_up")
                model.add_row("6a", idx, [(q, 1.0)], GE, 0.0, part="q_lo")
                model.add_row("6a", idx, [(q, 1.0), (x, -qmax)], LE, 0.0, part="q_up")
    for t in range(1, D + 1):
        for m in scn.fleet.generators:
            p = _sum(model, "PG", [(m.id, i, t) for i in NG])
            q = _sum(model, "QG", [(m.id, i, t) for i in NG])
            polygonal_disk(model, p, q, m.s_rated_kva / base, scn.study.disk_segments, "6b", (m.id, t))


# -------------------------------------------------------------------- fuel


def emit_fuel_logistics(model: Model, scn: Scenario, bigm: BigM | None = None) -> None:
    """Generator fuel demand, extra-fuel logic, SOF dynamics and exchange rules."""
    bigm = bigm or big_m_catalog(scn)
    D = scn.time.span_count
    dt = scn.time.span_length_h
    NG = scn.access.generator_nodes
    DP = scn.access.depots
    sites = scn.access.fuel_sites
    gens, tankers = scn.fleet.generators, scn.fleet.tankers
    if not scn.fleet.fuel_sites:
        return
    for t in range(1, D + 1):
        for m in gens:
            for i in sites:
                model.add_var("B", (m.id, i, t))
                model.add_var("Bp", (m.id, i, t))
                model.add_var("G", (m.id, i, t))
        for h in tankers:
            for i in sites:
                model.add_var("Dh", (h.id, i, t))
    for t in range(1, D + 1):
        for m in gens:
            model.add_var("b", (m.id, t), BINARY)
        for e in list(gens) + list(tankers):
            for i in sites:
                model.add_var("l", (e.id, i, t), BINARY)
    owners = [m.id for m in gens] + [h.id for h in tankers] + list(sites)
    for t in range(D + 1):
        for o in owners:
            model.add_var("SOF", (o, t))

    B = lambda m, i, t: model.var("B", m, i, t)  # noqa: E731
    sof = lambda o, t: model.var("SOF", o, t)  # noqa: E731

    for t in range(1, D + 1):
        for m in gens:
            for i in NG:
                model.add_row("7a", (m.id, i, t), [(B(m.id, i, t), 1.0)], GE, 0.0, part="lo")
                model.add_row("7a", (m.id, i, t), [(B(m.id, i, t), 1.0),
                                                   (model.var("x", m.id, i, t), -m.fuel_max_per_span_l)],
                              LE, 0.0, part="up")
            for i in DP:
                model.add_row("7b", (m.id, i, t), [(B(m.id, i, t), 1.0)], EQ, 0.0)
    for m in gens:
        bps, ys, zs = fuel_segments(scn, m.id)
        for t in range(1, D + 1):
            value = _sum(model, "B", [(m.id, i, t) for i in NG])
            driver = _sum(model, "PG", [(m.id, i, t) for i in NG])
            piecewise_bigM(model, value, driver, bps, ys, zs, bigm.fuel[m.id], (m.id, t),
                           value_range=(0.0, m.fuel_max_per_span_l), driver_range=(0.0, bps[-1]))
    for t in range(1, D + 1):
        for m in gens:
            F, bmax = m.fuel_capacity_l, m.fuel_max_per_span_l
            b = model.var("b", m.id, t)
            for i in sites:
                bp = model.var("Bp", m.id, i, t)
                model.add_row("7f", (m.id, i, t), [(bp, 1.0)], GE, 0.0, part="bp_lo")
                model.add_row("7f", (m.id, i, t), [(bp, 1.0), (B(m.id, i, t), -1.0)], LE, 0.0, part="bp_up")
            sb = [(B(m.id, i, t), 1.0) for i in NG]
            sbp = [(model.var("Bp", m.id, i, t), 1.0) for i in NG]
            prev = (sof(m.id, t - 1), -F)
            model.add_row("7f", (m.id, t), sb + [prev, (b, F)], GE, 0.0, part="ex_lo")
            model.add_row("7f", (m.id, t), sb + [prev, (b, bmax)], LE, bmax, part="ex_up")
            model.add_row("7f", (m.id, t), sbp + [(b, bmax)], LE, bmax, part="cap")
            neg = [(v, -1.0) for v, _ in sb] + [(sof(m.id, t - 1), F)]
            model.add_row("7f", (m.id, t), sbp + neg, GE, 0.0, part="d_lo")
            model.add_row("7f", (m.id, t), sbp + neg + [(b, -F)], LE, 0.0, part="d_up")
    for t in range(1, D + 1):
        for m in gens:
            F = m.fuel_capacity_l
            terms = [(sof(m.id, t), 1.0), (sof(m.id, t - 1), -1.0)]
            for i in sites:
                terms += [(B(m.id, i, t), 1.0 / F), (model.var("Bp", m.id, i, t), -1.0 / F),
                          (model.var("G", m.id, i, t), -1.0 / F)]
            model.add_row("7g", (m.id, t), terms, EQ, 0.0)
        for h in tankers:
            terms = [(sof(h.id, t), 1.0), (sof(h.id, t - 1), -1.0)]
            terms += [(model.var("Dh", h.id, i, t), 1.0 / h.fuel_capacity_l) for i in sites]
            model.add_row("7h", (h.id, t), terms, EQ, 0.0)
        for i in sites:
            F = scn.fleet.fuel_site(i).fuel_capacity_l
            terms = [(sof(i, t), 1.0), (sof(i, t - 1), -1.0)]
            terms += [(model.var("Dh", h.id, i, t), -1.0 / F) for h in tankers]
            for m in gens:
                terms += [(model.var("Bp", m.id, i, t), 1.0 / F), (model.var("G", m.id, i, t), 1.0 / F)]
            model.add_row("7i", (i, t), terms, EQ, 0.0)
    for t in range(1, D + 1):
        for m in gens:
            for i in sites:
                l, x = model.var("l", m.id, i, t), model.var("x", m.id, i, t)
                model.add_row("7j", (m.id, i, t), [(l, 1.0), (x, -1.0)], LE, 0.0)
        for m in gens:
            for i in sites:
                l, gv = model.var("l", m.id, i, t), model.var("G", m.id, i, t)
                F = m.fuel_capacity_l
                model.add_row("7k", (m.id, i, t), [(gv, 1.0), (l, F)], GE, 0.0, part="lo")
                model.add_row("7k", (m.id, i, t), [(gv, 1.0), (l, -F)], LE, 0.0, part="up")
        for h in tankers:
            for i in sites:
                l, x = model.var("l", h.id, i, t), model.var("x", h.id, i, t)
                model.add_row("7l", (h.id, i, t), [(l, 1.0), (x, -1.0)], LE, 0.0)
        for h in tankers:
            for i in sites:
                l, dv = model.var("l", h.id, i, t), model.var("Dh", h.id, i, t)
                model.add_row("7m", (h.id, i, t), [(dv, 1.0), (l, h.rate_in_l_per_h * dt)], GE, 0.0, part="lo")
                model.add_row("7m", (h.id, i, t), [(dv, 1.0), (l, -h.rate_out_l_per_h * dt)], LE, 0.0, part="up")
    init = {m.id: m.sof_init for m in gens} | {h.id: h.sof_init for h in tankers}
    init |= {s.id: s.sof_init for s in scn.fleet.fuel_sites}
    for o in owners:
        model.add_row("7n", (o,), [(sof(o, 0), 1.0)], EQ, init[o])
    for t in range(1, D + 1):
        for o in owners:
            model.add_row("7o", (o, t), [(sof(o, t), 1.0)], GE, 0.0, part="lo")
            model.add_row("7o", (o, t), [(sof(o, t), 1.0)], LE, 1.0, part="up")
