"""Constraint emitters for radial reconfiguration, linearized DistFlow and energization."""

from __future__ import annotations

import logging

from .bigm import BigM, big_m_catalog
from .milp import BINARY, CONTINUOUS, EQ, GE, LE, LinExpr, Model, and_product, polygonal_disk
from .scenario import Scenario, derive_access_coefficients, fault_sets_at

log = logging.getLogger(__name__)


def _arcs(scn: Scenario) -> list[tuple[str, str]]:
    """Both orientations of every branch, in branch order."""
    out = []
    for br in scn.network.branches:
        out.append((br.from_node, br.to_node))
        out.append((br.to_node, br.from_node))
    return out


def emit_radiality(model: Model, scn: Scenario) -> None:
    """Single-commodity fictitious spanning tree per span and the actual subset kappa <= mu."""
    D = scn.time.span_count
    net = scn.network
    root = net.substation
    nodes = net.node_ids
    commodities = [i for i in nodes if i != root]
    arcs = _arcs(scn)
    for t in range(1, D + 1):
        for a, b in arcs:
            model.add_var("lambda", (a, b, t), BINARY)
        for br in net.branches:
            model.add_var("mu", br.key + (t,), BINARY)
        for br in net.branches:
            model.add_var("kappa", br.key + (t,), BINARY)
    for t in range(1, D + 1):
        for ix in commodities:
            for a, b in arcs:
                model.add_var("f", (ix, a, b, t), CONTINUOUS)

    into: dict[str, list[tuple[str, str]]] = {i: [] for i in nodes}
    out: dict[str, list[tuple[str, str]]] = {i: [] for i in nodes}
    for a, b in arcs:
        out[a].append((a, b))
        into[b].append((a, b))
    fh = model.handles["f"]

    def balance(ix, i, t):
        return ([(fh[(ix, a, b, t)], 1.0) for a, b in into[i]]
                + [(fh[(ix, a, b, t)], -1.0) for a, b in out[i]])

    for t in range(1, D + 1):
        for ix in commodities:
            model.add_row("8a", (ix, t), balance(ix, root, t), EQ, -1.0)
        for ix in commodities:
            model.add_row("8b", (ix, t), balance(ix, ix, t), EQ, 1.0)
        for ix in commodities:
            for i in nodes:
                if i in (ix, root):
                    continue
                model.add_row("8c", (ix, i, t), balance(ix, i, t), EQ, 0.0)
        lam = model.handles["lambda"]
        for ix in commodities:
            for br in net.branches:
                a, b = br.key
                f1, f2 = fh[(ix, a, b, t)], fh[(ix, b, a, t)]
                idx = (ix, a, b, t)
                model.add_row("8d", idx, [(f1, 1.0)], GE, 0.0, part="f_lo")
                model.add_row("8d", idx, [(f1, 1.0), (lam[(a, b, t)], -1.0)], LE, 0.0, part="f_up")
                model.add_row("8d", idx, [(f2, 1.0)], GE, 0.0, part="r_lo")
                model.add_row("8d", idx, [(f2, 1.0), (lam[(b, a, t)], -1.0)], LE, 0.0, part="r_up")
        model.add_row("8e", (t,), [(lam[(a, b, t)], 1.0) for a, b in arcs], EQ, float(len(nodes) - 1))
        for br in net.branches:
            a, b = br.key
            model.add_row("8f", (a, b, t), [(lam[(a, b, t)], 1.0), (lam[(b, a, t)], 1.0),
                                           (model.var("mu", a, b, t), -1.0)], EQ, 0.0)
        for br in net.branches:
            a, b = br.key
            model.add_row("8g", (a, b, t), [(model.var("kappa", a, b, t), 1.0),
                                           (model.var("mu", a, b, t), -1.0)], LE, 0.0)


def emit_power_flow(model: Model, scn: Scenario, bigm: BigM | None = None) -> None:
    """Nodal injections, balance, pickup monotonicity, voltage drop, limits and fault pinning."""
    bigm = bigm or big_m_catalog(scn)
    D = scn.time.span_count
    net = scn.network
    root = net.substation
    nodes = net.node_ids
    base = net.base_kva
    energized = scn.study.substation_energized
    acoef = derive_access_coefficients(scn)
    NS, NG = set(scn.access.storage_nodes), set(scn.access.generator_nodes)
    mods, gens = scn.fleet.modules, scn.fleet.generators

    for t in range(1, D + 1):
        for br in net.branches:
            model.add_var("P", br.key + (t,))
        for br in net.branches:
            model.add_var("Q", br.key + (t,))
        for i in nodes:
            model.add_var("Pin", (i, t))
        for i in nodes:
            model.add_var("Qin", (i, t))
        for i in nodes:
            if i == root and energized:
                model.add_var("V2", (i, t), lb=1.0, ub=1.0)
            else:
                model.add_var("V2", (i, t))
    for fam in ("delta", "eta", "rho", "sigma"):
        for t in range(1, D + 1):
            for i in nodes:
                model.add_var(fam, (i, t), BINARY)

    for t in range(1, D + 1):
        for i in nodes:
            if i == root and energized:
                continue  # the grid supplies the substation through a free injection
            a1, a2 = acoef[i]
            pt = [(model.var("Pin", i, t), 1.0)]
            qt = [(model.var("Qin", i, t), 1.0)]
            if a1 and i in NS:
                for k in mods:
                    pt += [(model.var("Pd", k.id, i, t), -1.0), (model.var("Pc", k.id, i, t), 1.0)]
                    qt += [(model.var("Qs", k.id, i, t), -1.0)]
            if a2 and i in NG:
                for m in gens:
                    pt += [(model.var("PG", m.id, i, t), -1.0)]
                    qt += [(model.var("QG", m.id, i, t), -1.0)]
            model.add_row("9a", (i, t), pt, EQ, 0.0)
            model.add_row("9b", (i, t), qt, EQ, 0.0)
    into: dict[str, list] = {i: [] for i in nodes}
    out: dict[str, list] = {i: [] for i in nodes}
    for br in net.branches:
        out[br.from_node].append(br.key)
        into[br.to_node].append(br.key)
    for fam, inj, load in (("9c", "Pin", 0), ("9d", "Qin", 1)):
        flow = "P" if fam == "9c" else "Q"
        for t in range(1, D + 1):
            for i in nodes:
                pl = scn.load_pu(i, t)[load]
                terms = [(model.var(flow, *k, t), 1.0) for k in into[i]]
                terms += [(model.var(flow, *k, t), -1.0) for k in out[i]]
                terms += [(model.var(inj, i, t), 1.0), (model.var("delta", i, t), -pl)]
                model.add_row(fam, (i, t), terms, EQ, 0.0)
    for t in range(1, D + 1):
        for i in nodes:
            terms = [(model.var("delta", i, t), 1.0)]
            if t > 1:
                terms.append((model.var("delta", i, t - 1), -1.0))
            model.add_row("9e", (i, t), terms, GE, 0.0)
    for t in range(1, D + 1):
        for br in net.branches:
            a, b = br.key
            M = bigm.voltage[br.key]
            drop = [(model.var("V2", b, t), 1.0), (model.var("V2", a, t), -1.0),
                    (model.var("P", a, b, t), 2 * br.r_pu), (model.var("Q", a, b, t), 2 * br.x_pu)]
            kap = model.var("kappa", a, b, t)
            model.add_row("9f", (a, b, t), drop + [(kap, -M)], GE, -M, part="lo")
            model.add_row("9f", (a, b, t), drop + [(kap, M)], LE, M, part="up")
    for t in range(1, D + 1):
        for i in nodes:
            v = model.var("V2", i, t)
            model.add_row("9g", (i, t), [(v, 1.0)], GE, net.v_min ** 2, part="lo")
            model.add_row("9g", (i, t), [(v, 1.0)], LE, net.v_max ** 2, part="up")
    for t in range(1, D + 1):
        for br in net.branches:
            a, b = br.key
            radius = LinExpr.var(model.var("kappa", a, b, t), br.s_max_kva / base)
            polygonal_disk(model, LinExpr.var(model.var("P", a, b, t)), LinExpr.var(model.var("Q", a, b, t)),
                           radius, scn.study.disk_segments, "9h", (a, b, t))
    for t in range(1, D + 1):
        fs = fault_sets_at(scn, t)
        for br in net.branches:
            if br.key in fs.branches_open:
                model.add_row("9i", br.key + (t,), [(model.var("kappa", *br.key, t), 1.0)], EQ, 0.0, part="bo")
        for br in net.branches:
            if br.key in fs.branches_closed:
                model.add_row("9i", br.key + (t,), [(model.var("kappa", *br.key, t), 1.0)], EQ, 1.0, part="bc")
        for i in nodes:
            if i in fs.nodes_open:
                model.add_row("9i", (i, t), [(model.var("delta", i, t), 1.0)], EQ, 0.0, part="no")
        for i in nodes:
            if i in fs.nodes_closed:
                model.add_row("9i", (i, t), [(model.var("delta", i, t), 1.0), (model.var("eta", i, t), -1.0)],
                              GE, 0.0, part="nc")
    if energized:
        for t in range(1, D + 1):
            model.add_row("9j", (t,), [(model.var("eta", root, t), 1.0)], EQ, 1.0)
    if scn.study.strict_pickup:
        for t in range(1, D + 1):
            for i in nodes:
                model.add_row("xpickup", (i, t), [(model.var("delta", i, t), 1.0),
                                                  (model.var("eta", i, t), -1.0)], LE, 0.0)


def emit_energization(model: Model, scn: Scenario, bigm: BigM | None = None) -> None:
    """Source presence (9k), energized neighbours (9l) through products (10), composition (9m)."""
    bigm = bigm or big_m_catalog(scn)
    D = scn.time.span_count
    net = scn.network
    root = net.substation
    nodes = net.node_ids
    acoef = derive_access_coefficients(scn)
    NS, NG = set(scn.access.storage_nodes), set(scn.access.generator_nodes)
    mods, gens = scn.fleet.modules, scn.fleet.generators
    targets = [i for i in nodes if i != root or not scn.study.substation_energized]

    feeding: dict[str, list[tuple[str, str]]] = {i: [] for i in nodes}
    for t in range(1, D + 1):
        for br in net.branches:
            a, b = br.key
            kap = model.var("kappa", a, b, t)
            for src, dst in ((a, b), (b, a)):
                and_product(model, [model.var("eta", src, t), kap], family="chi",
                            index=(src, dst, t), row_family="10")
                if t == 1:
                    feeding[dst].append((src, dst))
    for t in range(1, D + 1):
        for i in targets:
            a1, a2 = acoef[i]
            src = []
            if a1 and i in NS:
                src += [(model.var("zeta", k.id, i, t), 1.0) for k in mods]
            if a2 and i in NG:
                src += [(model.var("x", m.id, i, t), 1.0) for m in gens]
            den = a1 * len(mods) + a2 * len(gens) + 1
            rho = model.var("rho", i, t)
            model.add_row("9k", (i, t), [(rho, 1.0)] + [(v, -c / den) for v, c in src], GE, 0.0, part="lo")
            model.add_row("9k", (i, t), [(rho, 1.0)] + [(v, -c) for v, c in src], LE, 0.0, part="up")
    for t in range(1, D + 1):
        for i in targets:
            chis = [(model.var("chi", s, d, t), 1.0) for s, d in feeding[i]]
            sig = model.var("sigma", i, t)
            M = bigm.degree[i]
            model.add_row("9l", (i, t), [(sig, 1.0)] + [(v, -1.0 / M) for v, _ in chis], GE, 0.0, part="lo")
            model.add_row("9l", (i, t), [(sig, 1.0)] + [(v, -1.0) for v, _ in chis], LE, 0.0, part="up")
    for t in range(1, D + 1):
        for i in targets:
            eta, rho, sig = model.var("eta", i, t), model.var("rho", i, t), model.var("sigma", i, t)
            model.add_row("9m", (i, t), [(eta, 1.0), (rho, -1.0)], GE, 0.0, part="rho")
            model.add_row("9m", (i, t), [(eta, 1.0), (sig, -1.0)], GE, 0.0, part="sigma")
            model.add_row("9m", (i, t), [(eta, 1.0), (rho, -1.0), (sig, -1.0)], LE, 0.0, part="up")
