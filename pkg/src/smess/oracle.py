"""Exhaustive reference optimum for tiny instances.

Discrete decisions (routes with exact trip durations, module pickups, fuel-exchange
flags, pickup times and per-span radial topologies) are enumerated explicitly.  Each
discrete skeleton is completed by small linear programs over the continuous quantities.
Three nonconvex pieces are resolved by exhaustive branching whenever the LP relaxation
violates them: charge/discharge exclusivity, the fuel-curve segment and the extra-fuel
switch.  Candidates are examined in decreasing objective order, so the first feasible
one is optimal.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
import highspy

from .scenario import Scenario, default_bundles, fault_sets_at

log = logging.getLogger(__name__)

LIMITS = {"nodes": 6, "modules": 2, "carriers": 1, "generators": 1, "tankers": 1, "spans": 4}
MAX_SKELETONS = 500_000
_TOL = 1e-7
ABOARD = ""


class OracleError(ValueError):
    pass


# ------------------------------------------------------------------ skeletons


@dataclass
class Skeleton:
    states: dict[str, tuple[tuple[str, str], ...]]  # mer -> ("P"|"V", site) for t = 0..D
    mod_pos: dict[str, tuple[str, ...]]  # module -> node or ABOARD for t = 0..D
    exchange: dict[str, tuple[str | None, ...]]  # mer -> exchange site for t = 1..D (index t-1)
    travel_spans: int = 0
    exchange_spans: int = 0
    penalty: float = 0.0

    def meg_node(self, scn: Scenario, t: int) -> str | None:
        """Generator-access node where the generator is parked at ``t`` (None otherwise)."""
        for m in scn.fleet.generators:
            kind, site = self.states[m.id][t]
            if kind == "P" and site in scn.access.generator_nodes:
                return site
        return None

    def signature(self, scn: Scenario, t: int) -> tuple:
        return (tuple(self.mod_pos[k.id][t] for k in scn.fleet.modules), self.meg_node(scn, t))


def _routes(sites, start: str, D: int, trip, pinned: str | None = None):
    """All state sequences t = 0..D with exact-duration trips; ``pinned`` forbids travel."""
    out = []

    def rec(t, seq, dest, left):
        if t == D:
            out.append(tuple(seq))
            return
        if dest is not None:  # travelling
            if left > 1:
                rec(t + 1, seq + [("V", dest)], dest, left - 1)
            else:
                rec(t + 1, seq + [("P", dest)], None, 0)
            return
        here = seq[-1][1]
        rec(t + 1, seq + [("P", here)], None, 0)
        if pinned is None:
            for b in sites:
                if b != here:
                    rec(t + 1, seq + [("V", b)], b, max(1, trip(here, b)))
    rec(0, [("P", start)], None, 0)
    if pinned is not None:
        out = [r for r in out if all(s == ("P", pinned) for s in r[1:])]
    return out


def _carrier_options(scn: Scenario, case: str):
    """(carrier states or None, module positions) for every route and pickup choice."""
    D = scn.time.span_count
    mods = scn.fleet.modules
    start_pos = {k.id: k.start for k in mods}
    if not scn.fleet.carriers:
        yield None, {k: (p,) * (D + 1) for k, p in start_pos.items()}
        return
    (car,) = scn.fleet.carriers
    NS = scn.access.storage_nodes
    bundle = set()
    if case == "Case3":
        bundle = set((scn.study.bundles or default_bundles(scn)).get(car.id, ()))
    frozen = case == "Case2"

    def rec(t, states, pos, dest, left, aboard):
        if t == D:
            yield tuple(states), {k: tuple(p) for k, p in pos.items()}
            return
        if dest is not None:
            if left > 1:
                nxt = {k: p + [p[-1]] for k, p in pos.items()}
                yield from rec(t + 1, states + [("V", dest)], nxt, dest, left - 1, aboard)
            else:
                nxt = {k: p + [dest if k in aboard else p[-1]] for k, p in pos.items()}
                yield from rec(t + 1, states + [("P", dest)], nxt, None, 0, frozenset())
            return
        here = states[-1][1]
        nxt = {k: p + [p[-1]] for k, p in pos.items()}
        yield from rec(t + 1, states + [("P", here)], nxt, None, 0, frozenset())
        present = [k for k in mods if pos[k.id][-1] == here]
        for b in NS:
            if b == here:
                continue
            for r in range(len(present) + 1):
                for pick in itertools.combinations(present, r):
                    ids = frozenset(k.id for k in pick)
                    if sum(k.weight for k in pick) > car.capacity + 1e-9:
                        continue
                    if frozen and ids:
                        continue
                    if bundle and not (bundle <= ids):
                        continue
                    nxt = {k: p + [ABOARD if k in ids else p[-1]] for k, p in pos.items()}
                    yield from rec(t + 1, states + [("V", b)], nxt, b, max(1, scn.travel.spans(car.id, here, b)), ids)

    init = {k: [p] for k, p in start_pos.items()}
    for states, pos in rec(0, [("P", car.start)], init, None, 0, frozenset()):
        if bundle:  # bundled modules share the carrier's node whenever it is parked
            ok = all(pos[k][t] == (states[t][1] if states[t][0] == "P" else ABOARD)
                     for k in bundle for t in range(D + 1))
            if not ok:
                continue
        if frozen:
            fixed = scn.study.fixed_positions
            if any(pos[k.id][t] != fixed.get(k.id, k.start) for k in mods for t in range(1, D + 1)):
                continue
        yield states, pos


def _exchange_options(scn: Scenario, mer: str, states, allowed: bool):
    D = scn.time.span_count
    sites = set(scn.access.fuel_sites)
    slots = []
    for t in range(1, D + 1):
        kind, site = states[t]
        slots.append([None, site] if allowed and kind == "P" and site in sites else [None])
    return [tuple(c) for c in itertools.product(*slots)]


def enumerate_skeletons(scn: Scenario, case: str | None = None) -> list[Skeleton]:
    case = case or scn.study.case
    D = scn.time.span_count
    st = scn.study
    fuel = bool(scn.fleet.fuel_sites)
    gen_opts, tank_opts = [], []
    for m in scn.fleet.generators:
        pin = st.fixed_positions.get(m.id, m.start) if case == "Case2" else None
        routes = _routes(scn.sites_of(m.id), m.start, D, lambda a, b, j=m.id: scn.travel.spans(j, a, b), pin)
        gen_opts.append([(m.id, r, ex) for r in routes for ex in _exchange_options(scn, m.id, r, fuel)])
    for h in scn.fleet.tankers:
        pin = h.start if case == "Case4" else None
        routes = _routes(scn.sites_of(h.id), h.start, D, lambda a, b, j=h.id: scn.travel.spans(j, a, b), pin)
        allow = fuel and case != "Case4"
        tank_opts.append([(h.id, r, ex) for r in routes for ex in _exchange_options(scn, h.id, r, allow)])
    carrier = list(_carrier_options(scn, case))
    total = len(carrier) * math.prod(len(o) for o in gen_opts + tank_opts)
    if total > MAX_SKELETONS:
        raise OracleError(f"search space too large ({total} skeletons)")
    out = []
    for (cstates, pos), *rest in itertools.product(carrier, *gen_opts, *tank_opts):
        states, exch = {}, {}
        if cstates is not None:
            states[scn.fleet.carriers[0].id] = cstates
        for j, r, ex in rest:
            states[j] = r
            exch[j] = ex
        travel = sum(1 for r in states.values() for t in range(1, D + 1) if r[t][0] == "V")
        n_ex = sum(1 for ex in exch.values() for s in ex if s is not None)
        out.append(Skeleton(states, pos, exch, travel, n_ex, st.phi_travel * travel + st.phi_fuel * n_ex))
    return out


# ------------------------------------------------------------ pickup plans


def enumerate_pickups(scn: Scenario) -> list[tuple[float, dict[str, tuple[bool, ...]]]]:
    """Monotone pickup trajectories with their weighted restored energy, best first."""
    D, dt = scn.time.span_count, scn.time.span_length_h
    last_open = {i: 0 for i in scn.network.node_ids}
    for t in range(1, D + 1):
        for i in fault_sets_at(scn, t).nodes_open:
            last_open[i] = t
    choices = []
    for n in scn.network.nodes:
        first = last_open[n.id] + 1
        if not n.has_load:
            choices.append([(0.0, tuple(t >= first for t in range(1, D + 1)))])
            continue
        opts = []
        for p in range(first, D + 2):
            val = sum(n.weight * n.p_kw[t - 1] * dt for t in range(p, D + 1))
            opts.append((val, tuple(t >= p for t in range(1, D + 1))))
        choices.append(opts)
    ids = scn.network.node_ids
    plans = []
    for combo in itertools.product(*choices):
        plans.append((sum(v for v, _ in combo), {i: seq for i, (_, seq) in zip(ids, combo)}))
    plans.sort(key=lambda p: -p[0])
    return plans


# ------------------------------------------------------------------ topology


def _polygon(k: int):
    return [(math.cos((2 * m + 1) * math.pi / k), math.sin((2 * m + 1) * math.pi / k)) for m in range(k)], \
        math.cos(math.pi / k)


def _sources(scn: Scenario, sig) -> set[str]:
    mod_nodes, meg = sig
    src = {p for p in mod_nodes if p != ABOARD}
    if meg is not None:
        src.add(meg)
    if scn.study.substation_energized:
        src.add(scn.network.substation)
    return src


class _Topologies:
    """Canonical radial topologies per (span, sources, pickup set), cached."""

    def __init__(self, scn: Scenario):
        self.scn = scn
        self.cache: dict = {}

    def candidates(self, t: int, sig, served: tuple[bool, ...]) -> list[frozenset]:
        key = (t, sig, served)
        if key in self.cache:
            return self.cache[key]
        scn = self.scn
        net = scn.network
        fs = fault_sets_at(scn, t)
        ids = net.node_ids
        src = _sources(scn, sig)
        loaded = {i for i, on in zip(ids, served) if on and any(scn.load_pu(i, t))}
        anchor = src | loaded
        fixed = [b.key for b in net.branches if b.key in fs.branches_closed]
        free = [b.key for b in net.branches if b.key not in fs.branches_closed and b.key not in fs.branches_open]
        out = []
        for r in range(len(free) + 1):
            for pick in itertools.combinations(free, r):
                edges = fixed + list(pick)
                g = nx.Graph()
                g.add_nodes_from(ids)
                g.add_edges_from(edges)
                if not nx.is_forest(g):
                    continue
                if not self._valid(g, pick, anchor, src, loaded, served, fs):
                    continue
                out.append(frozenset(edges))
        self.cache[key] = out
        return out

    def _valid(self, g, pick, anchor, src, loaded, served, fs) -> bool:
        ids = self.scn.network.node_ids
        on = dict(zip(ids, served))
        for comp in nx.connected_components(g):
            sourced = bool(comp & src)
            if not sourced and comp & loaded:
                return False
            if sourced and any(i in fs.nodes_closed and not on[i] for i in comp):
                return False
        for a, b in pick:  # every optional closed branch must join two anchored sides
            g.remove_edge(a, b)
            ok = bool(nx.node_connected_component(g, a) & anchor) and bool(nx.node_connected_component(g, b) & anchor)
            g.add_edge(a, b)
            if not ok:
                return False
        return True


# ------------------------------------------------------------------ LP layer


class _LP:
    def __init__(self):
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.rows: list[tuple[dict[int, float], float, float]] = []
        self.cost: dict[int, float] = {}

    def var(self, lb=-math.inf, ub=math.inf) -> int:
        self.lb.append(lb)
        self.ub.append(ub)
        return len(self.lb) - 1

    def row(self, terms, lo, hi) -> None:
        d: dict[int, float] = {}
        for v, c in terms:
            d[v] = d.get(v, 0.0) + c
        self.rows.append((d, lo, hi))

    def eq(self, terms, rhs):
        self.row(terms, rhs, rhs)

    def le(self, terms, rhs):
        self.row(terms, -math.inf, rhs)

    def ge(self, terms, rhs):
        self.row(terms, rhs, math.inf)

    def solve(self) -> np.ndarray | None:
        n = len(self.lb)
        if n == 0:
            return np.zeros(0)
        starts, index, value, lo, hi = [0], [], [], [], []
        for d, rlo, rhi in self.rows:
            index.extend(d.keys())
            value.extend(d.values())
            starts.append(len(index))
            lo.append(-highspy.kHighsInf if math.isinf(rlo) else rlo)
            hi.append(highspy.kHighsInf if math.isinf(rhi) else rhi)
        cost = np.zeros(n)
        for k, v in self.cost.items():
            cost[k] += v
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("primal_feasibility_tolerance", 1e-9)
        inf = highspy.kHighsInf
        h.addVars(n, np.array([max(v, -inf) for v in self.lb]), np.array([min(v, inf) for v in self.ub]))
        h.changeColsCost(n, np.arange(n, dtype=np.int32), cost)
        if self.rows:
            h.addRows(len(self.rows), np.array(lo), np.array(hi), len(index), np.array(starts[:-1], dtype=np.int32),
                      np.array(index, dtype=np.int32), np.array(value, dtype=float))
        h.run()
        if h.getModelStatus() != highspy.HighsModelStatus.kOptimal:
            return None
        return np.array(h.getSolution().col_value)


def _fuel_hull(bps, ys, zs):
    """Lower-convex and upper-concave envelope lines of a piecewise-linear fuel curve."""
    pts = [(bps[0], ys[0] * bps[0] + zs[0])] + [(bps[l + 1], ys[l] * bps[l + 1] + zs[l]) for l in range(len(ys))]

    def chain(points, sign):
        hull = []
        for p in points:
            while len(hull) >= 2:
                (x1, y1), (x2, y2) = hull[-2], hull[-1]
                cross = (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1)
                if sign * cross <= 0:
                    hull.pop()
                else:
                    break
            hull.append(p)
        return [((y2 - y1) / (x2 - x1), y1 - (y2 - y1) / (x2 - x1) * x1) for (x1, y1), (x2, y2) in zip(hull, hull[1:])]
    return chain(pts, 1), chain(pts, -1)  # lower (convex), upper (concave)


@dataclass
class _Plan:
    spans: list[int]
    sigs: dict[int, tuple]
    served: dict[int, tuple[bool, ...]]
    topo: dict[int, frozenset]
    skeleton: Skeleton | None = None
    coupled: bool = False  # SOC chain across spans
    fuel: bool = False
    fixes: dict = field(default_factory=dict)


class _Builder:
    def __init__(self, scn: Scenario, case: str):
        self.scn = scn
        self.case = case
        self.base = scn.network.base_kva
        self.fuel_curves = {}
        from .bigm import fuel_segments  # shared unit conversion only

        for m in scn.fleet.generators:
            bps, ys, zs = fuel_segments(scn, m.id)
            self.fuel_curves[m.id] = (bps, ys, zs, _fuel_hull(bps, ys, zs))

    def build(self, plan: _Plan):
        scn, lp = self.scn, _LP()
        net = scn.network
        ids = net.node_ids
        root = net.substation
        energized = scn.study.substation_energized
        mods = scn.fleet.modules
        case1 = self.case == "Case1"
        handles = {"mod": {}, "meg": {}, "soc": {}, "fuel": {}}
        for t in plan.spans:
            sig = plan.sigs[t]
            mod_nodes, meg = sig
            inj_p = {i: [] for i in ids}
            inj_q = {i: [] for i in ids}
            for k, where in zip(mods, mod_nodes):
                if where == ABOARD:
                    continue
                cap = 0.0 if case1 else 1.0
                pc = lp.var(0.0, cap * k.p_charge_max_kw / self.base)
                pd = lp.var(0.0, cap * k.p_discharge_max_kw / self.base)
                s = k.s_rated_kva / self.base
                q = lp.var(-cap * s, cap * s)
                mode = plan.fixes.get(("mode", k.id, t))
                if mode == "c":
                    lp.ub[pd] = 0.0
                elif mode == "d":
                    lp.ub[pc] = 0.0
                self._disk(lp, [(pd, 1.0), (pc, -1.0)], [(q, 1.0)], s)
                inj_p[where] += [(pd, 1.0), (pc, -1.0)]
                inj_q[where] += [(q, 1.0)]
                lp.cost[pc] = lp.cost.get(pc, 0.0) + 1.0
                lp.cost[pd] = lp.cost.get(pd, 0.0) + 1.0
                handles["mod"][(k.id, t)] = (pc, pd)
            for m in scn.fleet.generators:
                if meg is None:
                    continue
                cap = 0.0 if case1 else 1.0
                pg = lp.var(0.0, cap * m.p_max_kw / self.base)
                qg = lp.var(0.0, cap * m.q_max_kvar / self.base)
                self._disk(lp, [(pg, 1.0)], [(qg, 1.0)], m.s_rated_kva / self.base)
                inj_p[meg].append((pg, 1.0))
                inj_q[meg].append((qg, 1.0))
                handles["meg"][t] = pg
            if energized:
                inj_p[root].append((lp.var(), 1.0))
                inj_q[root].append((lp.var(), 1.0))
            v2 = {}
            for i in ids:
                lo, hi = (1.0, 1.0) if (i == root and energized) else (net.v_min ** 2, net.v_max ** 2)
                v2[i] = lp.var(lo, hi)
            bal_p = {i: list(inj_p[i]) for i in ids}
            bal_q = {i: list(inj_q[i]) for i in ids}
            for br in net.branches:
                if br.key not in plan.topo[t]:
                    continue
                a, b = br.key
                p, q = lp.var(), lp.var()
                bal_p[b].append((p, 1.0))
                bal_p[a].append((p, -1.0))
                bal_q[b].append((q, 1.0))
                bal_q[a].append((q, -1.0))
                lp.eq([(v2[b], 1.0), (v2[a], -1.0), (p, 2 * br.r_pu), (q, 2 * br.x_pu)], 0.0)
                self._disk(lp, [(p, 1.0)], [(q, 1.0)], br.s_max_kva / self.base)
            for i, on in zip(ids, plan.served[t]):
                lp_, lq = scn.load_pu(i, t)
                lp.eq(bal_p[i], lp_ if on else 0.0)
                lp.eq(bal_q[i], lq if on else 0.0)
        if plan.coupled:
            self._soc(lp, plan, handles)
        if plan.fuel:
            self._fuel(lp, plan, handles)
        return lp, handles

    def _disk(self, lp: _LP, pt, qt, radius: float) -> None:
        normals, shrink = _polygon(self.scn.study.disk_segments)
        for cx, sy in normals:
            lp.le([(v, c * cx) for v, c in pt] + [(v, c * sy) for v, c in qt], radius * shrink)

    def _soc(self, lp: _LP, plan: _Plan, h) -> None:
        scn = self.scn
        dt = scn.time.span_length_h
        for k in scn.fleet.modules:
            prev = lp.var(k.soc_init, k.soc_init)
            for t in plan.spans:
                cur = lp.var(k.soc_min, k.soc_max)
                terms = [(cur, 1.0), (prev, -1.0)]
                if (k.id, t) in h["mod"]:
                    pc, pd = h["mod"][(k.id, t)]
                    scale = self.base * dt / k.energy_kwh
                    terms += [(pc, -k.eff_charge * scale), (pd, scale / k.eff_discharge)]
                lp.eq(terms, 0.0)
                prev = cur

    def _fuel(self, lp: _LP, plan: _Plan, h) -> None:
        scn, sk = self.scn, plan.skeleton
        dt = scn.time.span_length_h
        sites = scn.access.fuel_sites
        sof = {}
        owners = ([(m.id, m.sof_init) for m in scn.fleet.generators] + [(x.id, x.sof_init) for x in scn.fleet.tankers]
                  + [(s.id, s.sof_init) for s in scn.fleet.fuel_sites])
        for o, init in owners:
            sof[(o, 0)] = lp.var(init, init)
        for t in plan.spans:
            for o, _ in owners:
                sof[(o, t)] = lp.var(0.0, 1.0)
            site_terms = {i: [(sof[(i, t)], 1.0), (sof[(i, t - 1)], -1.0)] for i in sites}
            for x in scn.fleet.tankers:
                Fh = x.fuel_capacity_l
                at = sk.exchange[x.id][t - 1]
                terms = [(sof[(x.id, t)], 1.0), (sof[(x.id, t - 1)], -1.0)]
                if at is not None:
                    d = lp.var(-x.rate_in_l_per_h * dt, x.rate_out_l_per_h * dt)
                    terms.append((d, 1.0 / Fh))
                    site_terms[at].append((d, -1.0 / scn.fleet.fuel_site(at).fuel_capacity_l))
                lp.eq(terms, 0.0)
            for m in scn.fleet.generators:
                F = m.fuel_capacity_l
                bps, ys, zs, (lower, upper) = self.fuel_curves[m.id]
                node = sk.meg_node(scn, t)
                pg = h["meg"].get(t)
                P = [(pg, 1.0)] if pg is not None else []
                B = lp.var(0.0, m.fuel_max_per_span_l if node is not None else 0.0)
                lp.le(P, bps[-1])
                seg = plan.fixes.get(("seg", m.id, t))
                if seg is None:
                    for y, z in lower:
                        lp.ge([(B, 1.0)] + [(v, -y * c) for v, c in P], z)
                    for y, z in upper:
                        lp.le([(B, 1.0)] + [(v, -y * c) for v, c in P], z)
                else:
                    lp.eq([(B, 1.0)] + [(v, -ys[seg] * c) for v, c in P], zs[seg])
                    lp.ge(P, bps[seg])
                    lp.le(P, bps[seg + 1])
                Bp = lp.var(0.0, math.inf if node is not None else 0.0)
                lp.le([(Bp, 1.0), (B, -1.0)], 0.0)
                prev = sof[(m.id, t - 1)]
                flag = plan.fixes.get(("b", m.id, t))
                if flag is None:
                    lp.ge([(Bp, 1.0), (B, -1.0), (prev, F)], 0.0)
                elif flag == 1:
                    lp.le([(B, 1.0), (prev, -F)], 0.0)
                    lp.ub[Bp] = 0.0
                else:
                    lp.ge([(B, 1.0), (prev, -F)], 0.0)
                    lp.eq([(Bp, 1.0), (B, -1.0), (prev, F)], 0.0)
                lp.cost[Bp] = lp.cost.get(Bp, 0.0) + 1.0 / F
                terms = [(sof[(m.id, t)], 1.0), (prev, -1.0), (B, 1.0 / F), (Bp, -1.0 / F)]
                at = sk.exchange[m.id][t - 1]
                if at is not None:
                    G = lp.var(-F, F)
                    terms.append((G, -1.0 / F))
                    site_terms[at].append((G, 1.0 / scn.fleet.fuel_site(at).fuel_capacity_l))
                if node is not None:
                    site_terms[node].append((Bp, 1.0 / scn.fleet.fuel_site(node).fuel_capacity_l))
                lp.eq(terms, 0.0)
                h["fuel"][(m.id, t)] = (B, Bp, prev, pg)
            for i in sites:
                lp.eq(site_terms[i], 0.0)


def _branch(builder: _Builder, plan: _Plan, x: np.ndarray, h) -> list[dict] | None:
    """Children fixes for the first exactness violation, or None if ``x`` is exact."""
    for (k, t), (pc, pd) in h["mod"].items():
        if x[pc] > _TOL and x[pd] > _TOL:
            return [{("mode", k, t): "c"}, {("mode", k, t): "d"}]
    for (m, t), (B, Bp, prev, pg) in h["fuel"].items():
        bps, ys, zs, _ = builder.fuel_curves[m]
        P = x[pg] if pg is not None else 0.0
        exact = float(np.interp(P, bps, [ys[0] * bps[0] + zs[0]] + [ys[l] * bps[l + 1] + zs[l] for l in range(len(ys))]))
        if ("seg", m, t) not in plan.fixes and abs(x[B] - exact) > _TOL * max(1.0, exact):
            return [{("seg", m, t): l} for l in range(len(ys))]
        F = next(g.fuel_capacity_l for g in builder.scn.fleet.generators if g.id == m)
        if ("b", m, t) not in plan.fixes and x[Bp] - max(0.0, x[B] - F * x[prev]) > _TOL * max(1.0, x[B]):
            return [{("b", m, t): 1}, {("b", m, t): 0}]
    return None


def _feasible(builder: _Builder, plan: _Plan, stats: dict, depth: int = 0) -> bool:
    lp, h = builder.build(plan)
    stats["lp"] += 1
    x = lp.solve()
    if x is None:
        return False
    kids = _branch(builder, plan, x, h)
    if kids is None:
        return True
    for fix in kids:
        child = _Plan(plan.spans, plan.sigs, plan.served, plan.topo, plan.skeleton, plan.coupled, plan.fuel,
                      {**plan.fixes, **fix})
        if _feasible(builder, child, stats, depth + 1):
            return True
    return False


# ------------------------------------------------------------------ search


@dataclass
class OracleResult:
    value: float | None
    skeleton: Skeleton | None
    pickups: dict[str, tuple[bool, ...]] | None
    skeletons: int
    plans: int
    candidates_checked: int
    lp_solves: int
    seconds: float


def check_limits(scn: Scenario) -> None:
    sizes = {"nodes": len(scn.network.nodes), "modules": len(scn.fleet.modules),
             "carriers": len(scn.fleet.carriers), "generators": len(scn.fleet.generators),
             "tankers": len(scn.fleet.tankers), "spans": scn.time.span_count}
    over = {k: v for k, v in sizes.items() if v > LIMITS[k]}
    if over:
        raise OracleError(f"instance exceeds oracle limits: {over} (limits {LIMITS})")
    if scn.study.strict_pickup:
        raise OracleError("oracle covers the default pickup rule only")


def oracle_search(scn: Scenario, case: str | None = None) -> OracleResult:
    t0 = time.perf_counter()
    check_limits(scn)
    case = case or scn.study.case
    D = scn.time.span_count
    skeletons = enumerate_skeletons(scn, case)
    plans = enumerate_pickups(scn)
    ids = scn.network.node_ids
    topo = _Topologies(scn)
    builder = _Builder(scn, case)
    stats = {"lp": 0, "checked": 0}
    span_ok: dict = {}
    joint_ok: dict = {}
    fuel_needed = bool(scn.fleet.generators) and bool(scn.fleet.fuel_sites)

    def span_candidates(t, sig, served):
        key = (t, sig, served)
        if key not in span_ok:
            good = []
            for edges in topo.candidates(t, sig, served):
                p = _Plan([t], {t: sig}, {t: served}, {t: edges})
                if _feasible(builder, p, stats):
                    good.append(edges)
            span_ok[key] = good
        return span_ok[key]

    def feasible(sk: Skeleton, plan: dict) -> bool:
        sigs = {t: sk.signature(scn, t) for t in range(1, D + 1)}
        served = {t: tuple(plan[i][t - 1] for i in ids) for t in range(1, D + 1)}
        cands = {}
        for t in range(1, D + 1):
            cands[t] = span_candidates(t, sigs[t], served[t])
            if not cands[t]:
                return False
        spans = list(range(1, D + 1))
        key = (tuple(sigs[t] for t in spans), tuple(served[t] for t in spans))
        combos = itertools.product(*(cands[t] for t in spans))
        if not fuel_needed:
            if key not in joint_ok:
                joint_ok[key] = any(_feasible(builder, _Plan(spans, sigs, served, dict(zip(spans, c)), coupled=True),
                                              stats) for c in combos)
            return joint_ok[key]
        if key not in joint_ok:
            joint_ok[key] = [c for c in combos
                             if _feasible(builder, _Plan(spans, sigs, served, dict(zip(spans, c)), coupled=True), stats)]
        return any(_feasible(builder, _Plan(spans, sigs, served, dict(zip(spans, c)), sk, True, True), stats)
                   for c in joint_ok[key])

    skeletons.sort(key=lambda s: s.penalty)
    heap = [(-(plans[0][0] - s.penalty), n, 0) for n, s in enumerate(skeletons)] if plans else []
    heapq.heapify(heap)
    while heap:
        negval, n, p = heapq.heappop(heap)
        stats["checked"] += 1
        sk = skeletons[n]
        if feasible(sk, plans[p][1]):
            res = OracleResult(-negval, sk, plans[p][1], len(skeletons), len(plans), stats["checked"], stats["lp"],
                               time.perf_counter() - t0)
            log.info("oracle %s: %.6f after %d candidates, %d LPs, %.1fs", scn.name, res.value,
                     res.candidates_checked, res.lp_solves, res.seconds)
            return res
        if p + 1 < len(plans):
            heapq.heappush(heap, (-(plans[p + 1][0] - sk.penalty), n, p + 1))
    return OracleResult(None, None, None, len(skeletons), len(plans), stats["checked"], stats["lp"],
                        time.perf_counter() - t0)


def brute_force_optimal(scn: Scenario, case: str | None = None) -> float:
    """True optimum of a tiny instance by exhaustive enumeration (raises if infeasible or too large)."""
    res = oracle_search(scn, case)
    if res.value is None:
        raise OracleError("no feasible schedule")
    return res.value
