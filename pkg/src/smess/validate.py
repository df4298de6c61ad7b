"""Independent schedule checker, objective recomputation and resilience series.

Every constraint family is re-evaluated by plain arithmetic on the schedule values.
Logical rows are checked as logic, disks as true circles and fuel use against exact
interpolation, so no big-M constant or polygon enters any check.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import networkx as nx
import numpy as np

from .milp import LinExpr
from .scenario import Scenario, default_bundles, derive_access_coefficients, fault_sets_at
from .solver import Schedule

DEFAULT_TOL = 1e-6


class DimensionError(ValueError):
    """Schedule does not match the scenario (span count or missing entries)."""


@dataclass(frozen=True)
class Violation:
    family: str
    index: tuple
    residual: float
    description: str


@dataclass
class ViolationReport:
    tol: float
    violations: list[Violation] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    checked_families: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def max_residual(self) -> float:
        return max((v.residual for v in self.violations), default=0.0)

    @property
    def families(self) -> set[str]:
        return {v.family for v in self.violations}

    def to_document(self) -> dict:
        return {"pass": self.passed, "tol": self.tol, "max_residual": self.max_residual,
                "violations": [{**asdict(v), "index": list(v.index)} for v in self.violations],
                "warnings": list(self.warnings), "checked_families": list(self.checked_families)}

    def to_json(self) -> str:
        return json.dumps(self.to_document(), indent=1) + "\n"

    def to_tsv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, delimiter="\t", lineterminator="\n")
        w.writerow(["family", "index", "residual", "description"])
        for v in self.violations:
            w.writerow([v.family, ",".join(map(str, v.index)), f"{v.residual:.9g}", v.description])
        return buf.getvalue()


# ------------------------------------------------------------------ context


class _Ctx:
    def __init__(self, scn: Scenario, sched: Schedule, tol: float):
        self.scn, self.s, self.tol = scn, sched, tol
        self.D = scn.time.span_count
        self.out: list[Violation] = []
        self.warnings: list[str] = []
        self.bad_owner: set[tuple[str, int]] = set()  # (module, span) failing ownership uniqueness

    def val(self, fam: str, *idx) -> float:
        try:
            return self.s.values[fam][tuple(idx)]
        except KeyError:
            raise DimensionError(f"schedule lacks {fam}{tuple(idx)}") from None

    def on(self, fam: str, *idx) -> bool:
        return self.val(fam, *idx) > 0.5

    def flag(self, fam: str, idx: tuple, resid: float, desc: str) -> None:
        self.out.append(Violation(fam, tuple(idx), float(abs(resid)), desc))

    def le(self, fam: str, idx: tuple, lhs: float, rhs: float, desc: str) -> None:
        if lhs - rhs > self.tol:
            self.flag(fam, idx, lhs - rhs, desc)

    def eq(self, fam: str, idx: tuple, lhs: float, rhs: float, desc: str) -> None:
        if abs(lhs - rhs) > self.tol:
            self.flag(fam, idx, lhs - rhs, desc)

    def logic(self, fam: str, idx: tuple, ok: bool, desc: str) -> None:
        if not ok:
            self.flag(fam, idx, 1.0, desc)


def _state(c: _Ctx, j: str, t: int) -> tuple[str, str]:
    for i in c.scn.sites_of(j):
        if c.on("x", j, i, t):
            return ("P", i)
    for i in c.scn.sites_of(j):
        if c.on("v", j, i, t):
            return ("V", i)
    return ("?", "")


def _mers(scn: Scenario):
    return list(scn.fleet.carriers) + list(scn.fleet.generators) + list(scn.fleet.tankers)


# ---------------------------------------------------------------- routing


def _c1a(c: _Ctx):
    for m in _mers(c.scn):
        sites = c.scn.sites_of(m.id)
        for t in range(c.D + 1):
            n = sum(c.val("x", m.id, i, t) + c.val("v", m.id, i, t) for i in sites)
            c.eq("1a", (m.id, t), n, 1.0, "exactly one parked or travelling state")


def _c1b(c: _Ctx):
    for m in _mers(c.scn):
        for t in range(c.D):
            (k0, a), (k1, b) = _state(c, m.id, t), _state(c, m.id, t + 1)
            ok = {("P", "P"): a == b, ("P", "V"): True, ("V", "V"): a == b, ("V", "P"): a == b}.get((k0, k1), True)
            c.logic("1b", (m.id, t), ok, f"illegal transition {k0}:{a} -> {k1}:{b}")


def _trips(c: _Ctx, j: str):
    """Yield (origin, destination, start span, spans travelled, completed)."""
    t = 1
    while t <= c.D:
        (k0, a), (k1, b) = _state(c, j, t - 1), _state(c, j, t)
        if k0 == "P" and k1 == "V":
            n = 0
            while t + n <= c.D and _state(c, j, t + n) == ("V", b):
                n += 1
            yield a, b, t, n, t + n <= c.D
            t += n
        else:
            t += 1


def _c1c(c: _Ctx):
    tab = c.scn.travel
    for m in _mers(c.scn):
        sites = c.scn.sites_of(m.id)
        for t in range(1, c.D + 1):
            S = c.val("S", m.id, t)
            c.le("1c", (m.id, t), -S, 0.0, "negative started travel time")
            for i in sites:
                if c.on("x", m.id, i, t - 1):
                    need = sum(tab.spans(m.id, i, b) * c.val("v", m.id, b, t) for b in sites if b != i)
                    c.le("1c", (m.id, i, t), need, S, "started travel time below the trip length")
        for a, b, t, n, done in _trips(c, m.id):
            T = tab.spans(m.id, a, b)
            if n > T:
                c.flag("1c", (m.id, a, b, t), n - T, f"trip {a}->{b} lasts {n} spans, expected {T}")


def _c1d(c: _Ctx):
    tab = c.scn.travel
    for m in _mers(c.scn):
        sites = c.scn.sites_of(m.id)
        for t in range(1, c.D + 1):
            moving = sum(c.val("v", m.id, i, t - 1) for i in sites)
            c.eq("1d", (m.id, t), c.val("R", m.id, t), c.val("R", m.id, t - 1) + c.val("S", m.id, t) - moving,
                 "remaining travel time recursion")
        for a, b, t, n, done in _trips(c, m.id):
            T = tab.spans(m.id, a, b)
            if done and n < T:
                c.flag("1d", (m.id, a, b, t), T - n, f"trip {a}->{b} lasts {n} spans, expected {T}")


def _c1e(c: _Ctx):
    for m in _mers(c.scn):
        for t in range(c.D + 1):
            R = c.val("R", m.id, t)
            if _state(c, m.id, t)[0] == "V":
                c.le("1e", (m.id, t), 1.0, R, "travelling without remaining travel time")
            else:
                c.eq("1e", (m.id, t), R, 0.0, "remaining travel time while parked")


def _c1f(c: _Ctx):
    for m in _mers(c.scn):
        sites = c.scn.sites_of(m.id)
        for t in range(1, c.D + 1):
            both = _state(c, m.id, t - 1)[0] == "V" and _state(c, m.id, t)[0] == "V"
            w = c.on("omega", m.id, t)
            changed = any(c.on("v", m.id, i, t) != c.on("v", m.id, i, t - 1) for i in sites)
            c.logic("1f", (m.id, t), w or not both, "continued travel without the hold flag")
            c.logic("1f", (m.id, t), not (w and changed), "destination changed while the hold flag is set")


def _c1g(c: _Ctx):
    for m in _mers(c.scn):
        c.logic("1g", (m.id, "x"), c.on("x", m.id, m.start, 0), "not parked at the start node at span 0")
        for fam in ("S", "R"):
            c.eq("1g", (m.id, fam), c.val(fam, m.id, 0), 0.0, f"initial {fam} not zero")
        c.logic("1g", (m.id, "omega"), not c.on("omega", m.id, 0), "initial hold flag set")


def _xtravel(c: _Ctx):
    if not c.scn.study.exact_travel:
        return
    tab = c.scn.travel
    for m in _mers(c.scn):
        for t in range(1, c.D + 1):
            S = c.val("S", m.id, t)
            (k0, a), (k1, b) = _state(c, m.id, t - 1), _state(c, m.id, t)
            if k0 == "P" and k1 == "V":
                c.logic("xtravel", (m.id, a, t), a != b, "trip to the current node")
                c.le("xtravel", (m.id, a, b, t), S, tab.spans(m.id, a, b), "started travel time above trip length")
            elif k0 != "P":
                c.le("xtravel", (m.id, t), S, 0.0, "travel time started while already travelling")


# --------------------------------------------------------------- coupling


def _c2a(c: _Ctx):
    NS, carriers = c.scn.access.storage_nodes, c.scn.fleet.carriers
    for k in c.scn.fleet.modules:
        for t in range(c.D + 1):
            n = sum(c.val("zeta", k.id, i, t) for i in NS) + sum(c.val("gamma", k.id, j.id, t) for j in carriers)
            if abs(n - 1.0) > c.tol:
                c.bad_owner.add((k.id, t))
                c.flag("2a", (k.id, t), n - 1.0, f"module has {n:g} owners")


def _c2b(c: _Ctx):
    for j in c.scn.fleet.carriers:
        for t in range(1, c.D + 1):
            load = sum(k.weight * c.val("gamma", k.id, j.id, t) for k in c.scn.fleet.modules)
            c.le("2b", (j.id, t), load, j.capacity, "carrier capacity exceeded")


def _c2c(c: _Ctx):
    for k in c.scn.fleet.modules:
        c.logic("2c", (k.id,), c.on("zeta", k.id, k.start, 0), "module not at its start node at span 0")


def _carried(c: _Ctx, k: str, j: str, t: int) -> bool:
    return c.on("gamma", k, j, t)


def _c3a(c: _Ctx):
    NS = c.scn.access.storage_nodes
    for j in c.scn.fleet.carriers:
        for t in range(1, c.D + 1):
            parked = any(c.on("x", j.id, i, t) for i in NS)
            for k in c.scn.fleet.modules:
                c.logic("3a", (j.id, k.id, t), not (parked and _carried(c, k.id, j.id, t)),
                        "module aboard a parked carrier")


def _c3b(c: _Ctx):
    NS = c.scn.access.storage_nodes
    for j in c.scn.fleet.carriers:
        for t in range(1, c.D + 1):
            for i in NS:
                departs = c.on("x", j.id, i, t - 1) and not c.on("x", j.id, i, t)
                for k in c.scn.fleet.modules:
                    ok = not (departs and _carried(c, k.id, j.id, t)) or c.on("zeta", k.id, i, t - 1)
                    c.logic("3b", (j.id, i, k.id, t), ok, "module picked up away from its node")


def _c3c(c: _Ctx):
    NS = c.scn.access.storage_nodes
    for j in c.scn.fleet.carriers:
        for t in range(1, c.D + 1):
            moving = not any(c.on("x", j.id, i, t - 1) or c.on("x", j.id, i, t) for i in NS)
            for k in c.scn.fleet.modules:
                same = _carried(c, k.id, j.id, t) == _carried(c, k.id, j.id, t - 1)
                c.logic("3c", (j.id, k.id, t), same or not moving, "load changed while travelling")


def _arrival(c: _Ctx, j: str, i: str, k: str, t: int) -> bool:
    return (not c.on("x", j, i, t - 1)) and c.on("x", j, i, t) and c.on("gamma", k, j, t - 1)


def _c4a(c: _Ctx):
    for j in c.scn.fleet.carriers:
        for i in c.scn.access.storage_nodes:
            for k in c.scn.fleet.modules:
                for t in range(1, c.D + 1):
                    c.logic("4a", (j.id, i, k.id, t), c.on("alpha", j.id, i, k.id, t) == _arrival(c, j.id, i, k.id, t),
                            "arrival indicator differs from its definition")


def _skip_owner(c: _Ctx, k: str, *spans: int) -> bool:
    return any((k, t) in c.bad_owner for t in spans)


def _c4b(c: _Ctx):
    for i in c.scn.access.storage_nodes:
        for k in c.scn.fleet.modules:
            for t in range(1, c.D + 1):
                if _skip_owner(c, k.id, t - 1, t):
                    continue
                arrived = any(_arrival(c, j.id, i, k.id, t) for j in c.scn.fleet.carriers)
                c.logic("4b", (i, k.id, t), c.on("zeta", k.id, i, t) or not arrived, "arriving module not dropped")


def _c4c(c: _Ctx):
    for i in c.scn.access.storage_nodes:
        for k in c.scn.fleet.modules:
            for t in range(1, c.D + 1):
                if _skip_owner(c, k.id, t - 1, t):
                    continue
                arrived = any(_arrival(c, j.id, i, k.id, t) for j in c.scn.fleet.carriers)
                ok = not c.on("zeta", k.id, i, t) or c.on("zeta", k.id, i, t - 1) or arrived
                c.logic("4c", (i, k.id, t), ok, "module appeared at a node without an arrival")


# -------------------------------------------------------------- operation


def _c5a(c: _Ctx):
    for k in c.scn.fleet.modules:
        for i in c.scn.access.storage_nodes:
            for t in range(1, c.D + 1):
                ch, dis, z = c.on("c", k.id, i, t), c.on("d", k.id, i, t), c.on("zeta", k.id, i, t)
                c.logic("5a", (k.id, i, t), not (ch and dis) and (z or not (ch or dis)),
                        "charge/discharge mode conflict or module absent")


def _c5b(c: _Ctx):
    base = c.scn.network.base_kva
    for k in c.scn.fleet.modules:
        for i in c.scn.access.storage_nodes:
            for t in range(1, c.D + 1):
                idx = (k.id, i, t)
                pc, pd, q = c.val("Pc", *idx), c.val("Pd", *idx), c.val("Qs", *idx)
                c.le("5b", idx, -pc, 0.0, "negative charging power")
                c.le("5b", idx, -pd, 0.0, "negative discharging power")
                c.le("5b", idx, pc, k.p_charge_max_kw / base * c.val("c", *idx), "charging power above limit")
                c.le("5b", idx, pd, k.p_discharge_max_kw / base * c.val("d", *idx), "discharging power above limit")
                c.le("5b", idx, abs(q), k.s_rated_kva / base * c.val("zeta", *idx), "reactive power above limit")


def _c5c(c: _Ctx):
    base = c.scn.network.base_kva
    NS = c.scn.access.storage_nodes
    for k in c.scn.fleet.modules:
        for t in range(1, c.D + 1):
            p = sum(c.val("Pd", k.id, i, t) - c.val("Pc", k.id, i, t) for i in NS)
            q = sum(c.val("Qs", k.id, i, t) for i in NS)
            c.le("5c", (k.id, t), math.hypot(p, q), k.s_rated_kva / base, "apparent power above rating")


def _c5d(c: _Ctx):
    base, dt = c.scn.network.base_kva, c.scn.time.span_length_h
    NS = c.scn.access.storage_nodes
    for k in c.scn.fleet.modules:
        for t in range(1, c.D + 1):
            pc = sum(c.val("Pc", k.id, i, t) for i in NS) * base
            pd = sum(c.val("Pd", k.id, i, t) for i in NS) * base
            soc = c.val("SOC", k.id, t - 1) + (k.eff_charge * pc - pd / k.eff_discharge) * dt / k.energy_kwh
            c.eq("5d", (k.id, t), c.val("SOC", k.id, t), soc, "state of charge recursion")


def _c5e(c: _Ctx):
    for k in c.scn.fleet.modules:
        c.eq("5e", (k.id,), c.val("SOC", k.id, 0), k.soc_init, "initial state of charge")


def _c5f(c: _Ctx):
    for k in c.scn.fleet.modules:
        for t in range(1, c.D + 1):
            s = c.val("SOC", k.id, t)
            c.le("5f", (k.id, t), k.soc_min, s, "state of charge below minimum")
            c.le("5f", (k.id, t), s, k.soc_max, "state of charge above maximum")


def _c6a(c: _Ctx):
    base = c.scn.network.base_kva
    for m in c.scn.fleet.generators:
        for i in c.scn.access.generator_nodes:
            for t in range(1, c.D + 1):
                idx = (m.id, i, t)
                p, q, x = c.val("PG", *idx), c.val("QG", *idx), c.val("x", *idx)
                c.le("6a", idx, -p, 0.0, "negative generator power")
                c.le("6a", idx, -q, 0.0, "negative generator reactive power")
                c.le("6a", idx, p, m.p_max_kw / base * x, "generator power above limit or while not parked")
                c.le("6a", idx, q, m.q_max_kvar / base * x, "generator reactive power above limit")


def _c6b(c: _Ctx):
    base = c.scn.network.base_kva
    NG = c.scn.access.generator_nodes
    for m in c.scn.fleet.generators:
        for t in range(1, c.D + 1):
            p = sum(c.val("PG", m.id, i, t) for i in NG)
            q = sum(c.val("QG", m.id, i, t) for i in NG)
            c.le("6b", (m.id, t), math.hypot(p, q), m.s_rated_kva / base, "generator apparent power above rating")


# ------------------------------------------------------------------- fuel
# Litre quantities are compared after division by the owner's fuel capacity.


def _has_fuel(c: _Ctx) -> bool:
    return bool(c.scn.fleet.fuel_sites)


def _c7a(c: _Ctx):
    if not _has_fuel(c):
        return
    for m in c.scn.fleet.generators:
        F = m.fuel_capacity_l
        for i in c.scn.access.generator_nodes:
            for t in range(1, c.D + 1):
                B = c.val("B", m.id, i, t)
                c.le("7a", (m.id, i, t), -B / F, 0.0, "negative fuel demand")
                c.le("7a", (m.id, i, t), B / F, m.fuel_max_per_span_l * c.val("x", m.id, i, t) / F,
                     "fuel demand above limit or while not parked")


def _c7b(c: _Ctx):
    if not _has_fuel(c):
        return
    for m in c.scn.fleet.generators:
        for i in c.scn.access.depots:
            for t in range(1, c.D + 1):
                c.eq("7b", (m.id, i, t), c.val("B", m.id, i, t) / m.fuel_capacity_l, 0.0, "fuel demand at a depot")


def _c7d(c: _Ctx):
    if not _has_fuel(c):
        return
    base, dt = c.scn.network.base_kva, c.scn.time.span_length_h
    NG = c.scn.access.generator_nodes
    for m in c.scn.fleet.generators:
        pts = m.fuel_breakpoints()
        for t in range(1, c.D + 1):
            p_kw = sum(c.val("PG", m.id, i, t) for i in NG) * base
            used = sum(c.val("B", m.id, i, t) for i in NG)
            c.eq("7d", (m.id, t), used / m.fuel_capacity_l, m.fuel_rate(p_kw) * dt / m.fuel_capacity_l,
                 "fuel demand differs from the interpolated fuel curve")
            for l in range(1, len(pts)):
                if c.on("tau", m.id, t, l):
                    lo, hi = pts[l - 1][0], pts[l][0]
                    c.logic("7d", (m.id, t, l), lo - c.tol * base <= p_kw <= hi + c.tol * base,
                            f"selected segment [{lo}, {hi}] kW excludes {p_kw:.6g} kW")


def _c7e(c: _Ctx):
    if not _has_fuel(c):
        return
    for m in c.scn.fleet.generators:
        n = len(m.fuel_breakpoints()) - 1
        for t in range(1, c.D + 1):
            c.eq("7e", (m.id, t), sum(c.val("tau", m.id, t, l) for l in range(1, n + 1)), 1.0,
                 "exactly one fuel-curve segment")


def _c7f(c: _Ctx):
    if not _has_fuel(c):
        return
    sites, NG = c.scn.access.fuel_sites, c.scn.access.generator_nodes
    for m in c.scn.fleet.generators:
        F = m.fuel_capacity_l
        for t in range(1, c.D + 1):
            for i in sites:
                bp, B = c.val("Bp", m.id, i, t), c.val("B", m.id, i, t)
                c.le("7f", (m.id, i, t), -bp / F, 0.0, "negative extra fuel")
                c.le("7f", (m.id, i, t), bp / F, B / F, "extra fuel above demand at the node")
            used = sum(c.val("B", m.id, i, t) for i in NG)
            extra = sum(c.val("Bp", m.id, i, t) for i in NG)
            onboard = F * c.val("SOF", m.id, t - 1)
            c.eq("7f", (m.id, t), extra / F, max(0.0, used - onboard) / F, "extra fuel differs from the shortfall")
            if c.on("b", m.id, t):
                c.le("7f", (m.id, t, "b"), used / F, onboard / F, "sufficiency flag set with a shortfall")
            else:
                c.le("7f", (m.id, t, "b"), onboard / F, used / F, "sufficiency flag cleared without a shortfall")


def _c7g(c: _Ctx):
    if not _has_fuel(c):
        return
    sites = c.scn.access.fuel_sites
    for m in c.scn.fleet.generators:
        F = m.fuel_capacity_l
        for t in range(1, c.D + 1):
            net = sum(c.val("B", m.id, i, t) - c.val("Bp", m.id, i, t) - c.val("G", m.id, i, t) for i in sites)
            c.eq("7g", (m.id, t), c.val("SOF", m.id, t), c.val("SOF", m.id, t - 1) - net / F, "generator fuel balance")


def _c7h(c: _Ctx):
    if not _has_fuel(c):
        return
    sites = c.scn.access.fuel_sites
    for h in c.scn.fleet.tankers:
        for t in range(1, c.D + 1):
            out = sum(c.val("Dh", h.id, i, t) for i in sites)
            c.eq("7h", (h.id, t), c.val("SOF", h.id, t), c.val("SOF", h.id, t - 1) - out / h.fuel_capacity_l,
                 "tanker fuel balance")


def _c7i(c: _Ctx):
    if not _has_fuel(c):
        return
    for i in c.scn.access.fuel_sites:
        F = c.scn.fleet.fuel_site(i).fuel_capacity_l
        for t in range(1, c.D + 1):
            net = sum(c.val("Dh", h.id, i, t) for h in c.scn.fleet.tankers)
            net -= sum(c.val("Bp", m.id, i, t) + c.val("G", m.id, i, t) for m in c.scn.fleet.generators)
            c.eq("7i", (i, t), c.val("SOF", i, t), c.val("SOF", i, t - 1) + net / F, "site fuel balance")


def _exchange_gate(c: _Ctx, fam: str, mers):
    for e in mers:
        for i in c.scn.access.fuel_sites:
            for t in range(1, c.D + 1):
                c.logic(fam, (e.id, i, t), not c.on("l", e.id, i, t) or c.on("x", e.id, i, t),
                        "fuel exchange while not parked at the site")


def _c7j(c: _Ctx):
    if _has_fuel(c):
        _exchange_gate(c, "7j", c.scn.fleet.generators)


def _c7k(c: _Ctx):
    if not _has_fuel(c):
        return
    for m in c.scn.fleet.generators:
        for i in c.scn.access.fuel_sites:
            for t in range(1, c.D + 1):
                g = c.val("G", m.id, i, t) / m.fuel_capacity_l
                c.le("7k", (m.id, i, t), abs(g), float(c.on("l", m.id, i, t)), "refuelling without exchange flag")


def _c7l(c: _Ctx):
    if _has_fuel(c):
        _exchange_gate(c, "7l", c.scn.fleet.tankers)


def _c7m(c: _Ctx):
    if not _has_fuel(c):
        return
    dt = c.scn.time.span_length_h
    for h in c.scn.fleet.tankers:
        F = h.fuel_capacity_l
        for i in c.scn.access.fuel_sites:
            for t in range(1, c.D + 1):
                d, l = c.val("Dh", h.id, i, t), float(c.on("l", h.id, i, t))
                c.le("7m", (h.id, i, t), d / F, h.rate_out_l_per_h * dt * l / F, "tanker delivery above rate")
                c.le("7m", (h.id, i, t), -d / F, h.rate_in_l_per_h * dt * l / F, "tanker intake above rate")


def _owners(c: _Ctx):
    f = c.scn.fleet
    return ([(m.id, m.sof_init) for m in f.generators] + [(h.id, h.sof_init) for h in f.tankers]
            + [(s.id, s.sof_init) for s in f.fuel_sites])


def _c7n(c: _Ctx):
    if _has_fuel(c):
        for o, init in _owners(c):
            c.eq("7n", (o,), c.val("SOF", o, 0), init, "initial state of fuel")


def _c7o(c: _Ctx):
    if _has_fuel(c):
        for o, _ in _owners(c):
            for t in range(1, c.D + 1):
                s = c.val("SOF", o, t)
                c.le("7o", (o, t), -s, 0.0, "state of fuel below zero")
                c.le("7o", (o, t), s, 1.0, "state of fuel above capacity")


# -------------------------------------------------------------- radiality


def _arcs(scn: Scenario):
    for br in scn.network.branches:
        yield br.from_node, br.to_node
        yield br.to_node, br.from_node


def _flow_balance(c: _Ctx, fam: str, want: Callable[[str, str], float]):
    net = c.scn.network
    root = net.substation
    for t in range(1, c.D + 1):
        for ix in net.node_ids:
            if ix == root:
                continue
            bal = {i: 0.0 for i in net.node_ids}
            for a, b in _arcs(c.scn):
                f = c.val("f", ix, a, b, t)
                bal[b] += f
                bal[a] -= f
            for i in net.node_ids:
                target = want(ix, i)
                if target is not None:
                    c.eq(fam(i, ix) if callable(fam) else fam, (ix, i, t), bal[i], target, "commodity flow balance")


def _c8a(c: _Ctx):
    root = c.scn.network.substation
    _flow_balance(c, "8a", lambda ix, i: -1.0 if i == root else None)


def _c8b(c: _Ctx):
    _flow_balance(c, "8b", lambda ix, i: 1.0 if i == ix else None)


def _c8c(c: _Ctx):
    root = c.scn.network.substation
    _flow_balance(c, "8c", lambda ix, i: 0.0 if i not in (ix, root) else None)


def _c8d(c: _Ctx):
    net = c.scn.network
    for t in range(1, c.D + 1):
        for ix in net.node_ids:
            if ix == net.substation:
                continue
            for a, b in _arcs(c.scn):
                f = c.val("f", ix, a, b, t)
                c.le("8d", (ix, a, b, t), -f, 0.0, "negative commodity flow")
                c.le("8d", (ix, a, b, t), f, c.val("lambda", a, b, t), "commodity flow on an unused arc")


def _c8e(c: _Ctx):
    net = c.scn.network
    for t in range(1, c.D + 1):
        n = sum(c.val("lambda", a, b, t) for a, b in _arcs(c.scn))
        c.eq("8e", (t,), n, len(net.nodes) - 1, "fictitious tree arc count")
        g = nx.Graph()
        g.add_nodes_from(net.node_ids)
        g.add_edges_from(br.key for br in net.branches if c.on("mu", *br.key, t))
        c.logic("8e", (t, "tree"), nx.is_tree(g), "fictitious branches do not form a spanning tree")


def _c8f(c: _Ctx):
    for t in range(1, c.D + 1):
        for br in c.scn.network.branches:
            a, b = br.key
            c.eq("8f", (a, b, t), c.val("mu", a, b, t), c.val("lambda", a, b, t) + c.val("lambda", b, a, t),
                 "tree branch differs from its arcs")


def _c8g(c: _Ctx):
    net = c.scn.network
    for t in range(1, c.D + 1):
        g = nx.Graph()
        g.add_nodes_from(net.node_ids)
        for br in net.branches:
            a, b = br.key
            closed = c.on("kappa", a, b, t)
            c.logic("8g", (a, b, t), not closed or c.on("mu", a, b, t), "closed branch outside the spanning tree")
            if closed:
                g.add_edge(a, b)
        c.logic("8g", (t, "forest"), nx.is_forest(g), "closed branches contain a cycle")


# ------------------------------------------------------------ power flow


def _injection(c: _Ctx, i: str, t: int) -> tuple[float, float]:
    a1, a2 = derive_access_coefficients(c.scn)[i]
    p = q = 0.0
    if a1 and i in c.scn.access.storage_nodes:
        for k in c.scn.fleet.modules:
            p += c.val("Pd", k.id, i, t) - c.val("Pc", k.id, i, t)
            q += c.val("Qs", k.id, i, t)
    if a2 and i in c.scn.access.generator_nodes:
        for m in c.scn.fleet.generators:
            p += c.val("PG", m.id, i, t)
            q += c.val("QG", m.id, i, t)
    return p, q


def _grid_nodes(c: _Ctx):
    root = c.scn.network.substation
    return [i for i in c.scn.network.node_ids if i != root or not c.scn.study.substation_energized]


def _c9a(c: _Ctx):
    for t in range(1, c.D + 1):
        for i in _grid_nodes(c):
            c.eq("9a", (i, t), c.val("Pin", i, t), _injection(c, i, t)[0], "active injection differs from sources")


def _c9b(c: _Ctx):
    for t in range(1, c.D + 1):
        for i in _grid_nodes(c):
            c.eq("9b", (i, t), c.val("Qin", i, t), _injection(c, i, t)[1], "reactive injection differs from sources")


def _balance(c: _Ctx, fam: str, flow: str, inj: str, which: int):
    net = c.scn.network
    for t in range(1, c.D + 1):
        for i in net.node_ids:
            s = c.val(inj, i, t) - c.val("delta", i, t) * c.scn.load_pu(i, t)[which]
            for br in net.branches:
                if br.to_node == i:
                    s += c.val(flow, *br.key, t)
                elif br.from_node == i:
                    s -= c.val(flow, *br.key, t)
            c.eq(fam, (i, t), s, 0.0, "nodal power balance")


def _c9c(c: _Ctx):
    _balance(c, "9c", "P", "Pin", 0)


def _c9d(c: _Ctx):
    _balance(c, "9d", "Q", "Qin", 1)


def _c9e(c: _Ctx):
    for i in c.scn.network.node_ids:
        for t in range(2, c.D + 1):
            c.logic("9e", (i, t), c.on("delta", i, t) or not c.on("delta", i, t - 1), "picked-up load dropped")


def _c9f(c: _Ctx):
    for t in range(1, c.D + 1):
        for br in c.scn.network.branches:
            a, b = br.key
            if c.on("kappa", a, b, t):
                drop = c.val("V2", a, t) - 2 * (br.r_pu * c.val("P", a, b, t) + br.x_pu * c.val("Q", a, b, t))
                c.eq("9f", (a, b, t), c.val("V2", b, t), drop, "voltage drop across a closed branch")


def _c9g(c: _Ctx):
    net = c.scn.network
    for t in range(1, c.D + 1):
        for i in net.node_ids:
            v = c.val("V2", i, t)
            c.le("9g", (i, t), net.v_min ** 2, v, "voltage below minimum")
            c.le("9g", (i, t), v, net.v_max ** 2, "voltage above maximum")
    if c.scn.study.substation_energized:
        for t in range(1, c.D + 1):
            c.eq("9g", (net.substation, t), c.val("V2", net.substation, t), 1.0, "substation voltage not nominal")


def _c9h(c: _Ctx):
    base = c.scn.network.base_kva
    for t in range(1, c.D + 1):
        for br in c.scn.network.branches:
            cap = br.s_max_kva / base if c.on("kappa", *br.key, t) else 0.0
            s = math.hypot(c.val("P", *br.key, t), c.val("Q", *br.key, t))
            c.le("9h", br.key + (t,), s, cap, "branch flow above capacity or on an open branch")


def _c9i(c: _Ctx):
    for t in range(1, c.D + 1):
        fs = fault_sets_at(c.scn, t)
        for key in sorted(fs.branches_open):
            c.logic("9i", key + (t,), not c.on("kappa", *key, t), "faulted branch closed")
        for key in sorted(fs.branches_closed):
            c.logic("9i", key + (t,), c.on("kappa", *key, t), "repaired branch left open")
        for i in sorted(fs.nodes_open):
            c.logic("9i", (i, t), not c.on("delta", i, t), "faulted node picked up")
        for i in sorted(fs.nodes_closed):
            c.logic("9i", (i, t), c.on("delta", i, t) or not c.on("eta", i, t), "repaired energized node not picked up")


def _c9j(c: _Ctx):
    if c.scn.study.substation_energized:
        for t in range(1, c.D + 1):
            c.logic("9j", (t,), c.on("eta", c.scn.network.substation, t), "substation not energized")


def _source_present(c: _Ctx, i: str, t: int) -> bool:
    a1, a2 = derive_access_coefficients(c.scn)[i]
    if a1 and i in c.scn.access.storage_nodes and any(c.on("zeta", k.id, i, t) for k in c.scn.fleet.modules):
        return True
    return bool(a2 and i in c.scn.access.generator_nodes
                and any(c.on("x", m.id, i, t) for m in c.scn.fleet.generators))


def _c9k(c: _Ctx):
    NS = set(c.scn.access.storage_nodes)
    for t in range(1, c.D + 1):
        skip = any((k.id, t) in c.bad_owner for k in c.scn.fleet.modules)
        for i in _grid_nodes(c):
            if skip and i in NS:
                continue
            c.logic("9k", (i, t), c.on("rho", i, t) == _source_present(c, i, t), "source flag differs from presence")


def _fed(c: _Ctx, i: str, t: int) -> bool:
    for br in c.scn.network.branches:
        if i in br.key and c.on("kappa", *br.key, t):
            other = br.to_node if br.from_node == i else br.from_node
            if c.on("eta", other, t):
                return True
    return False


def _c9l(c: _Ctx):
    for t in range(1, c.D + 1):
        for i in _grid_nodes(c):
            c.logic("9l", (i, t), c.on("sigma", i, t) == _fed(c, i, t), "neighbour flag differs from topology")


def _c9m(c: _Ctx):
    for t in range(1, c.D + 1):
        for i in _grid_nodes(c):
            c.logic("9m", (i, t), c.on("eta", i, t) == (c.on("rho", i, t) or c.on("sigma", i, t)),
                    "energization differs from source or neighbour")
    # reachability: an energized island should contain a real source
    net = c.scn.network
    for t in range(1, c.D + 1):
        g = nx.Graph()
        g.add_nodes_from(net.node_ids)
        g.add_edges_from(br.key for br in net.branches if c.on("kappa", *br.key, t))
        for comp in nx.connected_components(g):
            sourced = any(_source_present(c, i, t) for i in comp) or (
                c.scn.study.substation_energized and net.substation in comp)
            if not sourced:
                lit = sorted(i for i in comp if c.on("eta", i, t))
                if lit:
                    c.warnings.append(f"span {t}: nodes {lit} flagged energized without a reachable source")


def _c10(c: _Ctx):
    for t in range(1, c.D + 1):
        for br in c.scn.network.branches:
            a, b = br.key
            for s, d in ((a, b), (b, a)):
                want = c.on("eta", s, t) and c.on("kappa", a, b, t)
                c.logic("10", (s, d, t), c.on("chi", s, d, t) == want, "product flag differs from its factors")


def _xpickup(c: _Ctx):
    if c.scn.study.strict_pickup:
        for t in range(1, c.D + 1):
            for i in c.scn.network.node_ids:
                c.logic("xpickup", (i, t), c.on("eta", i, t) or not c.on("delta", i, t),
                        "load picked up at a de-energized node")


# -------------------------------------------------------------- case rows


def _case(c: _Ctx, case: str | None = None):
    scn, D = c.scn, c.D
    case = case or scn.study.case
    NS = scn.access.storage_nodes
    if case == "Case1":
        for t in range(1, D + 1):
            for k in scn.fleet.modules:
                for i in NS:
                    for fam in ("Pc", "Pd", "Qs"):
                        c.eq("case", (fam, k.id, i, t), c.val(fam, k.id, i, t), 0.0, "mobile storage output")
            for m in scn.fleet.generators:
                for i in scn.access.generator_nodes:
                    for fam in ("PG", "QG"):
                        c.eq("case", (fam, m.id, i, t), c.val(fam, m.id, i, t), 0.0, "mobile generator output")
    elif case == "Case2":
        fixed = scn.study.fixed_positions
        for t in range(1, D + 1):
            for k in scn.fleet.modules:
                c.logic("case", (k.id, t), c.on("zeta", k.id, fixed.get(k.id, k.start), t), "stationary module moved")
            for m in scn.fleet.generators:
                c.logic("case", (m.id, t), c.on("x", m.id, fixed.get(m.id, m.start), t), "stationary generator moved")
    elif case == "Case3":
        for j, group in (scn.study.bundles or default_bundles(scn)).items():
            for k in group:
                for t in range(D + 1):
                    moving = any(c.on("v", j, i, t) for i in NS)
                    c.logic("case", (k, j, t), c.on("gamma", k, j, t) == moving, "bundled module left its carrier")
                    for i in NS:
                        c.logic("case", (k, j, i, t), c.on("zeta", k, i, t) == c.on("x", j, i, t),
                                "bundled module apart from its carrier")
    elif case == "Case4":
        for h in scn.fleet.tankers:
            for t in range(1, D + 1):
                c.logic("case", (h.id, t), c.on("x", h.id, h.start, t), "tanker moved")
                for i in scn.access.fuel_sites:
                    c.logic("case", (h.id, i, t), not c.on("l", h.id, i, t), "tanker exchange")
                    c.eq("case", (h.id, i, t, "D"), c.val("Dh", h.id, i, t), 0.0, "tanker transfer")


CHECKERS: dict[str, Callable[[_Ctx], None]] = {
    "1a": _c1a, "1b": _c1b, "1c": _c1c, "1d": _c1d, "1e": _c1e, "1f": _c1f, "1g": _c1g,
    "2a": _c2a, "2b": _c2b, "2c": _c2c, "3a": _c3a, "3b": _c3b, "3c": _c3c,
    "4a": _c4a, "4b": _c4b, "4c": _c4c,
    "5a": _c5a, "5b": _c5b, "5c": _c5c, "5d": _c5d, "5e": _c5e, "5f": _c5f, "6a": _c6a, "6b": _c6b,
    "7a": _c7a, "7b": _c7b, "7d": _c7d, "7e": _c7e, "7f": _c7f, "7g": _c7g, "7h": _c7h, "7i": _c7i,
    "7j": _c7j, "7k": _c7k, "7l": _c7l, "7m": _c7m, "7n": _c7n, "7o": _c7o,
    "8a": _c8a, "8b": _c8b, "8c": _c8c, "8d": _c8d, "8e": _c8e, "8f": _c8f, "8g": _c8g,
    "9a": _c9a, "9b": _c9b, "9c": _c9c, "9d": _c9d, "9e": _c9e, "9f": _c9f, "9g": _c9g, "9h": _c9h,
    "9i": _c9i, "9j": _c9j, "9k": _c9k, "9l": _c9l, "9m": _c9m, "10": _c10,
    "xtravel": _xtravel, "xpickup": _xpickup, "case": _case,
}


def check_schedule(scn: Scenario, schedule: Schedule, tol: float = DEFAULT_TOL,
                   case: str | None = None) -> ViolationReport:
    """Re-evaluate every constraint family on ``schedule``; ``case`` overrides the study case."""
    if schedule.span_count != scn.time.span_count:
        raise DimensionError(f"schedule has {schedule.span_count} spans, scenario has {scn.time.span_count}")
    ctx = _Ctx(scn, schedule, tol)
    for fam, fn in CHECKERS.items():
        if fam == "case":
            _case(ctx, case)
        else:
            fn(ctx)
    return ViolationReport(tol, ctx.out, ctx.warnings, tuple(CHECKERS))


# --------------------------------------------------------------- objective


@dataclass(frozen=True)
class ObjectiveTerms:
    total: float
    restored: float  # weighted kWh
    travel_penalty: float
    fuel_penalty: float
    travel_spans: dict[str, int]  # by MER class
    exchange_spans: dict[str, int]

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.restored, self.travel_penalty, self.fuel_penalty)

    def as_dict(self) -> dict:
        return asdict(self)


def _span_counts(scn: Scenario, schedule: Schedule, t: int) -> tuple[dict[str, int], dict[str, int]]:
    travel = {"carrier": 0, "generator": 0, "tanker": 0}
    exch = {"generator": 0, "tanker": 0}
    for cls, mers in (("carrier", scn.fleet.carriers), ("generator", scn.fleet.generators),
                      ("tanker", scn.fleet.tankers)):
        for m in mers:
            travel[cls] += int(sum(schedule.get("v", m.id, i, t, default=0.0) > 0.5 for i in scn.sites_of(m.id)))
            if cls != "carrier":
                exch[cls] += int(sum(schedule.get("l", m.id, i, t, default=0.0) > 0.5
                                     for i in scn.access.fuel_sites))
    return travel, exch


def recompute_objective(scn: Scenario, schedule: Schedule) -> ObjectiveTerms:
    """Weighted restored energy minus travel and fuel-exchange penalties, term by term."""
    dt = scn.time.span_length_h
    restored = 0.0
    travel = {"carrier": 0, "generator": 0, "tanker": 0}
    exch = {"generator": 0, "tanker": 0}
    for t in range(1, scn.time.span_count + 1):
        for n in scn.network.nodes:
            if schedule.get("delta", n.id, t, default=0.0) > 0.5:
                restored += n.weight * n.p_kw[t - 1] * dt
        tr, ex = _span_counts(scn, schedule, t)
        for k in travel:
            travel[k] += tr[k]
        for k in exch:
            exch[k] += ex[k]
    tp = scn.study.phi_travel * sum(travel.values())
    fp = scn.study.phi_fuel * sum(exch.values())
    return ObjectiveTerms(restored - tp - fp, restored, tp, fp, travel, exch)


# --------------------------------------------------------------- resilience


@dataclass(frozen=True)
class ResilienceSeries:
    served_kw: np.ndarray  # weighted served power per span (length D)
    cumulative_restored: np.ndarray  # weighted kWh
    cumulative_travel_penalty: np.ndarray
    cumulative_fuel_penalty: np.ndarray

    def rows(self) -> list[dict]:
        return [{"span": t + 1, "served_kw": float(self.served_kw[t]),
                 "cumulative_restored": float(self.cumulative_restored[t]),
                 "cumulative_travel_penalty": float(self.cumulative_travel_penalty[t]),
                 "cumulative_fuel_penalty": float(self.cumulative_fuel_penalty[t])}
                for t in range(len(self.served_kw))]

    def to_json(self) -> str:
        return json.dumps(self.rows(), indent=1) + "\n"

    def to_tsv(self) -> str:
        buf = io.StringIO()
        rows = self.rows()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]) if rows else ["span"], delimiter="\t",
                           lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.9g}" if isinstance(v, float) else v) for k, v in r.items()})
        return buf.getvalue()


def resilience_series(scn: Scenario, schedule: Schedule) -> ResilienceSeries:
    D, dt = scn.time.span_count, scn.time.span_length_h
    served = np.zeros(D)
    tp = np.zeros(D)
    fp = np.zeros(D)
    for t in range(1, D + 1):
        served[t - 1] = sum(n.weight * n.p_kw[t - 1] for n in scn.network.nodes
                            if schedule.get("delta", n.id, t, default=0.0) > 0.5)
        tr, ex = _span_counts(scn, schedule, t)
        tp[t - 1] = scn.study.phi_travel * sum(tr.values())
        fp[t - 1] = scn.study.phi_fuel * sum(ex.values())
    return ResilienceSeries(served, np.cumsum(served * dt), np.cumsum(tp), np.cumsum(fp))


def idle_schedule(scn: Scenario, backend: str = "highs") -> Schedule:
    """A feasible schedule with no pickup, no travel and no exchange (raises if none exists)."""
    from .assembly import assemble
    from .milp import EQ
    from .solver import SolveOptions, solve

    model = assemble(scn)
    for fam in ("delta", "v", "l", "Pc", "Pd", "PG"):
        for idx, vid in model.handles.get(fam, {}).items():
            model.add_row("idle", idx, [(vid, 1.0)], EQ, 0.0, part=fam)
    model.set_objective(LinExpr())
    res = solve(model, SolveOptions(gap=0.0, backend=backend), scn.time.span_count)
    if res.schedule is None:
        raise ValueError(f"no idle schedule exists ({res.status})")
    return res.schedule
