"""Scenario data model: network, access sites, faults, fleet, travel times, study settings.

A scenario document is a JSON object validated against ``schema/scenario.schema.json``
and then cross-checked (references and physical invariants).  Impedances are converted
to per-unit at parse time; powers are kept in kW/kvar/kVA on the dataclasses and exposed
in per-unit through ``*_pu`` helpers so reports can stay in physical units.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping

import jsonschema
import networkx as nx

CASES = ("Case1", "Case2", "Case3", "Case4", "Case5")


class ScenarioError(ValueError):
    """Raised for any problem in a scenario document.

    ``kind`` is one of ``"schema"``, ``"reference"`` or ``"invariant"`` and ``path``
    points into the document (dotted, with list indices in brackets).
    """

    def __init__(self, kind: str, path: str, message: str):
        self.kind = kind
        self.path = path
        super().__init__(f"{kind} error at {path or '<root>'}: {message}")


# ---------------------------------------------------------------- dataclasses


@dataclass(frozen=True)
class TimeGrid:
    span_count: int
    span_length_h: float

    @property
    def horizon_h(self) -> float:
        return self.span_count * self.span_length_h

    @property
    def spans(self) -> range:
        """Scheduling spans 1..D (0 is reserved for initial conditions)."""
        return range(1, self.span_count + 1)


@dataclass(frozen=True)
class Node:
    id: str
    p_kw: tuple[float, ...]  # one entry per span 1..D
    q_kvar: tuple[float, ...]
    weight: float

    @property
    def has_load(self) -> bool:
        return any(p != 0.0 for p in self.p_kw) or any(q != 0.0 for q in self.q_kvar)


@dataclass(frozen=True)
class Branch:
    from_node: str
    to_node: str
    r_pu: float
    x_pu: float
    s_max_kva: float

    @property
    def key(self) -> tuple[str, str]:
        return (self.from_node, self.to_node)


@dataclass(frozen=True)
class NetworkSpec:
    nodes: tuple[Node, ...]
    branches: tuple[Branch, ...]
    substation: str
    v_min: float
    v_max: float
    base_kva: float
    base_kv: float

    @cached_property
    def node_ids(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nodes)

    @cached_property
    def node_index(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.node_ids)}

    @cached_property
    def branch_index(self) -> dict[tuple[str, str], int]:
        """Both orientations of every branch map to its position in ``branches``."""
        out = {}
        for b, br in enumerate(self.branches):
            out[(br.from_node, br.to_node)] = b
            out[(br.to_node, br.from_node)] = b
        return out

    def node(self, node_id: str) -> Node:
        return self.nodes[self.node_index[node_id]]

    def incident(self, node_id: str) -> list[int]:
        return [b for b, br in enumerate(self.branches) if node_id in br.key]

    def to_pu(self, kw: float) -> float:
        return kw / self.base_kva


@dataclass(frozen=True)
class AccessSpec:
    storage_nodes: tuple[str, ...]
    generator_nodes: tuple[str, ...]
    depots: tuple[str, ...]

    @property
    def fuel_sites(self) -> tuple[str, ...]:
        """Generator/tanker-accessible sites: generator nodes followed by depots."""
        return self.generator_nodes + self.depots


@dataclass(frozen=True)
class FaultSets:
    nodes_open: frozenset[str] = frozenset()
    nodes_closed: frozenset[str] = frozenset()
    branches_open: frozenset[tuple[str, str]] = frozenset()
    branches_closed: frozenset[tuple[str, str]] = frozenset()

    def size(self) -> int:
        return (len(self.nodes_open) + len(self.nodes_closed)
                + len(self.branches_open) + len(self.branches_closed))

    def issubset(self, other: FaultSets) -> bool:
        return (self.nodes_open <= other.nodes_open and self.nodes_closed <= other.nodes_closed
                and self.branches_open <= other.branches_open
                and self.branches_closed <= other.branches_closed)


@dataclass(frozen=True)
class FaultTimeline:
    by_span: tuple[FaultSets, ...]  # index t-1 holds span t


@dataclass(frozen=True)
class Carrier:
    id: str
    capacity: float
    start: str


@dataclass(frozen=True)
class Module:
    id: str
    weight: float
    p_charge_max_kw: float
    p_discharge_max_kw: float
    s_rated_kva: float
    energy_kwh: float
    eff_charge: float
    eff_discharge: float
    soc_init: float
    soc_min: float
    soc_max: float
    start: str


@dataclass(frozen=True)
class Generator:
    id: str
    p_max_kw: float
    q_max_kvar: float
    s_rated_kva: float
    fuel_capacity_l: float
    fuel_max_per_span_l: float
    fuel_curve: tuple[tuple[float, float], ...]  # published (kW, L/h) points
    sof_init: float
    start: str

    def fuel_breakpoints(self) -> tuple[tuple[float, float], ...]:
        """Curve used by the model: an idle (0 kW, 0 L/h) point is prepended when absent."""
        pts = self.fuel_curve
        if pts[0][0] > 0.0:
            pts = ((0.0, 0.0),) + pts
        return pts

    def fuel_rate(self, p_kw: float) -> float:
        """Exact piecewise-linear interpolation of the fuel rate (L/h) at ``p_kw``."""
        pts = self.fuel_breakpoints()
        for (p0, r0), (p1, r1) in zip(pts, pts[1:]):
            if p_kw <= p1:
                return r0 + (r1 - r0) * (p_kw - p0) / (p1 - p0)
        (p0, r0), (p1, r1) = pts[-2], pts[-1]
        return r0 + (r1 - r0) * (p_kw - p0) / (p1 - p0)


@dataclass(frozen=True)
class Tanker:
    id: str
    fuel_capacity_l: float
    rate_in_l_per_h: float
    rate_out_l_per_h: float
    sof_init: float
    start: str


@dataclass(frozen=True)
class FuelSite:
    id: str
    fuel_capacity_l: float
    sof_init: float


@dataclass(frozen=True)
class FleetSpec:
    carriers: tuple[Carrier, ...] = ()
    modules: tuple[Module, ...] = ()
    generators: tuple[Generator, ...] = ()
    tankers: tuple[Tanker, ...] = ()
    fuel_sites: tuple[FuelSite, ...] = ()

    def fuel_site(self, site_id: str) -> FuelSite:
        for s in self.fuel_sites:
            if s.id == site_id:
                return s
        raise KeyError(site_id)

    @property
    def mer_ids(self) -> tuple[str, ...]:
        return (tuple(c.id for c in self.carriers) + tuple(g.id for g in self.generators)
                + tuple(h.id for h in self.tankers))


@dataclass(frozen=True)
class TravelTimes:
    """Resolved travel spans: ``table[mer_id][(a, b)]`` for every ordered pair a != b."""

    table: Mapping[str, Mapping[tuple[str, str], int]]

    def spans(self, mer_id: str, a: str, b: str) -> int:
        if a == b:
            return 0
        return self.table[mer_id][(a, b)]


@dataclass(frozen=True)
class StudyConfig:
    phi_travel: float = 0.1
    phi_fuel: float = 0.1
    case: str = "Case5"
    substation_energized: bool = True
    mip_gap: float = 0.001
    big_m_policy: str = "tight"
    disk_segments: int = 8
    strict_pickup: bool = False
    exact_travel: bool = False
    fixed_positions: Mapping[str, str] = field(default_factory=dict)
    bundles: Mapping[str, tuple[str, ...]] = field(default_factory=dict)


@dataclass(frozen=True)
class Scenario:
    name: str
    time: TimeGrid
    network: NetworkSpec
    access: AccessSpec
    faults: FaultTimeline
    fleet: FleetSpec
    travel: TravelTimes
    study: StudyConfig

    def with_study(self, **changes: Any) -> Scenario:
        """Copy with some study settings replaced (re-validated)."""
        study = dataclasses.replace(self.study, **changes)
        _check_study(self, study)
        return dataclasses.replace(self, study=study)

    def sites_of(self, mer_id: str) -> tuple[str, ...]:
        if any(c.id == mer_id for c in self.fleet.carriers):
            return self.access.storage_nodes
        return self.access.fuel_sites

    def start_of(self, mer_id: str) -> str:
        for m in self.fleet.carriers + self.fleet.generators + self.fleet.tankers:
            if m.id == mer_id:
                return m.start
        raise KeyError(mer_id)

    def load_pu(self, node_id: str, t: int) -> tuple[float, float]:
        n = self.network.node(node_id)
        return n.p_kw[t - 1] / self.network.base_kva, n.q_kvar[t - 1] / self.network.base_kva


# ------------------------------------------------------------------ operations


def derive_access_coefficients(scenario: Scenario) -> dict[str, tuple[int, int]]:
    """Injection coefficients (a1, a2) per node: storage access, generator access."""
    s = set(scenario.access.storage_nodes)
    g = set(scenario.access.generator_nodes)
    return {i: (int(i in s), int(i in g)) for i in scenario.network.node_ids}


def fault_sets_at(scenario: Scenario, t: int) -> FaultSets:
    """Fault sets active during span ``t`` (1-based)."""
    if not 1 <= t <= scenario.time.span_count:
        raise IndexError(f"span {t} outside 1..{scenario.time.span_count}")
    return scenario.faults.by_span[t - 1]


def load_schema() -> dict:
    text = resources.files("smess").joinpath("schema/scenario.schema.json").read_text()
    return json.loads(text)


def load_scenario(path: str | Path) -> Scenario:
    with open(path) as fh:
        return parse_scenario(json.load(fh))


def parse_scenario(document: Mapping[str, Any] | str) -> Scenario:
    """Validate a scenario document and build a cross-linked :class:`Scenario`."""
    if isinstance(document, str):
        document = json.loads(document)
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(document), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ScenarioError("schema", _path(err.absolute_path), err.message)

    doc = document
    tdoc = doc["time"]
    time = TimeGrid(tdoc["span_count"], float(tdoc["span_length_h"]))
    if time.span_count < 1:
        raise ScenarioError("invariant", "time.span_count", "must be >= 1")
    if time.span_length_h <= 0:
        raise ScenarioError("invariant", "time.span_length_h", "must be > 0")
    D = time.span_count

    network = _parse_network(doc["network"], D)
    access = _parse_access(doc["access"], network)
    faults = _parse_faults(doc["faults"], network, D)
    fleet = _parse_fleet(doc["fleet"], access, time)
    travel = _parse_travel(doc["travel"], access, fleet)

    scn = Scenario(
        name=doc.get("name", "scenario"),
        time=time, network=network, access=access, faults=faults,
        fleet=fleet, travel=travel, study=StudyConfig(),
    )
    study = _parse_study(doc["study"], scn)
    _check_study(scn, study)
    return dataclasses.replace(scn, study=study)


def scenario_to_document(scn: Scenario) -> dict:
    """Inverse of :func:`parse_scenario` (impedances written in per-unit)."""
    net = scn.network
    D = scn.time.span_count
    nodes = []
    for n in net.nodes:
        entry: dict[str, Any] = {"id": n.id, "p_kw": n.p_kw[0], "q_kvar": n.q_kvar[0], "weight": n.weight}
        if len(set(n.p_kw)) > 1:
            entry["p_profile_kw"] = list(n.p_kw)
        if len(set(n.q_kvar)) > 1:
            entry["q_profile_kvar"] = list(n.q_kvar)
        nodes.append(entry)
    branches = [{"from": b.from_node, "to": b.to_node, "r_pu": b.r_pu, "x_pu": b.x_pu,
                 "s_max_kva": b.s_max_kva} for b in net.branches]
    faults = []
    for t in range(1, D + 1):
        fs = scn.faults.by_span[t - 1]
        if fs.size() == 0:
            continue
        faults.append({
            "first_span": t, "last_span": t,
            "nodes_open": sorted(fs.nodes_open), "nodes_closed": sorted(fs.nodes_closed),
            "branches_open": [list(b) for b in sorted(fs.branches_open)],
            "branches_closed": [list(b) for b in sorted(fs.branches_closed)],
        })
    fleet = scn.fleet
    per_mer = {
        mer: {"pairs": [{"a": a, "b": b, "spans": T} for (a, b), T in sorted(tab.items())]}
        for mer, tab in scn.travel.table.items()
    }
    st = scn.study
    return {
        "schema_version": 1,
        "name": scn.name,
        "time": {"span_count": D, "span_length_h": scn.time.span_length_h},
        "network": {
            "base_kva": net.base_kva, "base_kv": net.base_kv, "substation": net.substation,
            "voltage_min_pu": net.v_min, "voltage_max_pu": net.v_max,
            "nodes": nodes, "branches": branches,
        },
        "access": {
            "storage_nodes": list(scn.access.storage_nodes),
            "generator_nodes": list(scn.access.generator_nodes),
            "depots": list(scn.access.depots),
        },
        "faults": faults,
        "fleet": {
            "carriers": [dataclasses.asdict(c) for c in fleet.carriers],
            "modules": [dataclasses.asdict(m) for m in fleet.modules],
            "generators": [
                {**{k: v for k, v in dataclasses.asdict(g).items() if k != "fuel_curve"},
                 "fuel_curve": [{"p_kw": p, "rate_l_per_h": r} for p, r in g.fuel_curve]}
                for g in fleet.generators
            ],
            "tankers": [dataclasses.asdict(h) for h in fleet.tankers],
            "fuel_sites": [dataclasses.asdict(s) for s in fleet.fuel_sites],
        },
        "travel": {"symmetric": False, "per_mer": per_mer},
        "study": {
            "phi_travel": st.phi_travel, "phi_fuel": st.phi_fuel, "case": st.case,
            "substation_energized": st.substation_energized, "mip_gap": st.mip_gap,
            "big_m_policy": st.big_m_policy, "disk_segments": st.disk_segments,
            "strict_pickup": st.strict_pickup, "exact_travel": st.exact_travel,
            "fixed_positions": dict(st.fixed_positions),
            "bundles": {k: list(v) for k, v in st.bundles.items()},
        },
    }


# --------------------------------------------------------------------- helpers


def _path(parts: Iterable[Any]) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def _unique(ids: list[str], path: str) -> None:
    seen = set()
    for k, i in enumerate(ids):
        if i in seen:
            raise ScenarioError("invariant", f"{path}[{k}]", f"duplicate id {i!r}")
        seen.add(i)


def _profile(entry: Mapping[str, Any], key: str, profile_key: str, D: int, path: str) -> tuple[float, ...]:
    if profile_key in entry:
        prof = entry[profile_key]
        if len(prof) != D:
            raise ScenarioError("invariant", f"{path}.{profile_key}", f"needs {D} entries, got {len(prof)}")
        return tuple(float(v) for v in prof)
    return (float(entry[key]),) * D


def _parse_network(ndoc: Mapping[str, Any], D: int) -> NetworkSpec:
    nodes = []
    for k, nd in enumerate(ndoc["nodes"]):
        path = f"network.nodes[{k}]"
        nodes.append(Node(nd["id"], _profile(nd, "p_kw", "p_profile_kw", D, path),
                          _profile(nd, "q_kvar", "q_profile_kvar", D, path), float(nd["weight"])))
    _unique([n.id for n in nodes], "network.nodes")
    ids = {n.id for n in nodes}
    base_kva = float(ndoc["base_kva"])
    base_kv = float(ndoc["base_kv"])
    z_base = base_kv ** 2 * 1000.0 / base_kva  # ohm
    branches = []
    seen: set[frozenset[str]] = set()
    for k, bd in enumerate(ndoc["branches"]):
        path = f"network.branches[{k}]"
        for end in ("from", "to"):
            if bd[end] not in ids:
                raise ScenarioError("reference", f"{path}.{end}", f"unknown node {bd[end]!r}")
        if bd["from"] == bd["to"]:
            raise ScenarioError("invariant", path, "self-loop branch")
        pair = frozenset((bd["from"], bd["to"]))
        if pair in seen:
            raise ScenarioError("invariant", path, "parallel branch")
        seen.add(pair)
        if "r_pu" in bd:
            r, x = float(bd["r_pu"]), float(bd["x_pu"])
        else:
            r, x = float(bd["r_ohm"]) / z_base, float(bd["x_ohm"]) / z_base
        if r < 0 or x < 0:
            raise ScenarioError("invariant", path, "r and x must be >= 0")
        if bd["s_max_kva"] <= 0:
            raise ScenarioError("invariant", f"{path}.s_max_kva", "must be > 0")
        branches.append(Branch(bd["from"], bd["to"], r, x, float(bd["s_max_kva"])))
    sub = ndoc["substation"]
    if sub not in ids:
        raise ScenarioError("reference", "network.substation", f"unknown node {sub!r}")
    vmin, vmax = float(ndoc["voltage_min_pu"]), float(ndoc["voltage_max_pu"])
    if not 0 < vmin < vmax:
        raise ScenarioError("invariant", "network.voltage_min_pu", "need 0 < V_min < V_max")
    g = nx.Graph()
    g.add_nodes_from(ids)
    g.add_edges_from(b.key for b in branches)
    if not nx.is_connected(g):
        raise ScenarioError("invariant", "network.branches", "network is not connected with all branches closed")
    return NetworkSpec(tuple(nodes), tuple(branches), sub, vmin, vmax, base_kva, base_kv)


def _parse_access(adoc: Mapping[str, Any], net: NetworkSpec) -> AccessSpec:
    ids = set(net.node_ids)
    for key in ("storage_nodes", "generator_nodes"):
        _unique(adoc[key], f"access.{key}")
        for k, i in enumerate(adoc[key]):
            if i not in ids:
                raise ScenarioError("reference", f"access.{key}[{k}]", f"unknown node {i!r}")
    _unique(adoc["depots"], "access.depots")
    for k, i in enumerate(adoc["depots"]):
        if i in ids:
            raise ScenarioError("invariant", f"access.depots[{k}]", f"depot {i!r} collides with a network node")
    return AccessSpec(tuple(adoc["storage_nodes"]), tuple(adoc["generator_nodes"]), tuple(adoc["depots"]))


def _parse_faults(fdoc: list, net: NetworkSpec, D: int) -> FaultTimeline:
    ids = set(net.node_ids)
    spans = [dict(no=set(), nc=set(), bo=set(), bc=set()) for _ in range(D)]
    for k, period in enumerate(fdoc):
        path = f"faults[{k}]"
        a, b = period["first_span"], period["last_span"]
        if not 1 <= a <= b <= D:
            raise ScenarioError("invariant", path, f"span range {a}..{b} outside 1..{D}")
        for key, tag in (("nodes_open", "no"), ("nodes_closed", "nc")):
            for m, i in enumerate(period.get(key, [])):
                if i not in ids:
                    raise ScenarioError("reference", f"{path}.{key}[{m}]", f"unknown node {i!r}")
                for t in range(a, b + 1):
                    spans[t - 1][tag].add(i)
        for key, tag in (("branches_open", "bo"), ("branches_closed", "bc")):
            for m, (u, v) in enumerate(period.get(key, [])):
                idx = net.branch_index.get((u, v))
                if idx is None:
                    raise ScenarioError("reference", f"{path}.{key}[{m}]", f"unknown branch ({u}, {v})")
                for t in range(a, b + 1):
                    spans[t - 1][tag].add(net.branches[idx].key)
    out = []
    for t, s in enumerate(spans, start=1):
        if s["no"] & s["nc"]:
            raise ScenarioError("invariant", "faults", f"span {t}: node both faulted-open and faulted-closed")
        if s["bo"] & s["bc"]:
            raise ScenarioError("invariant", "faults", f"span {t}: branch both faulted-open and faulted-closed")
        out.append(FaultSets(frozenset(s["no"]), frozenset(s["nc"]), frozenset(s["bo"]), frozenset(s["bc"])))
    for t in range(1, D):
        if not out[t].issubset(out[t - 1]):
            raise ScenarioError("invariant", "faults", f"fault sets grow between spans {t} and {t + 1}")
    return FaultTimeline(tuple(out))


def _frac(value: float, path: str) -> float:
    if not 0.0 <= value <= 1.0:
        raise ScenarioError("invariant", path, "must lie in [0, 1]")
    return float(value)


def _positive(value: float, path: str) -> float:
    if value <= 0:
        raise ScenarioError("invariant", path, "must be > 0")
    return float(value)


def _parse_fleet(fdoc: Mapping[str, Any], access: AccessSpec, time: TimeGrid) -> FleetSpec:
    dt = time.span_length_h
    s_nodes, f_sites = set(access.storage_nodes), set(access.fuel_sites)

    def start_in(entry, path, allowed, what):
        if entry["start"] not in allowed:
            raise ScenarioError("reference", f"{path}.start", f"{entry['start']!r} is not a {what} site")
        return entry["start"]

    carriers = []
    for k, c in enumerate(fdoc["carriers"]):
        p = f"fleet.carriers[{k}]"
        carriers.append(Carrier(c["id"], _positive(c["capacity"], f"{p}.capacity"),
                                start_in(c, p, s_nodes, "storage-access")))
    modules = []
    for k, m in enumerate(fdoc["modules"]):
        p = f"fleet.modules[{k}]"
        for key in ("p_charge_max_kw", "p_discharge_max_kw", "s_rated_kva", "energy_kwh"):
            _positive(m[key], f"{p}.{key}")
        for key in ("eff_charge", "eff_discharge"):
            if not 0 < m[key] <= 1:
                raise ScenarioError("invariant", f"{p}.{key}", "must lie in (0, 1]")
        lo, hi = _frac(m["soc_min"], f"{p}.soc_min"), _frac(m["soc_max"], f"{p}.soc_max")
        if lo >= hi:
            raise ScenarioError("invariant", f"{p}.soc_min", "soc_min must be < soc_max")
        weight = _positive(m.get("weight", 1.0), f"{p}.weight")
        if carriers and weight > max(c.capacity for c in carriers):
            raise ScenarioError("invariant", f"{p}.weight", "no carrier can carry this module")
        modules.append(Module(
            m["id"], weight, float(m["p_charge_max_kw"]), float(m["p_discharge_max_kw"]),
            float(m["s_rated_kva"]), float(m["energy_kwh"]), float(m["eff_charge"]),
            float(m["eff_discharge"]), _frac(m["soc_init"], f"{p}.soc_init"), lo, hi,
            start_in(m, p, s_nodes, "storage-access"),
        ))
    generators = []
    for k, g in enumerate(fdoc["generators"]):
        p = f"fleet.generators[{k}]"
        for key in ("p_max_kw", "s_rated_kva", "fuel_capacity_l"):
            _positive(g[key], f"{p}.{key}")
        if g["q_max_kvar"] < 0:
            raise ScenarioError("invariant", f"{p}.q_max_kvar", "must be >= 0")
        curve = tuple((float(pt["p_kw"]), float(pt["rate_l_per_h"])) for pt in g["fuel_curve"])
        loads = [0.0] + [c[0] for c in curve] if curve[0][0] > 0 else [c[0] for c in curve]
        if any(b <= a for a, b in zip(loads, loads[1:])) or curve[0][0] < 0:
            raise ScenarioError("invariant", f"{p}.fuel_curve", "load levels must be strictly increasing and >= 0")
        if any(r < 0 for _, r in curve):
            raise ScenarioError("invariant", f"{p}.fuel_curve", "fuel rates must be >= 0")
        if curve[-1][0] < g["p_max_kw"] - 1e-9:
            raise ScenarioError("invariant", f"{p}.fuel_curve", "curve must reach p_max_kw")
        b_max = g.get("fuel_max_per_span_l", max(r for _, r in curve) * dt)
        generators.append(Generator(
            g["id"], float(g["p_max_kw"]), float(g["q_max_kvar"]), float(g["s_rated_kva"]),
            float(g["fuel_capacity_l"]), _positive(b_max, f"{p}.fuel_max_per_span_l"), curve,
            _frac(g["sof_init"], f"{p}.sof_init"), start_in(g, p, f_sites, "generator/depot"),
        ))
    tankers = []
    for k, h in enumerate(fdoc["tankers"]):
        p = f"fleet.tankers[{k}]"
        cap = _positive(h["fuel_capacity_l"], f"{p}.fuel_capacity_l")
        tankers.append(Tanker(
            h["id"], cap, _positive(h.get("rate_in_l_per_h", cap / dt), f"{p}.rate_in_l_per_h"),
            _positive(h.get("rate_out_l_per_h", cap / dt), f"{p}.rate_out_l_per_h"),
            _frac(h["sof_init"], f"{p}.sof_init"), start_in(h, p, f_sites, "generator/depot"),
        ))
    sites = []
    for k, s in enumerate(fdoc["fuel_sites"]):
        p = f"fleet.fuel_sites[{k}]"
        if s["id"] not in f_sites:
            raise ScenarioError("reference", f"{p}.id", f"{s['id']!r} is not a generator node or depot")
        sites.append(FuelSite(s["id"], _positive(s["fuel_capacity_l"], f"{p}.fuel_capacity_l"),
                              _frac(s["sof_init"], f"{p}.sof_init")))
    mers = [c.id for c in carriers] + [g.id for g in generators] + [h.id for h in tankers]
    _unique(mers, "fleet")
    for mid in mers:
        if mid in s_nodes or mid in f_sites:
            raise ScenarioError("invariant", "fleet", f"MER id {mid!r} collides with a site id")
    _unique([m.id for m in modules], "fleet.modules")
    _unique([s.id for s in sites], "fleet.fuel_sites")
    missing = [i for i in access.fuel_sites if i not in {s.id for s in sites}]
    if missing and (generators or tankers):
        raise ScenarioError("reference", "fleet.fuel_sites", f"no fuel capacity for sites {missing}")
    order = {i: k for k, i in enumerate(access.fuel_sites)}
    sites.sort(key=lambda s: order[s.id])
    return FleetSpec(tuple(carriers), tuple(modules), tuple(generators), tuple(tankers), tuple(sites))


def _parse_travel(tdoc: Mapping[str, Any], access: AccessSpec, fleet: FleetSpec) -> TravelTimes:
    symmetric = tdoc.get("symmetric", True)

    def resolve(mer_id: str, sites: tuple[str, ...], tables: list[tuple[str, Mapping]]) -> dict:
        explicit: dict[tuple[str, str], int] = {}
        default = None
        for path, tab in reversed(tables):  # later (more specific) tables override
            if "default_spans" in tab:
                default = tab["default_spans"]
            local: dict[tuple[str, str], int] = {}
            direct: dict[tuple[str, str], int] = {}
            for k, pr in enumerate(tab.get("pairs", [])):
                a, b = pr["a"], pr["b"]
                for end in (a, b):
                    if end not in sites:
                        raise ScenarioError("reference", f"{path}.pairs[{k}]", f"{end!r} is not a site of {mer_id}")
                if pr["spans"] < 1 and a != b:
                    raise ScenarioError("invariant", f"{path}.pairs[{k}].spans", "travel time must be >= 1")
                direct[(a, b)] = pr["spans"]
                if symmetric:
                    local[(b, a)] = pr["spans"]
            local.update(direct)
            explicit.update(local)
        out = {}
        for a in sites:
            for b in sites:
                if a == b:
                    continue
                if (a, b) in explicit:
                    out[(a, b)] = explicit[(a, b)]
                elif default is not None:
                    if default < 1:
                        raise ScenarioError("invariant", "travel", "default_spans must be >= 1")
                    out[(a, b)] = default
                else:
                    raise ScenarioError("reference", "travel", f"missing travel time {a}->{b} for {mer_id}")
        return out

    per_mer = tdoc.get("per_mer", {})
    for mer in per_mer:
        if mer not in fleet.mer_ids:
            raise ScenarioError("reference", f"travel.per_mer.{mer}", "unknown MER")
    table = {}
    groups = [("carrier", fleet.carriers, access.storage_nodes),
              ("generator", fleet.generators, access.fuel_sites),
              ("tanker", fleet.tankers, access.fuel_sites)]
    for cls, members, sites in groups:
        for m in members:
            tabs = []
            if m.id in per_mer:
                tabs.append((f"travel.per_mer.{m.id}", per_mer[m.id]))
            if cls in tdoc:
                tabs.append((f"travel.{cls}", tdoc[cls]))
            # reversed() in resolve: class table first, per-MER overrides afterwards
            table[m.id] = resolve(m.id, sites, tabs)
    return TravelTimes(table)


def _parse_study(sdoc: Mapping[str, Any], scn: Scenario) -> StudyConfig:
    st = StudyConfig(
        phi_travel=float(sdoc.get("phi_travel", 0.1)),
        phi_fuel=float(sdoc.get("phi_fuel", 0.1)),
        case=sdoc.get("case", "Case5"),
        substation_energized=sdoc.get("substation_energized", True),
        mip_gap=float(sdoc.get("mip_gap", 0.001)),
        big_m_policy=sdoc.get("big_m_policy", "tight"),
        disk_segments=sdoc.get("disk_segments", 8),
        strict_pickup=sdoc.get("strict_pickup", False),
        exact_travel=sdoc.get("exact_travel", False),
        fixed_positions=dict(sdoc.get("fixed_positions", {})),
        bundles={k: tuple(v) for k, v in sdoc.get("bundles", {}).items()},
    )
    return st


def _check_study(scn: Scenario, st: StudyConfig) -> None:
    if st.phi_travel < 0 or st.phi_fuel < 0:
        raise ScenarioError("invariant", "study.phi_travel", "cost weights must be >= 0")
    if st.case not in CASES:
        raise ScenarioError("invariant", "study.case", f"unknown case {st.case!r}")
    if not 0 <= st.mip_gap < 1:
        raise ScenarioError("invariant", "study.mip_gap", "gap must lie in [0, 1)")
    if st.disk_segments < 4 or st.disk_segments % 2:
        raise ScenarioError("invariant", "study.disk_segments", "need an even count >= 4")
    if st.big_m_policy not in ("tight", "uniform"):
        raise ScenarioError("invariant", "study.big_m_policy", "tight or uniform")
    fleet = scn.fleet
    mods = {m.id: m for m in fleet.modules}
    gens = {g.id: g for g in fleet.generators}
    for obj, node in st.fixed_positions.items():
        if obj in mods:
            if node not in scn.access.storage_nodes:
                raise ScenarioError("reference", f"study.fixed_positions.{obj}", f"{node!r} is not a storage node")
        elif obj in gens:
            if node not in scn.access.generator_nodes:
                raise ScenarioError("reference", f"study.fixed_positions.{obj}", f"{node!r} is not a generator node")
        else:
            raise ScenarioError("reference", f"study.fixed_positions.{obj}", "unknown module or generator")
    carriers = {c.id: c for c in fleet.carriers}
    bundled: set[str] = set()
    for carr, group in st.bundles.items():
        if carr not in carriers:
            raise ScenarioError("reference", f"study.bundles.{carr}", "unknown carrier")
        for k in group:
            if k not in mods:
                raise ScenarioError("reference", f"study.bundles.{carr}", f"unknown module {k!r}")
            if k in bundled:
                raise ScenarioError("invariant", f"study.bundles.{carr}", f"module {k!r} bundled twice")
            bundled.add(k)
        if sum(mods[k].weight for k in group) > carriers[carr].capacity:
            raise ScenarioError("invariant", f"study.bundles.{carr}", "bundle exceeds carrier capacity")


def default_bundles(scn: Scenario) -> dict[str, tuple[str, ...]]:
    """Split modules over carriers in order, as evenly as capacity allows."""
    carriers = scn.fleet.carriers
    if not carriers:
        return {}
    mods = [m.id for m in scn.fleet.modules]
    per = math.ceil(len(mods) / len(carriers))
    return {c.id: tuple(mods[k * per:(k + 1) * per]) for k, c in enumerate(carriers) if mods[k * per:(k + 1) * per]}
