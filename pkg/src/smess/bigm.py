"""Big-M values per constraint family, derived from scenario data."""

from __future__ import annotations

from dataclasses import dataclass

from .scenario import Scenario


@dataclass(frozen=True)
class BigM:
    travel: float  # (1e)
    fuel: dict[str, float]  # (7d) per generator
    voltage: dict[tuple[str, str], float]  # (9f) per branch
    degree: dict[str, float]  # (9l) per node


def fuel_segments(scn: Scenario, gen_id: str) -> tuple[list[float], list[float], list[float]]:
    """Per-span fuel curve of a generator: breakpoints (pu), slopes (L per pu), intercepts (L)."""
    g = next(g for g in scn.fleet.generators if g.id == gen_id)
    dt = scn.time.span_length_h
    base = scn.network.base_kva
    pts = g.fuel_breakpoints()
    bps = [p / base for p, _ in pts]
    slopes, inters = [], []
    for (p0, r0), (p1, r1) in zip(pts, pts[1:]):
        k = (r1 - r0) / (p1 - p0)  # L/h per kW
        slopes.append(k * base * dt)
        inters.append((r0 - k * p0) * dt)
    return bps, slopes, inters


def big_m_catalog(scn: Scenario) -> BigM:
    D = scn.time.span_count
    t_max = max((T for tab in scn.travel.table.values() for T in tab.values()), default=1)
    travel = float(max(D, t_max))
    fuel = {}
    for g in scn.fleet.generators:
        bps, ys, zs = fuel_segments(scn, g.id)
        fuel[g.id] = g.fuel_max_per_span_l + max(abs(y) * bps[-1] + abs(z) for y, z in zip(ys, zs))
    net = scn.network
    vspan = net.v_max ** 2 - net.v_min ** 2
    voltage = {b.key: vspan + 2 * (b.r_pu + b.x_pu) * b.s_max_kva / net.base_kva for b in net.branches}
    degree = {i: float(max(1, len(net.incident(i)))) for i in net.node_ids}
    if scn.study.big_m_policy == "uniform":
        u = max([travel, *fuel.values(), *voltage.values(), *degree.values()])
        return BigM(u, {k: u for k in fuel}, {k: u for k in voltage}, {k: u for k in degree})
    return BigM(travel, fuel, voltage, degree)
