"""Full-model assembly: objective, case variants and the structural count self-check."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass

from .bigm import big_m_catalog
from .fleet import emit_fuel_logistics, emit_meg_power, emit_mod_operation, emit_routing, emit_smess_coupling
from .grid import emit_energization, emit_power_flow, emit_radiality
from .milp import EQ, CountReport, LinExpr, Model, count_by_family
from .scenario import CASES, Scenario, default_bundles, fault_sets_at

log = logging.getLogger(__name__)

REFERENCE_DISK_SEGMENTS = 8


# ---------------------------------------------------------------- objective


def emit_objective(model: Model, scn: Scenario) -> LinExpr:
    """Weighted restored energy (kWh) minus travel and fuel-exchange penalties."""
    D = scn.time.span_count
    dt = scn.time.span_length_h
    st = scn.study
    obj = LinExpr()
    for t in range(1, D + 1):
        for n in scn.network.nodes:
            coef = n.weight * n.p_kw[t - 1] * dt
            if coef:
                obj.iadd((model.var("delta", n.id, t), coef))
        for j in scn.fleet.mer_ids:
            for i in scn.sites_of(j):
                obj.iadd((model.var("v", j, i, t), -st.phi_travel))
        for e in [m.id for m in scn.fleet.generators] + [h.id for h in scn.fleet.tankers]:
            for i in scn.access.fuel_sites:
                obj.iadd((model.var("l", e, i, t), -st.phi_fuel))
    model.set_objective(obj)
    return obj


# ------------------------------------------------------------ case variants


def apply_case_variant(model: Model, scn: Scenario, case: str | None = None) -> int:
    """Add the restriction rows of a comparison case; returns the number of rows added."""
    case = case or scn.study.case
    if case not in CASES:
        raise ValueError(f"unknown case {case!r}")
    D = scn.time.span_count
    NS = scn.access.storage_nodes
    before = len(model.constraints)
    fix = lambda v, val, idx, part: model.add_row("case", idx, [(v, 1.0)], EQ, val, part=part)  # noqa: E731
    if case == "Case1":
        for t in range(1, D + 1):
            for k in scn.fleet.modules:
                for i in NS:
                    for fam in ("Pc", "Pd", "Qs"):
                        fix(model.var(fam, k.id, i, t), 0.0, (k.id, i, t), f"c1_{fam}")
            for m in scn.fleet.generators:
                for i in scn.access.generator_nodes:
                    for fam in ("PG", "QG"):
                        fix(model.var(fam, m.id, i, t), 0.0, (m.id, i, t), f"c1_{fam}")
    elif case == "Case2":
        fixed = scn.study.fixed_positions
        for t in range(1, D + 1):
            for k in scn.fleet.modules:
                node = fixed.get(k.id, k.start)
                fix(model.var("zeta", k.id, node, t), 1.0, (k.id, t), "c2_mod")
            for m in scn.fleet.generators:
                node = fixed.get(m.id, m.start)
                fix(model.var("x", m.id, node, t), 1.0, (m.id, t), "c2_meg")
    elif case == "Case3":
        bundles = scn.study.bundles or default_bundles(scn)
        for j, group in bundles.items():
            for k in group:
                for t in range(D + 1):
                    terms = [(model.var("gamma", k, j, t), 1.0)]
                    terms += [(model.var("v", j, i, t), -1.0) for i in NS]
                    model.add_row("case", (k, j, t), terms, EQ, 0.0, part="c3_gamma")
                    for i in NS:
                        model.add_row("case", (k, j, i, t), [(model.var("zeta", k, i, t), 1.0),
                                                             (model.var("x", j, i, t), -1.0)],
                                      EQ, 0.0, part="c3_zeta")
    elif case == "Case4":
        for h in scn.fleet.tankers:
            for t in range(1, D + 1):
                fix(model.var("x", h.id, h.start, t), 1.0, (h.id, t), "c4_park")
                for i in scn.access.fuel_sites:
                    fix(model.var("l", h.id, i, t), 0.0, (h.id, i, t), "c4_l")
                    fix(model.var("Dh", h.id, i, t), 0.0, (h.id, i, t), "c4_D")
    return len(model.constraints) - before


# ------------------------------------------------------- structural counts


@dataclass(frozen=True)
class Cardinalities:
    T: int
    N: int
    L: int
    NS: int
    NG: int
    NDP: int
    MS: int
    K: int
    MG: int
    MF: int
    Lseg: int  # published fuel-curve segments per generator
    faults: int  # sum over spans of the four fault-set sizes

    @classmethod
    def of(cls, scn: Scenario) -> Cardinalities:
        gens = scn.fleet.generators
        lseg = max((len(g.fuel_curve) - 1 for g in gens), default=0)
        return cls(
            T=scn.time.span_count, N=len(scn.network.nodes), L=len(scn.network.branches),
            NS=len(scn.access.storage_nodes), NG=len(scn.access.generator_nodes),
            NDP=len(scn.access.depots), MS=len(scn.fleet.carriers), K=len(scn.fleet.modules),
            MG=len(gens), MF=len(scn.fleet.tankers), Lseg=lseg,
            faults=sum(fault_sets_at(scn, t).size() for t in scn.time.spans),
        )


def table1_closed_form(c: Cardinalities) -> dict[str, int]:
    """The three published closed-form totals (the fault term is summed over spans)."""
    T, N, L, NS, NG, NDP, MS, K, MG, MF, Ls = (c.T, c.N, c.L, c.NS, c.NG, c.NDP, c.MS, c.K, c.MG,
                                               c.MF, c.Lseg)
    nf = NG + NDP
    binary = (T * (3 * (MG + MF) * nf + MS * NS * (K + 2) + 3 * NS * K + MS * (K + 1) + (Ls + 2) * MG
                   + MF + 6 * L + 4 * N)
              + 2 * MS * NS + 2 * (MG + MF) * nf + MS + MG + MF + (MS + NS) * K)
    continuous = (T * ((3 * MG + MF) * nf + 2 * MG * NG + 3 * NS * K + 2 * MS + 3 * MG + 3 * MF + NG + NDP
                       + K + (2 * L + 3) * N)
                  + 2 * MS + 3 * MG + 3 * MF + NG + NDP + K)
    rows = (T * ((10 * MG + 8 * MF) * nf + 5 * MS * NS * (K + 1) + 3 * MS * K + 9 * NS * K + 6 * MG * NG
                 + MG * NDP + 7 * MS + (4 * Ls + 23) * MG + 9 * MF + 12 * K + 3 * NG + 3 * NDP + N ** 2
                 + 4 * L * N + 13 * N + 14 * L - 5)
            + c.faults + 7 * MS + 8 * MG + 8 * MF + 3 * K + NG + NDP)
    return {"binary": binary, "continuous": continuous, "constraints": rows}


def table1_by_family(c: Cardinalities) -> dict[str, dict[str, int]]:
    """Family-wise breakdown whose sums reproduce :func:`table1_closed_form`."""
    T, N, L, NS, NG, NDP, MS, K, MG, MF, Ls = (c.T, c.N, c.L, c.NS, c.NG, c.NDP, c.MS, c.K, c.MG,
                                               c.MF, c.Lseg)
    nf = NG + NDP
    M = MS + MG + MF
    route = MS * NS + (MG + MF) * nf
    binary = {
        "x": (T + 1) * route, "v": (T + 1) * route, "omega": (T + 1) * M,
        "alpha": T * MS * NS * K, "zeta": (T + 1) * NS * K, "gamma": (T + 1) * MS * K,
        "c": T * NS * K, "d": T * NS * K, "tau": T * Ls * MG, "b": T * MG, "l": T * (MG + MF) * nf,
        "lambda": 2 * T * L, "mu": T * L, "kappa": T * L, "chi": 2 * T * L,
        "delta": T * N, "eta": T * N, "rho": T * N, "sigma": T * N,
    }
    continuous = {
        "S": (T + 1) * M, "R": (T + 1) * M, "SOC": (T + 1) * K,
        "Pc": T * NS * K, "Pd": T * NS * K, "Qs": T * NS * K,
        "PG": T * MG * NG, "QG": T * MG * NG,
        "B": T * MG * nf, "Bp": T * MG * nf, "G": T * MG * nf, "Dh": T * MF * nf,
        "SOF": (T + 1) * (MG + MF + nf), "f": 2 * T * L * (N - 1),
        "P": T * L, "Q": T * L, "Pin": T * N, "Qin": T * N, "V2": T * N,
    }
    rows = {
        "1a": (T + 1) * M, "1b": 2 * T * route, "1c": T * (MS * (NS + 1) + (MG + MF) * (nf + 1)),
        "1d": T * M, "1e": 2 * (T + 1) * M, "1f": T * (MS * (1 + 2 * NS) + (MG + MF) * (1 + 2 * nf)),
        "1g": 4 * M,
        "2a": (T + 1) * K, "2b": T * MS, "2c": K,
        "3a": T * MS * K, "3b": T * MS * NS * K, "3c": 2 * T * MS * K,
        "4a": 4 * T * MS * NS * K, "4b": T * NS * K, "4c": T * NS * K,
        "5a": T * NS * K, "5b": 6 * T * NS * K, "5c": 8 * T * K, "5d": T * K, "5e": K, "5f": 2 * T * K,
        "6a": 4 * T * MG * NG, "6b": 8 * T * MG,
        "7a": 2 * T * MG * NG, "7b": T * MG * NDP, "7d": 4 * Ls * T * MG, "7e": T * MG,
        "7f": T * MG * (2 * nf + 5), "7g": T * MG, "7h": T * MF, "7i": T * nf,
        "7j": T * MG * nf, "7k": 2 * T * MG * nf, "7l": T * MF * nf, "7m": 2 * T * MF * nf,
        "7n": MG + MF + nf, "7o": 2 * T * (MG + MF + nf),
        "8a": T * (N - 1), "8b": T * (N - 1), "8c": T * (N - 1) * (N - 2), "8d": 4 * T * L * (N - 1),
        "8e": T, "8f": T * L, "8g": T * L,
        "9a": T * N, "9b": T * N, "9c": T * N, "9d": T * N, "9e": T * N, "9f": 2 * T * L,
        "9g": 2 * T * N, "9h": 8 * T * L, "9i": c.faults, "9j": T,
        "9k": 2 * T * (N - 1), "9l": 2 * T * (N - 1), "9m": 3 * T * (N - 1), "10": 6 * T * L,
    }
    return {"binary": binary, "continuous": continuous, "rows": rows}


@dataclass(frozen=True)
class Deviation:
    name: str
    description: str
    binary: dict[str, int]
    continuous: dict[str, int]
    rows: dict[str, int]

    def is_zero(self) -> bool:
        return not any(v for d in (self.binary, self.continuous, self.rows) for v in d.values())


def deviation_catalog(scn: Scenario) -> list[Deviation]:
    """Every documented departure from the published counts, evaluated for this scenario."""
    c = Cardinalities.of(scn)
    T = c.T
    st = scn.study
    out = []
    dk = st.disk_segments - REFERENCE_DISK_SEGMENTS
    out.append(Deviation("disk_segments", f"polygon with {st.disk_segments} sides instead of 8", {}, {},
                         {"5c": dk * T * c.K, "6b": dk * T * c.MG, "9h": dk * T * c.L}))
    segs = sum(len(g.fuel_breakpoints()) - 1 for g in scn.fleet.generators) - c.Lseg * c.MG
    out.append(Deviation("fuel_segment", "idle segment (0 kW, 0 L/h) prepended to each fuel curve",
                         {"tau": T * segs}, {}, {"7d": 4 * T * segs}))
    if st.substation_energized:
        out.append(Deviation("substation_injection",
                             "injection rows omitted at the energized substation (free grid supply)",
                             {}, {}, {"9a": -T, "9b": -T}))
    else:
        out.append(Deviation("substation_deenergized",
                             "substation energization row removed; source/neighbour rows cover it",
                             {}, {}, {"9j": -T, "9k": 2 * T, "9l": 2 * T, "9m": 3 * T}))
    return out


@dataclass
class StructureCheck:
    cardinalities: Cardinalities
    closed_form: dict[str, int]
    reference: dict[str, dict[str, int]]
    actual: CountReport
    deviations: list[Deviation]
    mismatches: list[tuple[str, str, int, int]]  # (kind, family, expected, actual)
    extensions: dict[str, int]

    @property
    def ok(self) -> bool:
        return not self.mismatches

    @property
    def itemized(self) -> list[Deviation]:
        return [d for d in self.deviations if not d.is_zero()]

    def as_dict(self) -> dict:
        return {
            "cardinalities": asdict(self.cardinalities),
            "table1_closed_form": self.closed_form,
            "actual": {"binary": self.actual.binary, "continuous": self.actual.continuous,
                       "constraints": self.actual.constraints},
            "families": [
                {"kind": kind, "family": fam, "reference": ref,
                 "actual": act.get(fam, 0)}
                for kind, refs, act in (
                    ("binary", self.reference["binary"], self.actual.binaries_by_family),
                    ("continuous", self.reference["continuous"], self.actual.continuous_by_family),
                    ("rows", self.reference["rows"], self.actual.rows_by_family))
                for fam, ref in refs.items()
            ],
            "deviations": [asdict(d) for d in self.itemized],
            "extensions": self.extensions,
            "mismatches": [list(m) for m in self.mismatches],
            "ok": self.ok,
        }


EXTENSION_FAMILIES = ("xtravel", "xpickup", "case")


def structure_check(model: Model, scn: Scenario) -> StructureCheck:
    """Compare family-wise counts with the published expressions plus the deviation catalog."""
    card = Cardinalities.of(scn)
    ref = table1_by_family(card)
    devs = deviation_catalog(scn)
    counts = count_by_family(model)
    expected = {k: dict(v) for k, v in ref.items()}
    for d in devs:
        for kind, delta in (("binary", d.binary), ("continuous", d.continuous), ("rows", d.rows)):
            for fam, n in delta.items():
                expected[kind][fam] = expected[kind].get(fam, 0) + n
    actual = {"binary": counts.binaries_by_family, "continuous": counts.continuous_by_family,
              "rows": {f: n for f, n in counts.rows_by_family.items() if f not in EXTENSION_FAMILIES}}
    mismatches = []
    for kind in ("binary", "continuous", "rows"):
        for fam in sorted(set(expected[kind]) | set(actual[kind])):
            e, a = expected[kind].get(fam, 0), actual[kind].get(fam, 0)
            if e != a:
                mismatches.append((kind, fam, e, a))
    ext = {f: counts.rows_by_family[f] for f in EXTENSION_FAMILIES if f in counts.rows_by_family}
    return StructureCheck(card, table1_closed_form(card), ref, counts, devs, mismatches, ext)


# ------------------------------------------------------------------ assembly


def assemble(scn: Scenario, case: str | None = None) -> Model:
    """Build the complete model for ``scn`` (study settings taken from the scenario)."""
    t0 = time.perf_counter()
    case = case or scn.study.case
    model = Model(scn.name)
    bigm = big_m_catalog(scn)
    for cls in ("carrier", "generator", "tanker"):
        emit_routing(model, scn, cls, bigm)
    emit_smess_coupling(model, scn)
    emit_mod_operation(model, scn)
    emit_meg_power(model, scn)
    emit_fuel_logistics(model, scn, bigm)
    emit_radiality(model, scn)
    emit_power_flow(model, scn, bigm)
    emit_energization(model, scn, bigm)
    emit_objective(model, scn)
    n_case = apply_case_variant(model, scn, case)
    model.meta.update(case=case, case_rows=n_case, scenario=scn.name,
                      base_kva=scn.network.base_kva, build_seconds=time.perf_counter() - t0)
    log.info("assembled %s (%s): %d vars, %d rows in %.2fs", scn.name, case, len(model.vars),
             len(model.constraints), model.meta["build_seconds"])
    return model
