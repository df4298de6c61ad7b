"""Builders for the committed scenario documents (33-node feeder and the tiny corpus).

Run ``python -m smess.fixtures`` to regenerate ``smess/data``.  The generated files are
committed so every run reads identical data.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

WEIGHT_SEED = 2021

# (from, to, r ohm, x ohm, p_kw at "to", q_kvar at "to")
IEEE33_LINES = [
    (1, 2, 0.0922, 0.0470, 100, 60), (2, 3, 0.4930, 0.2511, 90, 40), (3, 4, 0.3660, 0.1864, 120, 80),
    (4, 5, 0.3811, 0.1941, 60, 30), (5, 6, 0.8190, 0.7070, 60, 20), (6, 7, 0.1872, 0.6188, 200, 100),
    (7, 8, 0.7114, 0.2351, 200, 100), (8, 9, 1.0300, 0.7400, 60, 20), (9, 10, 1.0440, 0.7400, 60, 20),
    (10, 11, 0.1966, 0.0650, 45, 30), (11, 12, 0.3744, 0.1238, 60, 35), (12, 13, 1.4680, 1.1550, 60, 35),
    (13, 14, 0.5416, 0.7129, 120, 80), (14, 15, 0.5910, 0.5260, 60, 10), (15, 16, 0.7463, 0.5450, 60, 20),
    (16, 17, 1.2890, 1.7210, 60, 20), (17, 18, 0.7320, 0.5740, 90, 40), (2, 19, 0.1640, 0.1565, 90, 40),
    (19, 20, 1.5042, 1.3554, 90, 40), (20, 21, 0.4095, 0.4784, 90, 40), (21, 22, 0.7089, 0.9373, 90, 40),
    (3, 23, 0.4512, 0.3083, 90, 50), (23, 24, 0.8980, 0.7091, 420, 200), (24, 25, 0.8960, 0.7011, 420, 200),
    (6, 26, 0.2030, 0.1034, 60, 25), (26, 27, 0.2842, 0.1447, 60, 25), (27, 28, 1.0590, 0.9337, 60, 20),
    (28, 29, 0.8042, 0.7006, 120, 70), (29, 30, 0.5075, 0.2585, 200, 600), (30, 31, 0.9744, 0.9630, 150, 70),
    (31, 32, 0.3105, 0.3619, 210, 100), (32, 33, 0.3410, 0.5302, 60, 40),
]
IEEE33_TIES = [(8, 21, 2.0, 2.0), (9, 15, 2.0, 2.0), (12, 22, 2.0, 2.0), (18, 33, 0.5, 0.5), (25, 29, 0.5, 0.5)]
IEEE33_S_MAX_KVA = 4000.0

MEG_CURVE = [(200.0, 64.4), (400.0, 109.8), (600.0, 155.2), (800.0, 200.6)]


def _pairs(pairs):
    return [[str(a), str(b)] for a, b in pairs]


def seeded_weights(n: int, seed: int = WEIGHT_SEED) -> list[int]:
    """Load priority weights drawn uniformly from 1..5."""
    return [int(w) for w in np.random.default_rng(seed).integers(1, 6, size=n)]


def ieee33_document() -> dict:
    loads = {1: (0.0, 0.0)}
    for a, b, _, _, p, q in IEEE33_LINES:
        loads[b] = (float(p), float(q))
    weights = seeded_weights(33)
    nodes = [{"id": str(i), "p_kw": loads[i][0], "q_kvar": loads[i][1], "weight": weights[i - 1]}
             for i in range(1, 34)]
    branches = [{"from": str(a), "to": str(b), "r_ohm": r, "x_ohm": x, "s_max_kva": IEEE33_S_MAX_KVA}
                for a, b, r, x, _, _ in IEEE33_LINES]
    branches += [{"from": str(a), "to": str(b), "r_ohm": r, "x_ohm": x, "s_max_kva": IEEE33_S_MAX_KVA}
                 for a, b, r, x in IEEE33_TIES]
    module = {"weight": 1, "p_charge_max_kw": 500, "p_discharge_max_kw": 500, "s_rated_kva": 527,
              "energy_kwh": 1000, "eff_charge": 0.95, "eff_discharge": 0.95, "soc_init": 0.5,
              "soc_min": 0.1, "soc_max": 0.9, "start": "8"}
    faults = [
        {"first_span": 1, "last_span": 6, "nodes_open": ["7", "25", "30"],
         "nodes_closed": ["5", "26", "12", "23", "15"],
         "branches_open": _pairs([(8, 9), (11, 12), (13, 14), (20, 21), (4, 5), (7, 8), (25, 29), (3, 23),
                                  (18, 33), (28, 29)]),
         "branches_closed": _pairs([(5, 6), (23, 24), (21, 22), (29, 30), (10, 11)])},
        {"first_span": 7, "last_span": 11, "nodes_open": [], "nodes_closed": ["12", "23", "15"],
         "branches_open": _pairs([(4, 5), (7, 8), (25, 29), (3, 23), (18, 33), (28, 29)]),
         "branches_closed": _pairs([(29, 30), (10, 11)])},
    ]
    return {
        "schema_version": 1,
        "name": "ieee33",
        "time": {"span_count": 12, "span_length_h": 0.5},
        "network": {"base_kva": 1000.0, "base_kv": 12.66, "substation": "1",
                    "voltage_min_pu": 0.9, "voltage_max_pu": 1.05, "nodes": nodes, "branches": branches},
        "access": {"storage_nodes": ["8", "11", "24", "29"], "generator_nodes": ["3", "22", "27"],
                   "depots": ["DP"]},
        "faults": faults,
        "fleet": {
            "carriers": [{"id": "Carr1", "capacity": 2, "start": "8"},
                         {"id": "Carr2", "capacity": 2, "start": "8"}],
            "modules": [{"id": f"Mod{k}", **module} for k in range(1, 5)],
            "generators": [{"id": "MEG1", "p_max_kw": 800, "q_max_kvar": 600, "s_rated_kva": 1000,
                            "fuel_capacity_l": 500,
                            "fuel_curve": [{"p_kw": p, "rate_l_per_h": r} for p, r in MEG_CURVE],
                            "sof_init": 0.1, "start": "3"}],
            "tankers": [{"id": "FT1", "fuel_capacity_l": 2000, "sof_init": 0.1, "start": "DP"}],
            "fuel_sites": [{"id": s, "fuel_capacity_l": 5000, "sof_init": 0.0} for s in ("3", "22", "27")]
            + [{"id": "DP", "fuel_capacity_l": 10000, "sof_init": 0.8}],
        },
        "travel": {
            "symmetric": True,
            "carrier": {"default_spans": 1, "pairs": [{"a": "8", "b": "11", "spans": 2},
                                                      {"a": "11", "b": "24", "spans": 2},
                                                      {"a": "24", "b": "29", "spans": 2}]},
            "generator": {"default_spans": 1, "pairs": [{"a": "3", "b": "27", "spans": 2},
                                                        {"a": "3", "b": "DP", "spans": 2},
                                                        {"a": "27", "b": "DP", "spans": 2}]},
            "tanker": {"default_spans": 1, "pairs": [{"a": "3", "b": "27", "spans": 2},
                                                     {"a": "3", "b": "DP", "spans": 2},
                                                     {"a": "27", "b": "DP", "spans": 2}]},
        },
        "study": {"phi_travel": 0.1, "phi_fuel": 0.1, "case": "Case5", "mip_gap": 0.001,
                  "bundles": {"Carr1": ["Mod1", "Mod2"], "Carr2": ["Mod3", "Mod4"]}},
    }


# ------------------------------------------------------------ tiny corpus


def _tiny_base(name: str, n_nodes: int, lines, loads, weights, D: int, *, storage, generator=(), depots=(),
               faults=(), energized=True, r_pu=0.01, x_pu=0.01, s_max=2000.0) -> dict:
    nodes = [{"id": str(i), "p_kw": float(loads[i - 1][0]), "q_kvar": float(loads[i - 1][1]),
              "weight": weights[i - 1]} for i in range(1, n_nodes + 1)]
    branches = [{"from": str(a), "to": str(b), "r_pu": r_pu, "x_pu": x_pu, "s_max_kva": s_max}
                for a, b in lines]
    return {
        "schema_version": 1, "name": name,
        "time": {"span_count": D, "span_length_h": 0.5},
        "network": {"base_kva": 1000.0, "base_kv": 12.66, "substation": "1", "voltage_min_pu": 0.9,
                    "voltage_max_pu": 1.05, "nodes": nodes, "branches": branches},
        "access": {"storage_nodes": [str(i) for i in storage],
                   "generator_nodes": [str(i) for i in generator], "depots": list(depots)},
        "faults": list(faults),
        "fleet": {"carriers": [], "modules": [], "generators": [], "tankers": [], "fuel_sites": []},
        "travel": {"symmetric": True},
        "study": {"phi_travel": 0.1, "phi_fuel": 0.1, "case": "Case5", "substation_energized": energized,
                  "mip_gap": 0.0},
    }


def _module(mid: str, start: str, soc: float = 0.5, p_kw: float = 300, e_kwh: float = 300) -> dict:
    return {"id": mid, "weight": 1, "p_charge_max_kw": p_kw, "p_discharge_max_kw": p_kw,
            "s_rated_kva": p_kw * 1.054, "energy_kwh": e_kwh, "eff_charge": 0.95, "eff_discharge": 0.95,
            "soc_init": soc, "soc_min": 0.1, "soc_max": 0.9, "start": start}


def _meg(start: str, sof: float) -> dict:
    return {"id": "MEG1", "p_max_kw": 400, "q_max_kvar": 300, "s_rated_kva": 500, "fuel_capacity_l": 200,
            "fuel_curve": [{"p_kw": 100, "rate_l_per_h": 32.2}, {"p_kw": 200, "rate_l_per_h": 54.9},
                           {"p_kw": 300, "rate_l_per_h": 77.6}, {"p_kw": 400, "rate_l_per_h": 100.3}],
            "sof_init": sof, "start": start}


def tiny_documents() -> dict[str, dict]:
    docs = {}

    # 4-node line; branch 2-3 faulted for the whole horizon so node 4 is islanded
    d = _tiny_base("tiny_line4", 4, [(1, 2), (2, 3), (3, 4)], [(0, 0), (100, 40), (80, 30), (150, 60)],
                   [1, 2, 3, 5], 3, storage=[2, 4],
                   faults=[{"first_span": 1, "last_span": 3, "branches_open": [["2", "3"]]}])
    d["fleet"]["carriers"] = [{"id": "Carr1", "capacity": 2, "start": "2"}]
    d["fleet"]["modules"] = [_module("Mod1", "2")]
    d["travel"]["carrier"] = {"default_spans": 1}
    docs[d["name"]] = d

    # two modules, one carrier, two-span trip; substation lost for the horizon
    d = _tiny_base("tiny_two_mods", 5, [(1, 2), (2, 3), (3, 4), (2, 5)],
                   [(0, 0), (60, 20), (120, 40), (90, 30), (200, 80)], [1, 4, 2, 3, 5], 4,
                   storage=[3, 5], energized=False)
    d["fleet"]["carriers"] = [{"id": "Carr1", "capacity": 2, "start": "3"}]
    d["fleet"]["modules"] = [_module("Mod1", "3", soc=0.6), _module("Mod2", "3", soc=0.4)]
    d["travel"]["carrier"] = {"pairs": [{"a": "3", "b": "5", "spans": 2}]}
    docs[d["name"]] = d

    # tie switch: faulted branch repaired at span 3; reconfiguration through the tie before that
    d = _tiny_base("tiny_tie", 5, [(1, 2), (2, 3), (3, 4), (1, 5), (5, 4)],
                   [(0, 0), (80, 30), (100, 40), (120, 50), (60, 20)], [1, 3, 5, 2, 4], 3,
                   storage=[3, 4],
                   faults=[{"first_span": 1, "last_span": 2, "nodes_open": ["5"],
                            "branches_open": [["2", "3"], ["1", "5"]]}])
    d["fleet"]["carriers"] = [{"id": "Carr1", "capacity": 1, "start": "4"}]
    d["fleet"]["modules"] = [_module("Mod1", "4", soc=0.3)]
    d["travel"]["carrier"] = {"default_spans": 1}
    docs[d["name"]] = d

    # generator with a short fuel stock and a tanker at the depot
    d = _tiny_base("tiny_meg_fuel", 4, [(1, 2), (2, 3), (3, 4)], [(0, 0), (50, 20), (150, 60), (200, 80)],
                   [1, 2, 4, 3], 3, storage=[2], generator=[3, 4], depots=["DP"],
                   faults=[{"first_span": 1, "last_span": 3, "branches_open": [["1", "2"]]}])
    d["fleet"]["carriers"] = [{"id": "Carr1", "capacity": 1, "start": "2"}]
    d["fleet"]["modules"] = [_module("Mod1", "2", soc=0.2, p_kw=100, e_kwh=100)]
    d["fleet"]["generators"] = [_meg("3", 0.1)]
    d["fleet"]["tankers"] = [{"id": "FT1", "fuel_capacity_l": 200, "sof_init": 0.5, "start": "DP"}]
    d["fleet"]["fuel_sites"] = [{"id": "3", "fuel_capacity_l": 300, "sof_init": 0.0},
                                {"id": "4", "fuel_capacity_l": 300, "sof_init": 0.0},
                                {"id": "DP", "fuel_capacity_l": 1000, "sof_init": 0.5}]
    d["travel"]["carrier"] = {"default_spans": 1}
    d["travel"]["generator"] = {"default_spans": 1}
    d["travel"]["tanker"] = {"default_spans": 1}
    docs[d["name"]] = d

    # six-node feeder with a faulted-closed load switch and a node outage
    d = _tiny_base("tiny_feeder6", 6, [(1, 2), (2, 3), (3, 4), (2, 5), (5, 6)],
                   [(0, 0), (70, 30), (90, 30), (160, 60), (110, 40), (130, 50)], [1, 2, 5, 4, 1, 3], 3,
                   storage=[4, 6],
                   faults=[{"first_span": 1, "last_span": 2, "nodes_open": ["5"], "nodes_closed": ["4"],
                            "branches_open": [["2", "3"], ["2", "5"]]},
                           {"first_span": 3, "last_span": 3, "nodes_closed": ["4"]}])
    d["fleet"]["carriers"] = [{"id": "Carr1", "capacity": 2, "start": "4"}]
    d["fleet"]["modules"] = [_module("Mod1", "4", soc=0.5), _module("Mod2", "4", soc=0.5)]
    d["travel"]["carrier"] = {"default_spans": 1}
    docs[d["name"]] = d
    return docs


# ------------------------------------------------------------------ files


def data_dir() -> Path:
    return Path(str(resources.files("smess").joinpath("data")))


def ieee33_path() -> Path:
    return data_dir() / "ieee33.json"


def tiny_paths() -> list[Path]:
    return sorted((data_dir() / "tiny").glob("*.json"))


def write_all(target: Path | None = None) -> None:
    target = target or data_dir()
    (target / "tiny").mkdir(parents=True, exist_ok=True)
    (target / "ieee33.json").write_text(json.dumps(ieee33_document(), indent=1) + "\n")
    for name, doc in tiny_documents().items():
        (target / "tiny" / f"{name}.json").write_text(json.dumps(doc, indent=1) + "\n")


if __name__ == "__main__":
    write_all()
