"""Test helpers: scenario loaders, toy-model utilities and a session-wide solve cache."""

from __future__ import annotations

import functools

from smess.assembly import assemble
from smess.fixtures import ieee33_path, tiny_documents, tiny_paths
from smess.milp import EQ, Model
from smess.scenario import CASES, load_scenario, parse_scenario
from smess.solver import SolveOptions, SolveResult, solve

TINY = tuple(p.stem for p in tiny_paths())


@functools.lru_cache(maxsize=None)
def tiny(name: str):
    return load_scenario(next(p for p in tiny_paths() if p.stem == name))


@functools.lru_cache(maxsize=1)
def ieee33():
    return load_scenario(ieee33_path())


def tiny_variant(name: str, edit) -> object:
    """Parse a copy of a tiny document after ``edit(doc)`` mutates it."""
    doc = tiny_documents()[name]
    edit(doc)
    return parse_scenario(doc)


@functools.lru_cache(maxsize=None)
def solved(name: str, case: str = "Case5", phi: float | None = None, backend: str = "highs") -> SolveResult:
    """Optimal solve of a tiny instance (cached for the whole session)."""
    scn = tiny(name).with_study(case=case)
    if phi is not None:
        scn = scn.with_study(phi_travel=phi, phi_fuel=phi)
    return solve(assemble(scn), SolveOptions(gap=0.0, time_limit=300, backend=backend), scn.time.span_count)


def fix(model: Model, name: str, value: float) -> None:
    vid = model.var_by_name(name)
    model.add_row("test", (len(model.constraints),), [(vid, 1.0)], EQ, value)


def status_of(model: Model, fixes: dict[str, float] | None = None) -> SolveResult:
    for name, value in (fixes or {}).items():
        fix(model, name, value)
    return solve(model, SolveOptions(gap=0.0, time_limit=120))


def row_violations(model: Model, family: str, values: dict[str, float], select=None) -> list[tuple[str, float]]:
    """Evaluate rows of one family on a sparse assignment (unassigned columns read as 0)."""
    x = [0.0] * len(model.vars)
    for name, val in values.items():
        x[model.var_by_name(name)] = val
    out = []
    for con in model.rows_of(family):
        if select is None or select(con):
            viol = con.violation(x)
            if viol > 1e-9:
                out.append((con.name, viol))
    return out


__all__ = ["CASES", "TINY", "fix", "ieee33", "row_violations", "solved", "status_of", "tiny", "tiny_variant"]
