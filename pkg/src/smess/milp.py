"""Solver-agnostic MILP intermediate representation and reusable linearization gadgets."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

BINARY = "binary"
CONTINUOUS = "continuous"
LE, EQ, GE = "<=", "=", ">="

_NAME_RE = re.compile(r"^[A-Za-z0-9_]+$")

Number = Union[int, float]


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class VarDef:
    id: int
    name: str
    family: str
    index: tuple
    kind: str
    lb: float
    ub: float


class LinExpr:
    """Sparse affine expression ``sum(coef * var) + const`` over variable ids."""

    __slots__ = ("terms", "const")

    def __init__(self, terms: Mapping[int, float] | Iterable[tuple[int, float]] | None = None,
                 const: float = 0.0):
        self.terms: dict[int, float] = {}
        if terms:
            items = terms.items() if isinstance(terms, Mapping) else terms
            for v, c in items:
                self.terms[v] = self.terms.get(v, 0.0) + c
        self.const = float(const)

    @classmethod
    def var(cls, v: int, coef: float = 1.0) -> LinExpr:
        return cls({v: coef})

    @classmethod
    def sum(cls, items: Iterable[int | LinExpr | tuple[int, float]]) -> LinExpr:
        out = cls()
        for it in items:
            out.iadd(it)
        return out

    def copy(self) -> LinExpr:
        e = LinExpr()
        e.terms = dict(self.terms)
        e.const = self.const
        return e

    def iadd(self, other, scale: float = 1.0) -> LinExpr:
        if isinstance(other, LinExpr):
            for v, c in other.terms.items():
                self.terms[v] = self.terms.get(v, 0.0) + scale * c
            self.const += scale * other.const
        elif isinstance(other, tuple):
            v, c = other
            self.terms[v] = self.terms.get(v, 0.0) + scale * c
        elif isinstance(other, int) and not isinstance(other, bool):
            raise TypeError("bare ints are ambiguous; wrap variable ids with LinExpr.var")
        else:
            self.const += scale * float(other)
        return self

    def __add__(self, other) -> LinExpr:
        return self.copy().iadd(other)

    __radd__ = __add__

    def __sub__(self, other) -> LinExpr:
        return self.copy().iadd(other, -1.0)

    def __rsub__(self, other) -> LinExpr:
        return (-self).iadd(other)

    def __neg__(self) -> LinExpr:
        return self * -1.0

    def __mul__(self, k: Number) -> LinExpr:
        e = LinExpr()
        e.terms = {v: c * k for v, c in self.terms.items()}
        e.const = self.const * k
        return e

    __rmul__ = __mul__

    def normalized(self) -> tuple[tuple[int, float], ...]:
        """Terms sorted by variable id with zero coefficients dropped."""
        return tuple((v, c) for v, c in sorted(self.terms.items()) if c != 0.0)

    def value(self, x: Sequence[float]) -> float:
        return self.const + sum(c * x[v] for v, c in self.terms.items())

    def __repr__(self) -> str:
        return f"LinExpr({self.normalized()}, const={self.const})"


@dataclass(frozen=True)
class LinConstraint:
    name: str
    family: str
    terms: tuple[tuple[int, float], ...]
    sense: str
    rhs: float

    def activity(self, x: Sequence[float]) -> float:
        return sum(c * x[v] for v, c in self.terms)

    def violation(self, x: Sequence[float]) -> float:
        a = self.activity(x)
        if self.sense == LE:
            return max(0.0, a - self.rhs)
        if self.sense == GE:
            return max(0.0, self.rhs - a)
        return abs(a - self.rhs)


@dataclass
class CountReport:
    binary: int
    continuous: int
    constraints: int
    variables_by_family: dict[str, int] = field(default_factory=dict)
    binaries_by_family: dict[str, int] = field(default_factory=dict)
    continuous_by_family: dict[str, int] = field(default_factory=dict)
    rows_by_family: dict[str, int] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "binary": self.binary, "continuous": self.continuous, "constraints": self.constraints,
            "binaries_by_family": dict(sorted(self.binaries_by_family.items())),
            "continuous_by_family": dict(sorted(self.continuous_by_family.items())),
            "rows_by_family": self.rows_by_family,
        }


def _fmt(part) -> str:
    if isinstance(part, float) and part.is_integer():
        part = int(part)
    return str(part)


class Model:
    """Variable registry, constraint list and a maximization objective."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.vars: list[VarDef] = []
        self.constraints: list[LinConstraint] = []
        self.objective = LinExpr()
        self.sense = "max"
        self.handles: dict[str, dict[tuple, int]] = {}
        self.meta: dict = {}
        self._var_names: dict[str, int] = {}
        self._row_names: set[str] = set()

    # -- variables
    def add_var(self, family: str, index: tuple, kind: str = CONTINUOUS,
                lb: float = -math.inf, ub: float = math.inf) -> int:
        if kind == BINARY:
            lb, ub = max(0.0, lb), min(1.0, ub)
        if lb > ub:
            raise ModelError(f"{family}{index}: lower bound {lb} > upper bound {ub}")
        name = f"{family}({','.join(_fmt(p) for p in index)})" if index else family
        if name in self._var_names:
            raise ModelError(f"duplicate variable name {name}")
        vid = len(self.vars)
        self.vars.append(VarDef(vid, name, family, tuple(index), kind, float(lb), float(ub)))
        self._var_names[name] = vid
        self.handles.setdefault(family, {})[tuple(index)] = vid
        return vid

    def var(self, family: str, *index) -> int:
        return self.handles[family][tuple(index)]

    def has_var(self, family: str, *index) -> bool:
        return tuple(index) in self.handles.get(family, {})

    def var_by_name(self, name: str) -> int:
        return self._var_names[name]

    def is_binary(self, vid: int) -> bool:
        return self.vars[vid].kind == BINARY

    # -- constraints
    def add_row(self, family: str, index: tuple, terms, sense: str, rhs: float = 0.0,
                part: str = "") -> LinConstraint:
        """Add ``terms (sense) rhs``; ``terms`` may be a LinExpr whose constant moves to the rhs."""
        if isinstance(terms, LinExpr):
            rhs = rhs - terms.const
            norm = terms.normalized()
        else:
            acc: dict[int, float] = {}
            for v, c in terms:
                acc[v] = acc.get(v, 0.0) + c
            norm = tuple((v, c) for v, c in sorted(acc.items()) if c != 0.0)
        tag = f"r{family}_{part}" if part else f"r{family}"
        name = f"{tag}({','.join(_fmt(p) for p in index)})" if index else tag
        if name in self._row_names:
            raise ModelError(f"duplicate constraint name {name}")
        nv = len(self.vars)
        for v, _ in norm:
            if not 0 <= v < nv:
                raise ModelError(f"constraint {name} references unknown variable {v}")
        self._row_names.add(name)
        con = LinConstraint(name, family, norm, sense, float(rhs))
        self.constraints.append(con)
        return con

    def set_objective(self, expr: LinExpr) -> None:
        for v in expr.terms:
            if not 0 <= v < len(self.vars):
                raise ModelError(f"objective references unknown variable {v}")
        self.objective = expr

    # -- queries
    def rows_of(self, family: str) -> list[LinConstraint]:
        return [c for c in self.constraints if c.family == family]

    def check_names(self) -> None:
        for v in self.vars:
            if not all(_NAME_RE.match(p) for p in _name_parts(v.name)):
                raise ModelError(f"invalid variable name {v.name}")


def _name_parts(name: str) -> list[str]:
    return [p for p in re.split(r"[(),]", name) if p]


# ----------------------------------------------------------------- gadgets


def and_product(model: Model, literals: Sequence[int | tuple[int, bool]], family: str,
                index: tuple, row_family: str | None = None) -> int:
    """Add binary ``z = AND(literals)``; a literal is a var id or ``(var id, positive?)``.

    Rows: ``z <= lit`` for every literal and ``z >= sum(lit) - (n - 1)``.
    """
    lits = [(l, True) if isinstance(l, int) else (l[0], bool(l[1])) for l in literals]
    if len(lits) < 2:
        raise ModelError("and_product needs at least two literals")
    for v, _ in lits:
        if not model.is_binary(v):
            raise ModelError(f"and_product literal {model.vars[v].name} is not binary")
    row_family = row_family or family
    z = model.add_var(family, index, BINARY)
    lower_terms = [(z, 1.0)]
    const = 0.0  # accumulated constant of sum(lit)
    for k, (v, pos) in enumerate(lits):
        if pos:  # z - v <= 0
            model.add_row(row_family, index, [(z, 1.0), (v, -1.0)], LE, 0.0, part=f"u{k}")
            lower_terms.append((v, -1.0))
        else:  # z <= 1 - v
            model.add_row(row_family, index, [(z, 1.0), (v, 1.0)], LE, 1.0, part=f"u{k}")
            lower_terms.append((v, 1.0))
            const += 1.0
    # z - sum(lit) >= -(n-1)  ->  z - sum(pos v) + sum(neg v) >= -(n-1) + const
    model.add_row(row_family, index, lower_terms, GE, -(len(lits) - 1) + const, part="lo")
    return z


def polygon_normals(segments: int) -> list[tuple[float, float]]:
    """Unit normals of a regular polygon with a vertex on the positive x axis."""
    return [(math.cos((2 * m + 1) * math.pi / segments), math.sin((2 * m + 1) * math.pi / segments))
            for m in range(segments)]


def polygonal_disk(model: Model, x_expr: LinExpr, y_expr: LinExpr, radius: float | LinExpr,
                   segments: int, family: str, index: tuple) -> list[LinConstraint]:
    """Inner polygon of ``x^2 + y^2 <= radius^2`` with ``segments`` half-planes.

    ``radius`` may be a LinExpr (e.g. ``kappa * S_max``) for switched disks.
    """
    if segments < 4 or segments % 2:
        raise ModelError("segments must be an even number >= 4")
    if not isinstance(radius, LinExpr) and radius <= 0:
        raise ModelError("radius must be positive")
    apothem = math.cos(math.pi / segments)
    rows = []
    for m, (cx, cy) in enumerate(polygon_normals(segments)):
        e = x_expr * cx + y_expr * cy
        e = e - (radius * apothem if isinstance(radius, LinExpr) else apothem * radius)
        rows.append(model.add_row(family, index, e, LE, 0.0, part=f"s{m}"))
    return rows


def piecewise_bigM(model: Model, value_expr: LinExpr, driver_expr: LinExpr,
                   breakpoints: Sequence[float], slopes: Sequence[float], intercepts: Sequence[float],
                   bigM: float, index: tuple, value_range: tuple[float, float],
                   driver_range: tuple[float, float], selector_family: str = "tau",
                   row_family: str = "7d", sum_family: str = "7e") -> list[int]:
    """Select one segment ``l`` with ``tau_l`` and force ``value = slope_l * driver + intercept_l``
    while ``breakpoints[l-1] <= driver <= breakpoints[l]``."""
    L = len(slopes)
    if L < 1 or len(breakpoints) != L + 1 or len(intercepts) != L:
        raise ModelError("need L >= 1 segments and L + 1 breakpoints")
    if any(b <= a for a, b in zip(breakpoints, breakpoints[1:])):
        raise ModelError("breakpoints must be strictly increasing")
    vlo, vhi = value_range
    dlo, dhi = driver_range
    need = 0.0
    for l in range(L):
        y, z = slopes[l], intercepts[l]
        aff = sorted((y * dlo + z, y * dhi + z))
        need = max(need, abs(vhi - aff[0]), abs(vlo - aff[1]),
                   breakpoints[l] - dlo, dhi - breakpoints[l + 1])
    if bigM < need - 1e-9:
        raise ModelError(f"big-M {bigM} below attainable residual range {need}")
    taus = []
    for l in range(L):
        tau = model.add_var(selector_family, index + (l + 1,), BINARY)
        taus.append(tau)
        resid = value_expr - driver_expr * slopes[l] - intercepts[l]
        idx = index + (l + 1,)
        # -M(1-tau) <= resid  ->  resid - M tau >= -M
        model.add_row(row_family, idx, resid + LinExpr.var(tau, -bigM), GE, -bigM, part="lo")
        model.add_row(row_family, idx, resid + LinExpr.var(tau, bigM), LE, bigM, part="up")
        model.add_row(row_family, idx, -driver_expr + LinExpr.var(tau, bigM), LE,
                      bigM - breakpoints[l], part="pmin")
        model.add_row(row_family, idx, driver_expr + LinExpr.var(tau, bigM), LE,
                      bigM + breakpoints[l + 1], part="pmax")
    model.add_row(sum_family, index, [(t, 1.0) for t in taus], EQ, 1.0)
    return taus


def count_by_family(model: Model) -> CountReport:
    bins: Counter = Counter()
    conts: Counter = Counter()
    rows: Counter = Counter()
    for v in model.vars:
        (bins if v.kind == BINARY else conts)[v.family] += 1
    for c in model.constraints:
        rows[c.family] += 1
    return CountReport(
        binary=sum(bins.values()), continuous=sum(conts.values()), constraints=len(model.constraints),
        variables_by_family=dict(bins + conts), binaries_by_family=dict(bins),
        continuous_by_family=dict(conts), rows_by_family=dict(rows),
    )
