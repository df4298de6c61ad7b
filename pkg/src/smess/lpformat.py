"""CPLEX-LP text writer and a reader for our own output.

Names follow ``family(idx,...)`` for columns and ``r<tag>[_part](idx,...)`` for rows,
e.g. ``x(Carr1,8,4)`` and ``r1b_up(Carr1,8,4)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .milp import BINARY, EQ, GE, LE, Model

_SENSE_OUT = {LE: "<=", GE: ">=", EQ: "="}
_WRAP = 200


def _num(c: float) -> str:
    if c == int(c) and abs(c) < 1e15:
        return str(int(c))
    return repr(c)


def _terms(terms, names) -> list[str]:
    out = []
    for k, (v, c) in enumerate(terms):
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        body = names[v] if mag == 1.0 else f"{_num(mag)} {names[v]}"
        if k == 0:
            out.append(f"- {body}" if sign == "-" else body)
        else:
            out.append(f"{sign} {body}")
    return out


def _wrap(head: str, parts: list[str]) -> list[str]:
    lines, cur = [], head
    for p in parts:
        if len(cur) + len(p) + 1 > _WRAP and cur.strip():
            lines.append(cur)
            cur = "   " + p
        else:
            cur = f"{cur} {p}" if cur else p
    lines.append(cur)
    return lines


def write_model(model: Model) -> bytes:
    """Serialize to CPLEX-LP bytes (deterministic for a given model)."""
    names = [v.name for v in model.vars]
    if len(set(names)) != len(names):
        raise ValueError("duplicate column names")
    out = [f"\\ {model.name}", "Maximize" if model.sense == "max" else "Minimize"]
    obj = model.objective.normalized()
    out += _wrap(" obj:", _terms(obj, names)) if obj else [" obj:"]
    out.append("Subject To")
    for con in model.constraints:
        parts = _terms(con.terms, names) if con.terms else ["0", names[0]] if names else ["0"]
        parts = parts + [_SENSE_OUT[con.sense], _num(con.rhs)]
        out += _wrap(f" {con.name}:", parts)
    out.append("Bounds")
    for v in model.vars:
        if v.kind == BINARY:
            continue
        lo, hi = v.lb, v.ub
        if lo == hi:
            out.append(f" {v.name} = {_num(lo)}")
        elif math.isinf(lo) and math.isinf(hi):
            out.append(f" {v.name} free")
        else:
            ls = "-inf" if math.isinf(lo) else _num(lo)
            hs = "+inf" if math.isinf(hi) else _num(hi)
            out.append(f" {ls} <= {v.name} <= {hs}")
    bins = [v.name for v in model.vars if v.kind == BINARY]
    if bins:
        out.append("Binaries")
        out += [f" {n}" for n in bins]
    out.append("End")
    return ("\n".join(out) + "\n").encode("ascii")


# ------------------------------------------------------------------ reader


@dataclass
class LPRow:
    name: str
    terms: dict[str, float]
    sense: str
    rhs: float


@dataclass
class LPDocument:
    sense: str
    objective: dict[str, float] = field(default_factory=dict)
    rows: list[LPRow] = field(default_factory=list)
    bounds: dict[str, tuple[float, float]] = field(default_factory=dict)
    binaries: list[str] = field(default_factory=list)


_TOKEN = re.compile(r"[<>=]=?|[+-]|[^\s+<>=-][^\s<>=]*")


def _parse_linear(tokens: list[str]) -> dict[str, float]:
    terms: dict[str, float] = {}
    sign, coef = 1.0, None
    for tok in tokens:
        if tok in "+-":
            sign = -1.0 if tok == "-" else 1.0
            continue
        try:
            coef = float(tok)
            continue
        except ValueError:
            pass
        terms[tok] = terms.get(tok, 0.0) + sign * (coef if coef is not None else 1.0)
        sign, coef = 1.0, None
    return terms


def read_model(data: bytes | str) -> LPDocument:
    """Parse the subset of CPLEX-LP produced by :func:`write_model`."""
    text = data.decode() if isinstance(data, bytes) else data
    section = None
    doc = LPDocument(sense="max")
    stmts: list[str] = []
    cur: list[str] = []

    def flush():
        if cur:
            stmts.append((section, " ".join(cur)))
            cur.clear()

    stmts = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        low = line.lower()
        if low in ("maximize", "minimize", "subject to", "bounds", "binaries", "end"):
            flush()
            section = low
            if low in ("maximize", "minimize"):
                doc.sense = "max" if low == "maximize" else "min"
            continue
        if section in ("maximize", "minimize", "subject to") and ":" in line.split()[0] and cur:
            flush()
        if section in ("bounds", "binaries"):
            flush()
            stmts.append((section, line))
        else:
            cur.append(line)
    flush()
    for sec, stmt in stmts:
        if sec in ("maximize", "minimize"):
            _, _, body = stmt.partition(":")
            doc.objective = _parse_linear(_TOKEN.findall(body))
        elif sec == "subject to":
            name, _, body = stmt.partition(":")
            toks = _TOKEN.findall(body)
            k = next(i for i, t in enumerate(toks) if t in ("<=", ">=", "=", "<", ">", "=<", "=>"))
            sense = {"<=": LE, "<": LE, "=<": LE, ">=": GE, ">": GE, "=>": GE, "=": EQ}[toks[k]]
            rhs = float("".join(toks[k + 1:]))
            doc.rows.append(LPRow(name.strip(), _parse_linear(toks[:k]), sense, rhs))
        elif sec == "bounds":
            parts = stmt.split()
            if len(parts) == 2 and parts[1] == "free":
                doc.bounds[parts[0]] = (-math.inf, math.inf)
            elif len(parts) == 3 and parts[1] == "=":
                doc.bounds[parts[0]] = (float(parts[2]), float(parts[2]))
            else:
                doc.bounds[parts[2]] = (float(parts[0]), float(parts[4]))
        elif sec == "binaries":
            doc.binaries.extend(stmt.split())
    return doc
