"""Backend adapters (in-process HiGHS, process-level CBC) and solution decoding."""

from __future__ import annotations

import json
import logging
import math
import os
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

import numpy as np

from .lpformat import write_model
from .milp import BINARY, EQ, GE, LE, Model

log = logging.getLogger(__name__)

ROUND_TOL = 1e-6
HARD_TOL = 1e-4
CBC_ENV = "SMESS_CBC"
STATUSES = ("optimal", "gap-limit", "time-limit", "infeasible", "error")


class BackendError(RuntimeError):
    """Backend missing or crashed; ``diagnostics`` holds captured output."""

    def __init__(self, message: str, diagnostics: str = ""):
        super().__init__(message)
        self.diagnostics = diagnostics


class IntegralityError(ValueError):
    pass


@dataclass(frozen=True)
class SolveOptions:
    gap: float = 0.001
    time_limit: float = 600.0
    backend: str = "highs"
    threads: int = 1
    seed: int = 0
    from_lp_file: bool = False  # highs only: read the written LP text instead of arrays

    def __post_init__(self):
        if not 0 <= self.gap < 1:
            raise ValueError("gap must lie in [0, 1)")
        if self.time_limit <= 0:
            raise ValueError("time limit must be positive")


# ---------------------------------------------------------------- schedule


@dataclass
class Schedule:
    """Decoded solution: ``values[family][index] = value`` with binaries rounded."""

    span_count: int
    values: dict[str, dict[tuple, float]]
    near_integral_fixes: int = 0

    def get(self, family: str, *index, default: float | None = None) -> float:
        try:
            return self.values[family][tuple(index)]
        except KeyError:
            if default is None:
                raise
            return default

    def has(self, family: str, *index) -> bool:
        return tuple(index) in self.values.get(family, {})

    def set(self, family: str, index: tuple, value: float) -> None:
        self.values.setdefault(family, {})[tuple(index)] = float(value)

    def copy(self) -> Schedule:
        return Schedule(self.span_count, {f: dict(d) for f, d in self.values.items()}, self.near_integral_fixes)

    # typed views
    def position(self, mer: str, sites, t: int) -> tuple[str, str]:
        """``("parked", node)`` or ``("travel", destination)`` for span ``t``."""
        for i in sites:
            if self.get("x", mer, i, t) > 0.5:
                return ("parked", i)
        for i in sites:
            if self.get("v", mer, i, t) > 0.5:
                return ("travel", i)
        return ("none", "")

    def owner(self, module: str, nodes, carriers, t: int) -> str:
        for i in nodes:
            if self.get("zeta", module, i, t) > 0.5:
                return i
        for j in carriers:
            if self.get("gamma", module, j, t) > 0.5:
                return j
        return ""

    def series(self, family: str, *prefix) -> np.ndarray:
        """Values of ``family(prefix..., t)`` for t = 0..D (NaN where absent)."""
        return np.array([self.values.get(family, {}).get(tuple(prefix) + (t,), np.nan)
                         for t in range(self.span_count + 1)])

    # serialization
    def to_document(self) -> dict:
        return {
            "span_count": self.span_count,
            "values": {f: [list(k) + [v] for k, v in sorted(d.items(), key=lambda kv: _sort_key(kv[0]))]
                       for f, d in sorted(self.values.items())},
        }

    @classmethod
    def from_document(cls, doc: dict) -> Schedule:
        vals = {f: {tuple(row[:-1]): float(row[-1]) for row in rows} for f, rows in doc["values"].items()}
        return cls(int(doc["span_count"]), vals)

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_document(), indent=0) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> Schedule:
        return cls.from_document(json.loads(Path(path).read_text()))


def _sort_key(idx: tuple) -> tuple:
    return tuple((0, p, "") if isinstance(p, (int, float)) else (1, 0, str(p)) for p in idx)


@dataclass
class SolveResult:
    status: str
    objective: float | None = None
    bound: float | None = None
    gap: float | None = None
    seconds: float = 0.0
    schedule: Schedule | None = None
    values: np.ndarray | None = None
    backend: str = ""
    message: str = ""
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def has_incumbent(self) -> bool:
        return self.values is not None

    def summary(self) -> dict:
        return {"status": self.status, "objective": self.objective, "bound": self.bound, "gap": self.gap,
                "seconds": round(self.seconds, 3), "backend": self.backend, "message": self.message}


def relative_gap(incumbent: float | None, bound: float | None) -> float | None:
    if incumbent is None or bound is None:
        return None
    return (bound - incumbent) / max(1.0, abs(bound))


# --------------------------------------------------------------- decoding


def extract_schedule(model: Model, raw: np.ndarray | list[float], span_count: int | None = None) -> Schedule:
    """Round binaries (error beyond 1e-4 from an integer) and group values by family."""
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (len(model.vars),):
        raise ValueError(f"value vector has {raw.shape} entries, model has {len(model.vars)} variables")
    values: dict[str, dict[tuple, float]] = {}
    fixes = 0
    for v in model.vars:
        val = float(raw[v.id])
        if v.kind == BINARY:
            r = round(val)
            dev = abs(val - r)
            if dev > HARD_TOL or r not in (0, 1):
                raise IntegralityError(f"binary {v.name} = {val} is not integral")
            if dev > ROUND_TOL:
                fixes += 1
            val = float(r)
        values.setdefault(v.family, {})[v.index] = val
    D = span_count if span_count is not None else model.meta.get("span_count")
    if D is None:
        D = max((idx[-1] for idx in values.get("delta", {})), default=0)
    if fixes:
        log.warning("%d binaries needed rounding beyond %.0e", fixes, ROUND_TOL)
    return Schedule(int(D), values, fixes)


def _permute(values, order) -> list[float]:
    out = np.zeros(len(order))
    out[np.asarray(order)] = np.asarray(values, dtype=float)
    return list(out)


def _rounded_vector(model: Model, raw: np.ndarray) -> np.ndarray:
    out = np.array(raw, dtype=float)
    for v in model.vars:
        if v.kind == BINARY:
            out[v.id] = round(out[v.id])
    return out


# --------------------------------------------------------------- backends


def _arrays(model: Model):
    n = len(model.vars)
    lb = np.array([v.lb for v in model.vars])
    ub = np.array([v.ub for v in model.vars])
    inf = 1e30
    lb[np.isinf(lb)] = -inf
    ub[np.isinf(ub)] = inf
    c = np.zeros(n)
    for v, coef in model.objective.terms.items():
        c[v] += coef
    starts, idx, vals, rlo, rhi = [0], [], [], [], []
    for con in model.constraints:
        for v, coef in con.terms:
            idx.append(v)
            vals.append(coef)
        starts.append(len(idx))
        rlo.append(con.rhs if con.sense in (GE, EQ) else -inf)
        rhi.append(con.rhs if con.sense in (LE, EQ) else inf)
    integ = np.array([1 if v.kind == BINARY else 0 for v in model.vars], dtype=np.int32)
    return c, lb, ub, np.array(rlo), np.array(rhi), np.array(starts, dtype=np.int32), \
        np.array(idx, dtype=np.int32), np.array(vals), integ


_highs_threads: int | None = None


def _solve_highs(model: Model, opts: SolveOptions, start: np.ndarray | None = None) -> SolveResult:
    try:
        import highspy
    except ImportError as exc:  # pragma: no cover - dependency declared
        raise BackendError("highspy is not installed") from exc
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", opts.gap)
    h.setOptionValue("mip_abs_gap", 1e-9 if opts.gap == 0 else 1e-6)
    h.setOptionValue("time_limit", float(opts.time_limit))
    h.setOptionValue("random_seed", int(opts.seed))
    global _highs_threads
    if _highs_threads not in (None, opts.threads):
        # HiGHS keeps one process-wide scheduler; a different thread count needs a reset
        h.resetGlobalScheduler(True)
    _highs_threads = opts.threads
    h.setOptionValue("threads", int(opts.threads))
    h.setOptionValue("mip_feasibility_tolerance", 1e-7)
    h.setOptionValue("primal_feasibility_tolerance", 1e-8)
    order = None
    if opts.from_lp_file:
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "model.lp"
            path.write_bytes(write_model(model))
            if h.readModel(str(path)) != highspy.HighsStatus.kOk:
                raise BackendError("HiGHS rejected the LP file")
        lp = h.getLp()
        names = list(lp.col_names_)
        pos = {nm: k for k, nm in enumerate(names)}
        order = np.array([pos[v.name] for v in model.vars])
    else:
        c, lb, ub, rlo, rhi, starts, idx, vals, integ = _arrays(model)
        lp = highspy.HighsLp()
        lp.num_col_ = len(model.vars)
        lp.num_row_ = len(model.constraints)
        lp.col_cost_ = c
        lp.col_lower_ = lb
        lp.col_upper_ = ub
        lp.row_lower_ = rlo
        lp.row_upper_ = rhi
        lp.sense_ = highspy.ObjSense.kMaximize
        lp.a_matrix_.format_ = highspy.MatrixFormat.kRowwise
        lp.a_matrix_.start_ = starts
        lp.a_matrix_.index_ = idx
        lp.a_matrix_.value_ = vals
        lp.integrality_ = [highspy.HighsVarType.kInteger if i else highspy.HighsVarType.kContinuous
                           for i in integ]
        if h.passModel(lp) != highspy.HighsStatus.kOk:
            raise BackendError("HiGHS rejected the model arrays")
    if start is not None:
        sol = highspy.HighsSolution()
        sol.col_value = list(np.asarray(start, dtype=float)) if order is None else _permute(start, order)
        sol.value_valid = True
        h.setSolution(sol)
    t0 = time.perf_counter()
    h.run()
    secs = time.perf_counter() - t0
    ms = h.getModelStatus()
    info = h.getInfo()
    MS = highspy.HighsModelStatus
    has_sol = info.primal_solution_status == 2  # kSolutionStatusFeasible
    res = SolveResult(status="error", seconds=secs, backend="highs", message=h.modelStatusToString(ms))
    is_mip = any(v.kind == BINARY for v in model.vars)
    bound = float(info.mip_dual_bound) if is_mip else float(info.objective_function_value)
    if math.isfinite(bound) and abs(bound) < 1e29:
        res.bound = bound
    if has_sol:
        x = np.array(h.getSolution().col_value)
        res.values = x[order] if order is not None else x
    if ms == MS.kOptimal:
        res.status = "optimal"
    elif ms == MS.kTimeLimit:
        res.status = "time-limit"
    elif ms == MS.kInfeasible:
        res.status = "infeasible"
    elif ms in (MS.kObjectiveBound, MS.kObjectiveTarget, MS.kSolutionLimit, MS.kIterationLimit):
        res.status = "gap-limit" if has_sol else "error"
    return res


def cbc_path() -> str:
    env = os.environ.get(CBC_ENV)
    if env:
        if not Path(env).exists():
            raise BackendError(f"{CBC_ENV} points to a missing file: {env}")
        return env
    found = shutil.which("cbc")
    if found:
        return found
    try:
        from pulp.apis import coin_api  # bundled binary only; the modeling layer is not used
        path = coin_api.pulp_cbc_path
        if path and Path(path).exists():
            return path
    except Exception:  # noqa: BLE001 - any import/packaging issue means "not available"
        pass
    raise BackendError(f"CBC executable not found; set {CBC_ENV}")


def parse_cbc_solution(text: str) -> tuple[str, dict[str, float]]:
    """Parse a CBC ``-solu`` file: status line then ``index name value reduced_cost`` rows."""
    lines = text.splitlines()
    if not lines:
        return "error", {}
    head = lines[0].lower()
    if head.startswith("optimal"):
        status = "optimal"
    elif "infeasible" in head:
        status = "infeasible"
    elif "stopped on time" in head:
        status = "time-limit"
    elif "stopped on gap" in head or "stopped on ratio" in head:
        status = "gap-limit"
    else:
        status = "error"
    vals = {}
    for line in lines[1:]:
        parts = line.replace("**", " ").split()
        if len(parts) >= 3:
            vals[parts[1]] = float(parts[2])
    return status, vals


def _solve_cbc(model: Model, opts: SolveOptions, start: np.ndarray | None = None) -> SolveResult:
    exe = cbc_path()
    with tempfile.TemporaryDirectory() as tmp:
        lp = Path(tmp) / "model.lp"
        sol = Path(tmp) / "solution.txt"
        lp.write_bytes(write_model(model))
        cmd = [exe, str(lp), "-ratioGap", repr(opts.gap), "-allowableGap", "1e-9", "-sec", repr(opts.time_limit),
               "-randomSeed", str(opts.seed + 1), "-randomCbcSeed", str(opts.seed + 1),
               "-threads", str(opts.threads), "-solve", "-solu", str(sol)]
        t0 = time.perf_counter()
        try:
            proc = subprocess.run(cmd, capture_output=True, text=True, timeout=opts.time_limit + 60)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise BackendError(f"CBC failed to run: {exc}") from exc
        secs = time.perf_counter() - t0
        if proc.returncode != 0 or not sol.exists():
            raise BackendError(f"CBC exited with status {proc.returncode}", proc.stdout[-4000:] + proc.stderr)
        status, vals = parse_cbc_solution(sol.read_text())
    res = SolveResult(status=status, seconds=secs, backend="cbc", message=proc.stdout.splitlines()[-1] if proc.stdout else "")
    if status in ("optimal", "gap-limit", "time-limit") and (vals or not model.vars):
        x = np.zeros(len(model.vars))
        for v in model.vars:
            x[v.id] = vals.get(v.name, 0.0)  # CBC omits zero columns
        res.values = x
    if status == "time-limit" and res.values is None:
        res.message = "time limit reached without incumbent"
    return res


BACKENDS = {"highs": _solve_highs, "cbc": _solve_cbc}


def start_vector(model: Model, schedule: Schedule) -> np.ndarray:
    """Value vector for ``model`` taken from ``schedule`` (missing entries are zero)."""
    x = np.zeros(len(model.vars))
    for v in model.vars:
        x[v.id] = schedule.values.get(v.family, {}).get(v.index, 0.0)
    return x


def solve(model: Model, options: SolveOptions | None = None, span_count: int | None = None,
          start: Schedule | None = None) -> SolveResult:
    """Solve ``model`` with the configured backend; the model is not modified.

    ``start`` is an optional feasible schedule handed to the backend as an initial incumbent
    (honoured by the in-process HiGHS adapter; ignored by CBC).
    """
    opts = options or SolveOptions()
    if opts.backend not in BACKENDS:
        raise BackendError(f"unknown backend {opts.backend!r}")
    x0 = start_vector(model, start) if start is not None else None
    res = BACKENDS[opts.backend](model, opts, x0)
    if res.values is not None:
        res.schedule = extract_schedule(model, res.values, span_count)
        res.objective = model.objective.value(_rounded_vector(model, res.values))
        if res.bound is None and res.status == "optimal":
            res.bound = res.objective
        res.gap = relative_gap(res.objective, res.bound)
        if res.status == "optimal" and res.gap is not None and res.gap > 1e-9 and opts.gap > 0:
            res.status = "gap-limit"
    log.info("%s: %s obj=%s bound=%s in %.2fs", opts.backend, res.status, res.objective, res.bound, res.seconds)
    return res


def iter_nonzero(schedule: Schedule, family: str) -> Iterator[tuple[tuple, float]]:
    for k, v in sorted(schedule.values.get(family, {}).items(), key=lambda kv: _sort_key(kv[0])):
        if abs(v) > ROUND_TOL:
            yield k, v
