"""Command-line entry point: ``smess build|solve|validate|compare``.

Exit statuses: 0 success/pass, 1 violation/infeasible, 2 input error, 3 backend error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .assembly import assemble, structure_check
from .lpformat import write_model
from .scenario import CASES, Scenario, ScenarioError, load_scenario
from .solver import CBC_ENV, BackendError, Schedule, SolveOptions, SolveResult, solve
from .validate import DimensionError, check_schedule, idle_schedule, recompute_objective, resilience_series

log = logging.getLogger("smess")

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_BACKEND = 0, 1, 2, 3


class InputError(Exception):
    pass


@dataclass
class RunManifest:
    scenario: Path
    case: str | None
    options: SolveOptions
    out: Path
    formats: tuple[str, ...] = ("json", "tsv")
    overrides: dict = field(default_factory=dict)
    warm_start: bool = False

    def __post_init__(self):
        if not self.scenario.is_file():
            raise InputError(f"scenario file not found: {self.scenario}")
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise InputError(f"output directory not writable: {exc}") from exc
        if not os.access(self.out, os.W_OK):
            raise InputError(f"output directory not writable: {self.out}")

    def load(self) -> Scenario:
        try:
            scn = load_scenario(self.scenario)
        except (ScenarioError, json.JSONDecodeError, OSError) as exc:
            raise InputError(str(exc)) from exc
        changes = dict(self.overrides)
        if self.case:
            changes["case"] = self.case
        try:
            return scn.with_study(**changes) if changes else scn
        except (ScenarioError, ValueError) as exc:
            raise InputError(str(exc)) from exc


# ------------------------------------------------------------------ helpers


def _write(path: Path, text: str) -> None:
    path.write_text(text)
    log.info("wrote %s", path)


def _json(data) -> str:
    return json.dumps(data, indent=1, sort_keys=True) + "\n"


def _meta(out: Path, name: str, **fields) -> None:
    """Timings and timestamps live in a sidecar so every other output is reproducible."""
    path = out / "meta.json"
    meta = json.loads(path.read_text()) if path.exists() else {}
    meta[name] = {"finished_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()), "version": __version__, **fields}
    path.write_text(_json(meta))


def _solve_case(m: RunManifest, scn: Scenario) -> tuple[SolveResult, float]:
    t0 = time.perf_counter()
    model = assemble(scn)
    build_s = time.perf_counter() - t0
    start = idle_schedule(scn, m.options.backend) if m.warm_start else None
    return solve(model, m.options, scn.time.span_count, start=start), build_s


def _result_doc(scn: Scenario, res: SolveResult) -> dict:
    doc = {k: v for k, v in res.summary().items() if k != "seconds"}
    doc["case"] = scn.study.case
    if res.schedule is not None:
        doc["terms"] = recompute_objective(scn, res.schedule).as_dict()
    return doc


def _solve_exit(res: SolveResult) -> int:
    if res.status == "error":
        return EXIT_BACKEND
    return EXIT_OK if res.schedule is not None else EXIT_FAIL


# ----------------------------------------------------------------- commands


def cmd_build(m: RunManifest) -> int:
    scn = m.load()
    t0 = time.perf_counter()
    model = assemble(scn)
    check = structure_check(model, scn)
    _write(m.out / "model.lp", write_model(model).decode())
    _write(m.out / "counts.json", _json(check.as_dict()))
    print(f"{'kind':<11}{'family':<9}{'table':>10}{'actual':>10}")
    doc = check.as_dict()
    for row in doc["families"]:
        mark = "" if row["reference"] == row["actual"] else "  *"
        print(f"{row['kind']:<11}{row['family']:<9}{row['reference']:>10}{row['actual']:>10}{mark}")
    cf, act = doc["table1_closed_form"], doc["actual"]
    for k in ("binary", "continuous", "constraints"):
        print(f"total {k:<12} closed form {cf[k]:>8}  actual {act[k]:>8}")
    for d in check.itemized:
        print(f"deviation {d.name}: {d.description}")
    for fam, n in check.extensions.items():
        print(f"extension rows {fam}: {n}")
    _meta(m.out, "build", seconds=round(time.perf_counter() - t0, 3))
    if not check.ok:
        for kind, fam, e, a in check.mismatches:
            print(f"MISMATCH {kind} {fam}: expected {e}, got {a}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_solve(m: RunManifest) -> int:
    scn = m.load()
    res, build_s = _solve_case(m, scn)
    if res.schedule is not None:
        res.schedule.dump(m.out / "schedule.json")
    _write(m.out / "result.json", _json(_result_doc(scn, res)))
    _meta(m.out, "solve", build_seconds=round(build_s, 3), solve_seconds=round(res.seconds, 3))
    gap = "n/a" if res.gap is None else f"{res.gap:.4%}"
    print(f"status {res.status}  objective {res.objective}  bound {res.bound}  gap {gap}")
    return _solve_exit(res)


def cmd_validate(m: RunManifest, schedule_path: Path) -> int:
    scn = m.load()
    if not schedule_path.is_file():
        raise InputError(f"schedule file not found: {schedule_path}")
    try:
        schedule = Schedule.load(schedule_path)
        report = check_schedule(scn, schedule)
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"unreadable schedule: {exc}") from exc
    series = resilience_series(scn, schedule)
    terms = recompute_objective(scn, schedule)
    if "json" in m.formats:
        _write(m.out / "report.json", report.to_json())
        _write(m.out / "resilience.json", series.to_json())
    if "tsv" in m.formats:
        _write(m.out / "report.tsv", report.to_tsv())
        _write(m.out / "resilience.tsv", series.to_tsv())
    _write(m.out / "objective.json", _json(terms.as_dict()))
    fams = sorted(report.families)
    print(f"{'PASS' if report.passed else 'FAIL'}  violations {len(report.violations)}  families {fams}  "
          f"restored {terms.restored:.6g}  objective {terms.total:.6g}")
    for w in report.warnings:
        print(f"warning: {w}")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_compare(m: RunManifest, cases: list[str]) -> int:
    base = m.load()
    rows, curves, worst = [], {}, EXIT_OK
    for case in cases:
        scn = base.with_study(case=case)
        sub = m.out / case
        sub.mkdir(exist_ok=True)
        res, build_s = _solve_case(m, scn)
        _write(sub / "result.json", _json(_result_doc(scn, res)))
        _meta(m.out, case, build_seconds=round(build_s, 3), solve_seconds=round(res.seconds, 3))
        row = {"case": case, "status": res.status, "objective": res.objective, "gap": res.gap,
               "restored": None, "travel_penalty": None, "fuel_penalty": None}
        if res.schedule is not None:
            res.schedule.dump(sub / "schedule.json")
            t = recompute_objective(scn, res.schedule)
            row.update(restored=t.restored, travel_penalty=t.travel_penalty, fuel_penalty=t.fuel_penalty)
            curves[case] = resilience_series(scn, res.schedule)
        else:
            worst = max(worst, _solve_exit(res))
        rows.append(row)
    with open(m.out / "compare.tsv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), delimiter="\t", lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    with open(m.out / "curves.tsv", "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        names = list(curves)
        w.writerow(["span"] + [f"{c}_served_kw" for c in names] + [f"{c}_cumulative" for c in names])
        for t in range(base.time.span_count):
            w.writerow([t + 1] + [f"{curves[c].served_kw[t]:.9g}" for c in names]
                       + [f"{curves[c].cumulative_restored[t]:.9g}" for c in names])
    print(f"{'case':<7}{'status':<12}{'objective':>14}")
    for r in rows:
        obj = "-" if r["objective"] is None else f"{r['objective']:.6f}"
        print(f"{r['case']:<7}{r['status']:<12}{obj:>14}")
    return worst


# ------------------------------------------------------------------ parsing


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True, type=Path, help="scenario JSON file")
    common.add_argument("--case", choices=CASES, help="comparison case (default: scenario setting)")
    common.add_argument("--gap", type=float, help="relative optimality gap (default: scenario setting)")
    common.add_argument("--time-limit", type=float, default=600.0, help="wall-clock limit in seconds")
    common.add_argument("--backend", choices=("highs", "cbc"), default="highs",
                        help=f"MILP backend; CBC path from ${CBC_ENV} or PATH")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--disk-segments", type=int, help="polygon sides for rating disks")
    common.add_argument("--strict-pickup", action="store_true", help="add rows forbidding pickup of de-energized nodes")
    common.add_argument("--phi-travel", type=float, help="penalty per travel span")
    common.add_argument("--phi-fuel", type=float, help="penalty per fuel-exchange span")
    common.add_argument("--warm-start", action="store_true", help="seed the backend with an idle schedule")
    common.add_argument("--format", choices=("json", "tsv", "both"), default="both", help="report formats")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="smess", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"smess {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("build", parents=[common], help="write the LP model and the structural count report")
    sub.add_parser("solve", parents=[common], help="solve and write schedule + result")
    v = sub.add_parser("validate", parents=[common], help="check a schedule and write reports")
    v.add_argument("--schedule", required=True, type=Path)
    c = sub.add_parser("compare", parents=[common], help="solve several cases and tabulate them")
    c.add_argument("--cases", nargs="+", choices=CASES, default=list(CASES))
    return p


def _manifest(args) -> RunManifest:
    over = {}
    if args.disk_segments is not None:
        over["disk_segments"] = args.disk_segments
    if args.strict_pickup:
        over["strict_pickup"] = True
    if args.phi_travel is not None:
        over["phi_travel"] = args.phi_travel
    if args.phi_fuel is not None:
        over["phi_fuel"] = args.phi_fuel
    gap = args.gap
    if gap is None:
        try:
            gap = json.loads(Path(args.scenario).read_text()).get("study", {}).get("mip_gap", 0.001)
        except (OSError, json.JSONDecodeError, AttributeError):
            gap = 0.001
    try:
        opts = SolveOptions(gap=gap, time_limit=args.time_limit, backend=args.backend, threads=args.threads,
                            seed=args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    formats = ("json", "tsv") if args.format == "both" else (args.format,)
    return RunManifest(args.scenario, args.case, opts, args.out, formats, over, args.warm_start)


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        m = _manifest(args)
        if args.command == "build":
            return cmd_build(m)
        if args.command == "solve":
            return cmd_solve(m)
        if args.command == "validate":
            return cmd_validate(m, args.schedule)
        return cmd_compare(m, args.cases)
    except (InputError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        if exc.diagnostics:
            print(exc.diagnostics, file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
