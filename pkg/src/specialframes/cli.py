"""Command-line entry point: one subcommand per task.

Exit codes: 0 pass, 1 fail or refused (a report is still written), 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import framebuilder as fb
from .calculus import multiparam_transport
from .errors import GeometryError, ObstructionFailed, ScenarioError
from .obstruction import curvature_matrices, obstruction_matrices
from .report import matrix_header, write_csv, write_json
from .scenario import TASKS, Scenario, load_scenario


@dataclass
class RunReport:
    scenario: str
    task: str
    outcome: str  # pass | fail | refused
    summary: dict = field(default_factory=dict)
    artifacts: list[str] = field(default_factory=list)
    echo: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict, repr=False)

    @property
    def exit_code(self) -> int:
        return 0 if self.outcome == "pass" else 1

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "task": self.task,
            "outcome": self.outcome,
            "summary": self.summary,
            "artifacts": self.artifacts,
            "config": self.echo,
        }


class TaskMismatch(ScenarioError):
    """The scenario lacks what the task needs."""


def _need(sc: Scenario, task: str, *what: str) -> None:
    for w in what:
        if w == "connection" and sc.connection is None:
            raise TaskMismatch(f"task {task!r} needs a 'connection' section")
        if w == "map" and sc.pmap is None:
            raise TaskMismatch(f"task {task!r} needs a 'map' section")


def _pnames(sc: Scenario) -> list[str]:
    return [f"s{a + 1}" for a in range(sc.pmap.p)]


def _obstruction_table(sc: Scenario, rep) -> tuple[list[str], list]:
    n, p = sc.dim, sc.pmap.p
    header = _pnames(sc) + ["alpha", "beta"] + matrix_header(n)
    rows = []
    for node, s in enumerate(rep.params):
        for a in range(p):
            for b in range(a + 1, p):
                rows.append(list(s) + [a + 1, b + 1] + list(rep.R[node, a, b].ravel()))
    return header, rows


def _residual_table(sc: Scenario, rep, params) -> tuple[list[str], list]:
    n = sc.dim
    header = _pnames(sc) + ["k"] + matrix_header(n)
    rows = []
    for node, s in enumerate(params):
        for k in range(rep.M.shape[1]):
            rows.append(list(s) + [k + 1] + list(rep.M[node, k].ravel()))
    return header, rows


def _refusal(sc: Scenario, task: str, exc: ObstructionFailed) -> RunReport:
    rep = exc.report
    return RunReport(sc.name, task, "refused", {"reason": str(exc), "obstruction": rep.summary()},
                     tables={"obstruction": _obstruction_table(sc, rep)})


def _build(sc: Scenario, B0=None):
    nm = sc.numerics
    return fb.build_frame_along_map(sc.connection, sc.pmap, sc.B0 if B0 is None else B0, nm.ode,
                                    nm.fd_step, nm.obstruction_tol, s0=sc.s0)


def _fixed_frames(sc: Scenario):
    nm = sc.numerics
    if not sc.curve_starts:
        raise TaskMismatch("derivation tasks need a 'curves' section")
    return [fb.build_frame_fixed_field(sc.derivation, x0, sc.curve_span, sc.B0, nm.ode, nm.fd_step)
            for x0 in sc.curve_starts]


def _curve_rows(frames, values) -> list:
    rows = []
    for c, (fr, vals) in enumerate(zip(frames, values)):
        for s, M in zip(fr.s, vals):
            rows.append([c + 1, s] + list(np.asarray(M).ravel()))
    return rows


def task_check(sc: Scenario) -> RunReport:
    _need(sc, "check", "connection", "map")
    nm = sc.numerics
    rep = obstruction_matrices(sc.connection, sc.pmap, nm.fd_step, nm.obstruction_tol)
    return RunReport(sc.name, "check", "pass" if rep.passed else "fail", {"obstruction": rep.summary()},
                     tables={"obstruction": _obstruction_table(sc, rep)})


def task_transport(sc: Scenario) -> RunReport:
    _need(sc, "transport", "connection", "map")
    grid, conn, nm = sc.pmap.grid, sc.connection, sc.numerics
    if not sc.pmap.adapted:
        raise TaskMismatch("task 'transport' needs an adapted map")
    tang = list(grid.tangential)
    Zs = [(lambda s, a=a: -conn.matrices(grid.embed(s))[tang[a]]) for a in range(grid.p)]
    s0 = sc.s0 if sc.s0 is not None else grid.param(grid.center_index())
    res = multiparam_transport(Zs, s0, grid.axes, nm.ode)
    rows = [list(grid.param(idx)) + list(res.Y[idx].ravel()) for idx in grid.indices()]
    ok = res.discrepancy < nm.transport_tol
    summary = {"discrepancy": res.discrepancy, "tolerance": nm.transport_tol, "s0": list(map(float, s0))}
    return RunReport(sc.name, "transport", "pass" if ok else "fail", summary,
                     tables={"transport": (_pnames(sc) + matrix_header(sc.dim), rows)})


def task_build(sc: Scenario, verify: bool = False) -> RunReport:
    task = "verify" if verify else "build"
    nm = sc.numerics
    if sc.derivation is not None:
        frames = _fixed_frames(sc)
        truncated = [fr.truncated for fr in frames]
        header = ["curve", "s"] + matrix_header(sc.dim)
        summary = {"curves": len(frames), "truncated": truncated}
        tables = {"frame": (header, _curve_rows(frames, [fr.values for fr in frames]))}
        ok = not any(truncated)
        if verify:
            reps = [fb.verify_vanishing(sc.derivation, fr, h=nm.fd_step, tol=nm.fixed_field_tol) for fr in frames]
            summary["residuals"] = [r.summary() for r in reps]
            summary["max_residual"] = max(r.max_norm for r in reps)
            ok = ok and all(r.passed for r in reps)
            tables = {"residual": (header, _curve_rows(frames, [r.M[:, 0] for r in reps]))}
        return RunReport(sc.name, task, "pass" if ok else "fail", summary, tables=tables)

    _need(sc, task, "connection", "map")
    try:
        frame = _build(sc)
    except ObstructionFailed as exc:
        return _refusal(sc, task, exc)
    grid = sc.pmap.grid
    params = grid.params()
    summary = {
        "obstruction": frame.obstruction.summary(),
        "patches": frame.partition.summary(),
        "discontinuous": frame.discontinuous,
        "transport_discrepancy": frame.discrepancy,
        "s0": frame.s0.tolist(),
    }
    if not verify:
        rows = [list(s) + list(frame(sc.pmap.point(s)).ravel()) for s in params]
        return RunReport(sc.name, task, "pass", summary,
                         tables={"frame": (_pnames(sc) + matrix_header(sc.dim), rows)})
    rep = fb.verify_vanishing(sc.connection, frame, sc.pmap, nm.fd_step, nm.residual_tol)
    summary["residual"] = rep.summary()
    return RunReport(sc.name, task, "pass" if rep.passed else "fail", summary,
                     tables={"residual": _residual_table(sc, rep, params)})


def task_holonomy(sc: Scenario) -> RunReport:
    nm = sc.numerics
    if sc.derivation is not None:
        frames = _fixed_frames(sc)
        loops = []
        for fr in frames:
            Y = fr.transport.final
            loops.append({
                "start": fr.points[0].tolist(),
                "end": fr.points[-1].tolist(),
                "span": float(fr.s[-1]),
                "Y_end": Y.tolist(),
                "trace": float(np.trace(Y)),
                "liouville_error": fr.transport.liouville_error(),
                "truncated": fr.truncated,
            })
        ok = all(l["liouville_error"] < nm.fixed_field_tol and not l["truncated"] for l in loops)
        header = ["curve", "s"] + matrix_header(sc.dim)
        return RunReport(sc.name, "holonomy", "pass" if ok else "fail", {"curves": loops},
                         tables={"transport": (header, _curve_rows(frames, [fr.transport.Y for fr in frames]))})
    _need(sc, "holonomy", "connection", "map")
    try:
        frame = _build(sc)
    except ObstructionFailed as exc:
        return _refusal(sc, "holonomy", exc)
    rep = fb.check_holonomic(frame, sc.pmap, sc.connection, nm.fd_step, nm.residual_tol)
    n = sc.dim
    header = _pnames(sc) + [f"c{k + 1}{i + 1}{j + 1}" for k in range(n) for i in range(n) for j in range(n)]
    rows = [list(s) + list(C.ravel()) for s, C in zip(sc.pmap.grid.params(), rep.commutators)]
    s = rep.summary()
    return RunReport(sc.name, "holonomy", "pass" if s["identity_holds"] else "fail", {"holonomicity": s},
                     tables={"commutators": (header, rows)})


def task_uniqueness(sc: Scenario) -> RunReport:
    _need(sc, "uniqueness", "connection", "map")
    nm = sc.numerics
    try:
        fa = _build(sc)
        fbm = _build(sc, sc.B0_alt)
    except ObstructionFailed as exc:
        return _refusal(sc, "uniqueness", exc)
    rep = fb.check_uniqueness(fa, fbm, sc.pmap, nm.fd_step, sc.connection.domain)
    ok = rep.max_norm <= nm.residual_tol
    header = _pnames(sc) + [f"d{k + 1}" for k in range(sc.dim)]
    rows = [list(s) + list(r) for s, r in zip(sc.pmap.grid.params(), rep.norms)]
    return RunReport(sc.name, "uniqueness", "pass" if ok else "fail",
                     {"max_norm": rep.max_norm, "tolerance": nm.residual_tol},
                     tables={"uniqueness": (header, rows)})


def task_curvature(sc: Scenario) -> RunReport:
    _need(sc, "curvature", "connection", "map")
    nm, n = sc.numerics, sc.dim
    header = [f"x{i + 1}" for i in range(n)] + ["k", "l"] + matrix_header(n)
    rows, worst = [], 0.0
    for x in sc.pmap.points():
        R = curvature_matrices(sc.connection, x, nm.fd_step)
        for k in range(n):
            for l in range(k + 1, n):
                rows.append(list(x) + [k + 1, l + 1] + list(R[k, l].ravel()))
                worst = max(worst, float(np.linalg.norm(R[k, l])))
    ok = worst < nm.obstruction_tol
    return RunReport(sc.name, "curvature", "pass" if ok else "fail",
                     {"max_norm": worst, "tolerance": nm.obstruction_tol, "flat": ok},
                     tables={"curvature": (header, rows)})


_DISPATCH = {
    "check": task_check,
    "build": lambda sc: task_build(sc, False),
    "verify": lambda sc: task_build(sc, True),
    "transport": task_transport,
    "holonomy": task_holonomy,
    "uniqueness": task_uniqueness,
    "curvature": task_curvature,
}


def run(sc: Scenario, task: str, out_dir=None, fmt: str = "both") -> RunReport:
    """Run one task; write artifacts to ``out_dir`` when given.

    Configuration mismatches raise :class:`ScenarioError`.  Numerical
    failures during the run (e.g. a pole hit by an expression) become a
    ``fail`` outcome carrying the error text.
    """
    if task not in _DISPATCH:
        raise ScenarioError(f"unknown task {task!r}; known: {', '.join(TASKS)}")
    try:
        report = _DISPATCH[task](sc)
    except ScenarioError:
        raise
    except GeometryError as exc:
        report = RunReport(sc.name, task, "fail", {"error": type(exc).__name__, "message": str(exc)})
    report.echo = sc.raw
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if fmt in ("csv", "both"):
            for kind, (header, rows) in sorted(report.tables.items()):
                path = write_csv(out / f"{task}_{kind}.csv", header, rows)
                report.artifacts.append(path.name)
        if fmt in ("json", "both"):
            name = f"{task}_summary.json"
            report.artifacts.append(name)
            write_json(out / name, report.to_dict())
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="specialframes", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="task", required=True)
    for task in TASKS + ("all",):
        help_text = "run every task listed in the scenario" if task == "all" else f"run the {task!r} task"
        cmd = sub.add_parser(task, help=help_text)
        cmd.add_argument("--config", type=Path, required=True, help="scenario JSON file")
        cmd.add_argument("--out", type=Path, default=None, help="artifact directory")
        cmd.add_argument("--format", choices=("json", "csv", "both"), default="both")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        sc = load_scenario(args.config)
        tasks = sc.tasks if args.task == "all" else (args.task,)
        if not tasks:
            raise ScenarioError("scenario lists no tasks")
        code = 0
        for task in tasks:
            report = run(sc, task, args.out, args.format)
            line = f"{sc.name}: {task} -> {report.outcome}"
            if report.outcome != "pass":
                reason = report.summary.get("reason") or report.summary.get("message")
                if reason:
                    line += f" ({reason})"
            print(line)
            code = max(code, report.exit_code)
        return code
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
