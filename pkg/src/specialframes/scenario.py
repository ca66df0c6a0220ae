"""JSON scenario files: loading and validation.

See ``docs/scenario-schema.md`` for the full schema.  Chart axes are numbered
from 1 in scenario files (``tangential_axes``); everything in Python is
0-based.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import catalog
from .calculus import Axis, OdeSettings, node_index
from .core import ConnectionField, ScalarField, SDerivationAlongX, VectorField, connection_WX
from .domain import Box
from .errors import ParseError, ScenarioError
from .obstruction import Grid, ParamMap

TASKS = ("check", "build", "verify", "transport", "holonomy", "uniqueness", "curvature")
_TOP_KEYS = {"name", "description", "chart", "connection", "derivation", "map", "curves", "frame", "numerics", "tasks"}


@dataclass(frozen=True)
class Numerics:
    fd_step: float = 1e-4
    ode_step: float = 1e-3
    obstruction_tol: float = 1e-6
    residual_tol: float = 1e-5
    transport_tol: float = 1e-7
    fixed_field_tol: float = 1e-6

    @property
    def ode(self) -> OdeSettings:
        return OdeSettings(step=self.ode_step)


@dataclass
class Scenario:
    name: str
    raw: dict
    dim: int
    variables: tuple[str, ...]
    domain: Box
    connection: ConnectionField | None = None
    derivation: SDerivationAlongX | None = None
    pmap: ParamMap | None = None
    curve_starts: list[np.ndarray] = field(default_factory=list)
    curve_span: float = 0.0
    B0: np.ndarray | None = None
    B0_alt: np.ndarray | None = None
    s0: np.ndarray | None = None
    numerics: Numerics = field(default_factory=Numerics)
    tasks: tuple[str, ...] = ()


def _bound(v, default):
    if v is None:
        return default
    return float(v)


def _matrix(value, n: int, what: str) -> np.ndarray:
    try:
        M = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError(f"{what} must be a numeric {n}x{n} matrix") from None
    if M.shape != (n, n):
        raise ScenarioError(f"{what} must be {n}x{n}, got shape {M.shape}")
    return M


def _expr(text, names, where: str) -> ScalarField:
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return ScalarField.constant(float(text))
    if not isinstance(text, str):
        raise ScenarioError(f"{where}: expected an expression string, got {text!r}")
    try:
        return ScalarField.from_expr(text, names)
    except ParseError as exc:
        raise ScenarioError(f"{where}: {exc} in {text!r}") from exc


def _expr_matrix(rows, n: int, names, where: str):
    if not isinstance(rows, list) or len(rows) != n or any(not isinstance(r, list) or len(r) != n for r in rows):
        raise ScenarioError(f"{where} must be an {n}x{n} table of expressions")
    fields = [[_expr(rows[i][j], names, f"{where}[{i}][{j}]") for j in range(n)] for i in range(n)]

    def evaluate(x):
        return np.array([[f(x) for f in row] for row in fields])

    return evaluate


def _connection(spec: dict, n: int, names, domain: Box, where: str) -> ConnectionField:
    if not isinstance(spec, dict):
        raise ScenarioError(f"{where} must be an object")
    if ("builtin" in spec) == ("gamma" in spec):
        raise ScenarioError(f"{where} needs exactly one of 'builtin' or 'gamma'")
    if "builtin" in spec:
        name = spec["builtin"]
        if name not in catalog.CONNECTIONS:
            raise ScenarioError(f"unknown builtin connection {name!r}; known: {', '.join(catalog.CONNECTIONS)}")
        params = dict(spec.get("params", {}))
        conn = catalog.builtin_connection(name, params, domain)
        if conn.dim != n:
            raise ScenarioError(f"builtin {name!r} is {conn.dim}-dimensional, chart has dim {n}")
        return conn
    table = spec["gamma"]
    ok = isinstance(table, list) and len(table) == n and all(
        isinstance(row, list) and len(row) == n and all(isinstance(c, list) and len(c) == n for c in row)
        for row in table
    )
    if not ok:
        raise ScenarioError(f"{where}.gamma must be an {n}x{n}x{n} nested list gamma[i][j][k]")
    gamma = [[[_expr(table[i][j][k], names, f"{where}.gamma[{i}][{j}][{k}]") for k in range(n)]
              for j in range(n)] for i in range(n)]
    return ConnectionField(n, gamma, domain=domain, name="expression")


def _vector(values, n, names, domain, where) -> VectorField:
    if not isinstance(values, list) or len(values) != n:
        raise ScenarioError(f"{where} must list {n} component expressions")
    return VectorField([_expr(v, names, f"{where}[{i}]") for i, v in enumerate(values)], domain=domain)


def _derivation(spec: dict, n, names, domain) -> SDerivationAlongX:
    if not isinstance(spec, dict):
        raise ScenarioError("derivation must be an object")
    X = _vector(spec["X"], n, names, domain, "derivation.X") if "X" in spec else None
    if spec.get("builtin") == "lie-derivative":
        return catalog.lie_derivative(X, domain)
    if "builtin" in spec:
        raise ScenarioError(f"unknown builtin derivation {spec['builtin']!r}; known: {', '.join(catalog.DERIVATIONS)}")
    if X is None:
        raise ScenarioError("derivation.X is required")
    sources = [k for k in ("S", "W", "connection") if k in spec]
    if len(sources) != 1:
        raise ScenarioError("derivation needs exactly one of 'S', 'W' or 'connection'")
    if "connection" in spec:
        conn = _connection(spec["connection"], n, names, domain, "derivation.connection")
        return SDerivationAlongX(X, W=lambda x: connection_WX(conn, X, x), name=f"nabla_X[{conn.name}]")
    if "S" in spec:
        return SDerivationAlongX(X, S=_expr_matrix(spec["S"], n, names, "derivation.S"))
    return SDerivationAlongX(X, W=_expr_matrix(spec["W"], n, names, "derivation.W"))


def _param_map(spec: dict, n: int) -> ParamMap:
    grid_spec = spec.get("grid")
    if not isinstance(grid_spec, list) or not grid_spec:
        raise ScenarioError("map.grid must be a non-empty list of {min, max, count}")
    try:
        axes = tuple(Axis(float(a["min"]), float(a["max"]), int(a["count"])) for a in grid_spec)
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"map.grid entries need min, max, count: {exc}") from None
    except ValueError as exc:
        raise ScenarioError(f"map.grid: {exc}") from None
    p = len(axes)
    tang = spec.get("tangential_axes", list(range(1, p + 1)))
    if len(tang) != p:
        raise ScenarioError(f"map.tangential_axes has {len(tang)} entries for {p} grid axes")
    if any(not isinstance(a, int) or not 1 <= a <= n for a in tang):
        raise ScenarioError(f"map.tangential_axes must be chart axes numbered 1..{n}")
    t0 = spec.get("t0", [])
    try:
        grid = Grid(axes, n, tuple(a - 1 for a in tang), tuple(float(v) for v in t0))
    except ValueError as exc:
        raise ScenarioError(f"map: {exc}") from None
    if "components" in spec:
        pnames = spec.get("parameters", [f"s{i + 1}" for i in range(p)])
        comps = spec["components"]
        if not isinstance(comps, list) or len(comps) != n:
            raise ScenarioError(f"map.components must list {n} expressions")
        fields = [_expr(c, pnames, f"map.components[{i}]") for i, c in enumerate(comps)]
        return ParamMap(grid, fields)
    return ParamMap(grid, adapted=True)


def parse_scenario(raw: dict, source: str = "<dict>") -> Scenario:
    if not isinstance(raw, dict):
        raise ScenarioError(f"{source}: top level must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ScenarioError(f"{source}: unknown keys {sorted(unknown)}")
    chart = raw.get("chart")
    if not isinstance(chart, dict) or "dim" not in chart:
        raise ScenarioError(f"{source}: 'chart' with 'dim' is required")
    n = int(chart["dim"])
    if n < 1:
        raise ScenarioError("chart.dim must be >= 1")
    names = tuple(chart.get("variables", [f"x{i + 1}" for i in range(n)]))
    if len(names) != n:
        raise ScenarioError(f"chart.variables has {len(names)} names for dim {n}")
    dom = chart.get("domain")
    if dom is None:
        domain = Box.unbounded(n)
    else:
        if len(dom) != n:
            raise ScenarioError(f"chart.domain needs {n} [min, max] pairs")
        try:
            domain = Box(tuple(_bound(d[0], -math.inf) for d in dom), tuple(_bound(d[1], math.inf) for d in dom))
        except (ValueError, TypeError, IndexError) as exc:
            raise ScenarioError(f"chart.domain: {exc}") from None

    if ("connection" in raw) == ("derivation" in raw):
        raise ScenarioError(f"{source}: give exactly one of 'connection' or 'derivation'")
    try:
        connection = _connection(raw["connection"], n, names, domain, "connection") if "connection" in raw else None
        derivation = _derivation(raw["derivation"], n, names, domain) if "derivation" in raw else None
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    pmap = _param_map(raw["map"], n) if "map" in raw else None
    if pmap is not None:
        for idx in pmap.grid.indices():
            x = pmap.point(pmap.grid.param(idx))
            if not domain.contains(x):
                raise ScenarioError(f"map node {pmap.grid.param(idx).tolist()} maps outside the chart domain")

    starts, span = [], 0.0
    if "curves" in raw:
        cs = raw["curves"]
        try:
            starts = [np.asarray(p, dtype=float) for p in cs["starts"]]
            span = float(cs["span"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"curves needs 'starts' (list of points) and 'span': {exc}") from None
        if any(p.shape != (n,) for p in starts):
            raise ScenarioError(f"every curve start must have {n} coordinates")
        if not span > 0:
            raise ScenarioError("curves.span must be positive")

    frame = raw.get("frame", {})
    B0 = _matrix(frame["B0"], n, "frame.B0") if "B0" in frame else np.eye(n)
    B0_alt = _matrix(frame["B0_alt"], n, "frame.B0_alt") if "B0_alt" in frame else np.diag([2.0] + [1.0] * (n - 1))
    s0 = np.atleast_1d(np.asarray(frame["s0"], dtype=float)) if "s0" in frame else None
    if s0 is not None:
        if pmap is None or s0.shape != (pmap.p,):
            raise ScenarioError("frame.s0 needs a map and one value per map parameter")
        for ax, v in zip(pmap.grid.axes, s0):
            try:
                node_index(ax.nodes, float(v))
            except ValueError:
                raise ScenarioError(f"frame.s0 value {v} is not a grid node") from None

    num = raw.get("numerics", {})
    try:
        numerics = Numerics(**{k: float(v) for k, v in num.items()})
        numerics.ode  # validates the step
    except TypeError as exc:
        raise ScenarioError(f"numerics: {exc}") from None
    except ValueError as exc:
        raise ScenarioError(f"numerics: {exc}") from None

    tasks = tuple(raw.get("tasks", []))
    bad = [t for t in tasks if t not in TASKS]
    if bad:
        raise ScenarioError(f"unknown tasks {bad}; known: {', '.join(TASKS)}")
    return Scenario(
        name=str(raw.get("name", Path(source).stem)), raw=raw, dim=n, variables=names, domain=domain,
        connection=connection, derivation=derivation, pmap=pmap, curve_starts=starts, curve_span=span,
        B0=B0, B0_alt=B0_alt, s0=s0, numerics=numerics, tasks=tasks,
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from None
    try:
        raw: Any = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: malformed JSON: {exc}") from None
    return parse_scenario(raw, str(path))
