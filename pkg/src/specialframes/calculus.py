"""Numerical kernels: central differences, matrix transport ODEs and integral curves.

All integrators are classical fixed-step RK4.  A segment [a, b] is split into
``ceil(|b - a| / step)`` equal substeps so that the endpoint is hit exactly.
Convergence statements assume C^2 coefficients.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .domain import Box
from .errors import DomainBoundaryError, GeometryError, TransportError

MatrixFn = Callable[[float], np.ndarray]


@dataclass(frozen=True)
class OdeSettings:
    step: float = 1e-3
    method: str = "rk4"
    max_steps: int = 10_000_000

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"ODE step must be positive, got {self.step}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.method != "rk4":
            raise ValueError(f"unsupported method {self.method!r}; only 'rk4' is available")

    def substeps(self, length: float) -> int:
        n = max(1, math.ceil(abs(length) / self.step - 1e-9))
        if n > self.max_steps:
            raise ValueError(f"segment of length {length} needs {n} steps > max_steps")
        return n


def partial(f: Callable, x, k: int, h: float = 1e-4, domain: Box | None = None):
    """Central difference of ``f`` at ``x`` along axis ``k``.

    ``f`` may return a scalar or an array.  When ``domain`` is given, both
    stencil points must lie inside it.
    """
    x = np.asarray(x, dtype=float)
    xp = x.copy()
    xm = x.copy()
    xp[k] += h
    xm[k] -= h
    if domain is not None:
        if not (domain.contains(xp) and domain.contains(xm)):
            raise DomainBoundaryError(x, f"finite-difference stencil (axis {k}, h={h}) leaves domain")
    d = (np.asarray(f(xp), dtype=float) - np.asarray(f(xm), dtype=float)) / (2.0 * h)
    return float(d) if d.ndim == 0 else d


def _eval_z(Z: MatrixFn, s) -> np.ndarray:
    try:
        return np.asarray(Z(s), dtype=float)
    except (GeometryError, ArithmeticError, ValueError) as exc:
        if isinstance(exc, TransportError):
            raise
        raise TransportError(s, exc) from exc


def rk4_linear_step(Z: MatrixFn, s: float, Y: np.ndarray, h: float):
    """One RK4 step of dY/ds = Z(s) Y.  Returns (Y_new, Simpson increment of tr Z)."""
    z0 = _eval_z(Z, s)
    zh = _eval_z(Z, s + 0.5 * h)
    z1 = _eval_z(Z, s + h)
    k1 = z0 @ Y
    k2 = zh @ (Y + 0.5 * h * k1)
    k3 = zh @ (Y + 0.5 * h * k2)
    k4 = z1 @ (Y + h * k3)
    Y_new = Y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    # Simpson on the same three nodes the stages use
    trace_inc = (h / 6.0) * (np.trace(z0) + 4.0 * np.trace(zh) + np.trace(z1))
    return Y_new, trace_inc


def transport_segment(Z: MatrixFn, a: float, b: float, Y: np.ndarray, settings: OdeSettings):
    """Integrate dY/ds = Z Y from a to b starting at Y.  Returns (Y(b), int_a^b tr Z)."""
    if a == b:
        return Y.copy(), 0.0
    n = settings.substeps(b - a)
    h = (b - a) / n
    acc = 0.0
    for i in range(n):
        Y, inc = rk4_linear_step(Z, a + i * h, Y, h)
        acc += inc
    return Y, acc


@dataclass
class TransportResult:
    """Samples of Y(s, s0; Z) for a single parameter."""

    s: np.ndarray
    Y: np.ndarray
    trace_integral: np.ndarray  # int_{s0}^{s} tr Z, for the Liouville check

    def liouville_error(self) -> float:
        """max |det Y - exp(int tr Z)|, relative to max(1, exp(int tr Z))."""
        dets = np.linalg.det(self.Y)
        ref = np.exp(self.trace_integral)
        return float(np.max(np.abs(dets - ref) / np.maximum(1.0, np.abs(ref))))

    @property
    def final(self) -> np.ndarray:
        return self.Y[-1]


def solve_linear_transport(Z: MatrixFn, s0: float, s1: float, settings: OdeSettings = OdeSettings(),
                           steps: int | None = None) -> TransportResult:
    """Solve dY/ds = Z(s) Y with Y(s0) = I on [s0, s1] (s1 < s0 allowed).

    ``steps`` overrides the step count derived from ``settings.step``.
    """
    z = _eval_z(Z, s0)
    m = z.shape[0]
    if steps is not None:
        n = steps if s1 != s0 else 0
    else:
        n = settings.substeps(s1 - s0) if s1 != s0 else 0
    h = (s1 - s0) / n if n else 0.0
    s = s0 + h * np.arange(n + 1)
    if n:
        s[-1] = s1
    Y = np.empty((n + 1, m, m))
    tr = np.zeros(n + 1)
    Y[0] = np.eye(m)
    cur = Y[0].copy()
    for i in range(n):
        cur, inc = rk4_linear_step(Z, s[i], cur, h)
        Y[i + 1] = cur
        tr[i + 1] = tr[i] + inc
    dets = np.linalg.det(Y)
    if np.any(dets == 0.0) or not np.all(np.isfinite(Y)):
        raise GeometryError("transport matrix lost invertibility")
    return TransportResult(s, Y, tr)


@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    count: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"axis needs lo < hi, got [{self.lo}, {self.hi}]")
        if self.count < 2:
            raise ValueError("axis needs at least 2 samples")

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.count - 1)

    def nearest(self, value: float) -> int:
        return int(np.clip(round((value - self.lo) / self.spacing), 0, self.count - 1))


def axis_nodes(ax) -> np.ndarray:
    return ax.nodes if isinstance(ax, Axis) else np.asarray(ax, dtype=float)


def node_index(nodes: np.ndarray, value: float, tol: float = 1e-12) -> int:
    i = int(np.argmin(np.abs(nodes - value)))
    if abs(nodes[i] - value) > tol * max(1.0, abs(value)):
        raise ValueError(f"{value} is not a grid node")
    return i


@dataclass
class MultiTransportResult:
    """Y on a rectangular parameter grid, computed in two axis orders."""

    nodes: tuple[np.ndarray, ...]
    origin: tuple[int, ...]
    Y: np.ndarray  # ascending sweep order, shape grid + (m, m)
    Y_reverse: np.ndarray  # descending sweep order
    discrepancy: float = field(default=0.0)

    def at(self, index) -> np.ndarray:
        return self.Y[tuple(index)]

    def interpolate(self, s) -> np.ndarray:
        """Componentwise multilinear interpolation of the ascending-order table."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        lo_idx, weights = [], []
        for nodes, v in zip(self.nodes, s):
            if len(nodes) == 1:
                lo_idx.append(0)
                weights.append(0.0)
                continue
            i = int(np.clip(np.searchsorted(nodes, v, side="right") - 1, 0, len(nodes) - 2))
            lo_idx.append(i)
            weights.append((v - nodes[i]) / (nodes[i + 1] - nodes[i]))
        out = np.zeros(self.Y.shape[-2:])
        for corner in itertools.product((0, 1), repeat=len(self.nodes)):
            w = 1.0
            for c, f in zip(corner, weights):
                w *= f if c else (1.0 - f)
            if w == 0.0:
                continue
            out += w * self.Y[tuple(i + c for i, c in zip(lo_idx, corner))]
        return out


def _sweep(Zs, nodes, origin, order, settings, m):
    shape = tuple(len(nd) for nd in nodes)
    p = len(nodes)
    Y = np.full(shape + (m, m), np.nan)
    Y[origin] = np.eye(m)
    done: list[int] = []
    for a in order:
        ranges = [range(shape[d]) if d in done else [origin[d]] for d in range(p)]
        for start in itertools.product(*ranges):
            base = np.array([nodes[d][start[d]] for d in range(p)])

            def Z_line(v, a=a, base=base):
                sv = base.copy()
                sv[a] = v
                return Zs[a](sv)

            for direction in (1, -1):
                idx = list(start)
                cur = Y[tuple(idx)].copy()
                while 0 <= idx[a] + direction < shape[a]:
                    sa = nodes[a][idx[a]]
                    idx[a] += direction
                    sb = nodes[a][idx[a]]
                    cur, _ = transport_segment(Z_line, sa, sb, cur, settings)
                    Y[tuple(idx)] = cur
        done.append(a)
    return Y


def multiparam_transport(Zs: Sequence[Callable[[np.ndarray], np.ndarray]], s0, axes,
                         settings: OdeSettings = OdeSettings()) -> MultiTransportResult:
    """Solve dY/ds^a = Z_a(s) Y, Y(s0) = I on a rectangular grid by axis sweeps.

    ``axes`` holds one :class:`Axis` or 1-D node array per parameter.  The
    table is built sweeping axes in ascending order and again in descending
    order; the max Frobenius distance between the two is the path-dependence
    discrepancy, which vanishes (up to truncation error) iff the system is
    integrable.
    """
    nodes = tuple(axis_nodes(ax) for ax in axes)
    p = len(nodes)
    if len(Zs) != p:
        raise ValueError(f"{len(Zs)} coefficient fields for {p} parameters")
    s0 = np.atleast_1d(np.asarray(s0, dtype=float))
    if s0.shape[0] != p:
        raise ValueError("base parameter has wrong length")
    origin = tuple(node_index(nd, v) for nd, v in zip(nodes, s0))
    m = _eval_z(Zs[0], s0).shape[0]
    Y = _sweep(Zs, nodes, origin, list(range(p)), settings, m)
    if p == 1:
        Y_rev = Y.copy()
    else:
        Y_rev = _sweep(Zs, nodes, origin, list(reversed(range(p))), settings, m)
    diff = np.linalg.norm((Y - Y_rev).reshape(-1, m * m), axis=1)
    return MultiTransportResult(nodes, origin, Y, Y_rev, float(np.max(diff)))


def continue_transport(Zs, s_from, s_to, Y_from: np.ndarray, settings: OdeSettings) -> np.ndarray:
    """Carry Y from ``s_from`` to ``s_to`` along coordinate lines, ascending axis order."""
    cur = np.array(s_from, dtype=float)
    Y = Y_from.copy()
    for a in range(len(cur)):
        if s_to[a] == cur[a]:
            continue
        base = cur.copy()

        def Z_line(v, a=a, base=base):
            sv = base.copy()
            sv[a] = v
            return Zs[a](sv)

        Y, _ = transport_segment(Z_line, cur[a], float(s_to[a]), Y, settings)
        cur[a] = s_to[a]
    return Y


@dataclass
class CurveResult:
    s: np.ndarray
    points: np.ndarray
    truncated: bool = False


def _rk4_autonomous(f, x, h):
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integral_curve(X: Callable[[np.ndarray], np.ndarray], x0, length: float,
                   settings: OdeSettings = OdeSettings(), domain: Box | None = None,
                   steps: int | None = None) -> CurveResult:
    """Sample the integral curve of ``X`` through ``x0`` for s in [0, length].

    If a stage or sample leaves ``domain`` the result stops at the last good
    sample and ``truncated`` is set.
    """
    x = np.asarray(x0, dtype=float)
    if domain is not None:
        domain.require(x, "curve start outside chart domain")
    if steps is not None:
        n = steps if length != 0 else 0
    else:
        n = settings.substeps(length) if length != 0 else 0
    h = length / n if n else 0.0
    pts = [x.copy()]

    def f(y):
        if domain is not None and not domain.contains(y):
            raise DomainBoundaryError(y, "integral curve left the domain")
        return np.asarray(X(y), dtype=float)

    truncated = False
    for _ in range(n):
        try:
            x = _rk4_autonomous(f, x, h)
            if domain is not None:
                domain.require(x, "integral curve left the domain")
        except DomainBoundaryError:
            truncated = True
            break
        pts.append(x.copy())
    s = h * np.arange(len(pts))
    if not truncated and n:
        s[-1] = length
    return CurveResult(s, np.array(pts), truncated)
