"""Integrability obstruction along a parametrized map, curvature, and self-intersection partitioning."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .calculus import Axis, partial
from .core import DEFAULT_H, ConnectionField, ScalarField, _as_scalar_field
from .errors import AdaptedCoordinatesRequired

OBSTRUCTION_TOL = 1e-6


@dataclass(frozen=True)
class Grid:
    """Rectangular sample grid over the parameter box J^p.

    ``tangential[a]`` is the chart axis that parameter ``a`` runs along in
    adapted coordinates; the remaining chart axes are transverse, in
    ascending order, held at base values ``t0`` (zeros when omitted).
    """

    axes: tuple[Axis, ...]
    dim: int
    tangential: tuple[int, ...] = ()
    t0: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        tang = tuple(self.tangential) or tuple(range(len(self.axes)))
        object.__setattr__(self, "tangential", tang)
        t0 = tuple(float(v) for v in self.t0) or (0.0,) * (self.dim - len(tang))
        object.__setattr__(self, "t0", t0)
        if len(tang) != len(self.axes):
            raise ValueError("one tangential chart axis per parameter is required")
        if len(self.axes) > self.dim:
            raise ValueError(f"p = {len(self.axes)} exceeds chart dimension {self.dim}")
        if len(set(tang)) != len(tang) or not all(0 <= a < self.dim for a in tang):
            raise ValueError(f"tangential axes {tang} are not distinct chart axes")
        if len(self.t0) != self.dim - len(tang):
            raise ValueError(f"need {self.dim - len(tang)} transverse base values, got {len(self.t0)}")

    @property
    def p(self) -> int:
        return len(self.axes)

    @property
    def transverse(self) -> tuple[int, ...]:
        return tuple(a for a in range(self.dim) if a not in self.tangential)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(ax.count for ax in self.axes)

    @property
    def spacing(self) -> np.ndarray:
        return np.array([ax.spacing for ax in self.axes])

    def indices(self):
        return itertools.product(*(range(c) for c in self.shape))

    def param(self, index) -> np.ndarray:
        return np.array([ax.nodes[i] for ax, i in zip(self.axes, index)])

    def params(self) -> np.ndarray:
        return np.array([self.param(idx) for idx in self.indices()]).reshape(-1, self.p)

    def embed(self, s) -> np.ndarray:
        """Adapted embedding s -> (s, t0) with the declared axis roles."""
        x = np.empty(self.dim)
        x[list(self.tangential)] = s
        if self.transverse:
            x[list(self.transverse)] = self.t0
        return x

    def center_index(self) -> tuple[int, ...]:
        return tuple((c - 1) // 2 for c in self.shape)


class ParamMap:
    """A C^1 map gamma: J^p -> M sampled on ``grid``.

    ``ParamMap.adapted(grid)`` builds the map s -> (s, t0).  A general map is
    given by n component fields of the parameters (callables or expressions in
    ``names``).
    """

    def __init__(self, grid: Grid, components: Sequence | None = None, adapted: bool = False, names=None):
        self.grid = grid
        self.adapted = adapted
        if components is None:
            if not adapted:
                raise ValueError("a non-adapted map needs component fields")
            self.components = tuple(
                ScalarField(lambda s, a=a: grid.embed(s)[a], f"adapted[{a}]") for a in range(grid.dim)
            )
        else:
            if len(components) != grid.dim:
                raise ValueError(f"map needs {grid.dim} components, got {len(components)}")
            self.components = tuple(_as_scalar_field(c, names) for c in components)
        if adapted and components is not None:
            for idx in grid.indices():
                s = grid.param(idx)
                if np.max(np.abs(self._eval(s) - grid.embed(s))) > 1e-12:
                    raise ValueError(f"map flagged adapted but gamma({s}) != (s, t0)")

    @classmethod
    def adapted_map(cls, grid: Grid) -> "ParamMap":
        return cls(grid, adapted=True)

    @property
    def p(self) -> int:
        return self.grid.p

    def _eval(self, s) -> np.ndarray:
        return np.array([c(s) for c in self.components])

    def point(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if self.adapted:
            return self.grid.embed(s)
        return self._eval(s)

    def points(self) -> np.ndarray:
        return np.array([self.point(self.grid.param(idx)) for idx in self.grid.indices()])


@dataclass
class ObstructionReport:
    params: np.ndarray  # (N, p) parameter values, nodes in C order
    points: np.ndarray  # (N, n)
    R: np.ndarray  # (N, p, p, n, n)
    max_norm: float
    tolerance: float
    worst: tuple = ()

    @property
    def passed(self) -> bool:
        return self.max_norm < self.tolerance

    def norms(self) -> np.ndarray:
        """Frobenius norm per node and index pair, shape (N, p, p)."""
        return np.linalg.norm(self.R, axis=(-2, -1))

    def summary(self) -> dict:
        return {
            "max_norm": self.max_norm,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "nodes": int(self.params.shape[0]),
            "worst_node": list(map(float, self.worst[0])) if self.worst else None,
            "worst_pair": list(self.worst[1]) if self.worst else None,
        }


def _max_report(params, points, R, tol) -> ObstructionReport:
    norms = np.linalg.norm(R, axis=(-2, -1)) if R.size else np.zeros((len(params), 0, 0))
    if norms.size == 0 or not np.any(norms):
        return ObstructionReport(params, points, R, 0.0, tol)
    flat = int(np.argmax(norms))
    node, a, b = np.unravel_index(flat, norms.shape)
    return ObstructionReport(params, points, R, float(norms[node, a, b]), tol,
                             (params[node], (int(a) + 1, int(b) + 1)))


def obstruction_matrices(conn: ConnectionField, pmap: ParamMap, h: float = DEFAULT_H,
                         tol: float = OBSTRUCTION_TOL) -> ObstructionReport:
    """R_ab(s) = d_a(Gamma_b o gamma) - d_b(Gamma_a o gamma) + [Gamma_a, Gamma_b] at every grid node.

    Derivatives are central differences of the composite on the parameter
    grid.  The map must be adapted, so Gamma_a is the connection matrix along
    the chart axis of parameter a.
    """
    if not pmap.adapted:
        raise AdaptedCoordinatesRequired(
            "obstruction needs adapted coordinates; transform the connection first"
        )
    grid = pmap.grid
    n, p = conn.dim, grid.p
    params = grid.params()
    points = np.array([pmap.point(s) for s in params])
    R = np.zeros((len(params), p, p, n, n))
    if p < 2:
        return _max_report(params, points, R, tol)
    tang = list(grid.tangential)

    def tangential_gammas(s):
        return conn.matrices(pmap.point(s))[tang]

    for node, s in enumerate(params):
        G = tangential_gammas(s)
        # D[b] = d_b (Gamma_a o gamma), stacked over a
        D = [partial(tangential_gammas, s, b, h) for b in range(p)]
        for a in range(p):
            for b in range(a + 1, p):
                Rab = D[a][b] - D[b][a] + G[a] @ G[b] - G[b] @ G[a]
                R[node, a, b] = Rab
                R[node, b, a] = -Rab
    return _max_report(params, points, R, tol)


def curvature_matrices(conn: ConnectionField, x, h: float = DEFAULT_H) -> np.ndarray:
    """R[k, l] = d_k Gamma_l - d_l Gamma_k + Gamma_k Gamma_l - Gamma_l Gamma_k."""
    x = np.asarray(x, dtype=float)
    n = conn.dim
    G = conn.matrices(x)
    D = [partial(conn.matrices, x, k, h, conn.domain) for k in range(n)]
    R = np.zeros((n, n, n, n))
    for k in range(n):
        for l in range(k + 1, n):
            Rkl = D[k][l] - D[l][k] + G[k] @ G[l] - G[l] @ G[k]
            R[k, l] = Rkl
            R[l, k] = -Rkl
    return R


@dataclass
class PatchPartition:
    """Axis-aligned sub-boxes of the grid (index ranges, stop exclusive)."""

    patches: list[tuple[tuple[int, int], ...]]
    crossings: list[dict] = field(default_factory=list)
    pathological: bool = False
    note: str = "grid-resolution approximation of the maximal injectivity neighbourhoods"

    def patch_of(self, index) -> int:
        """Lowest-numbered patch containing the node."""
        for r, box in enumerate(self.patches):
            if all(lo <= i < hi for i, (lo, hi) in zip(index, box)):
                return r
        raise IndexError(f"node {index} is not covered")

    def summary(self) -> dict:
        return {
            "patches": [[list(b) for b in box] for box in self.patches],
            "crossings": self.crossings,
            "pathological": self.pathological,
            "note": self.note,
        }


def detect_crossings(pmap: ParamMap, eps_x: float | None = None, eps_s: float | None = None) -> PatchPartition:
    """Flag node pairs whose images nearly coincide although their parameters differ.

    A pair is flagged when |gamma(s1) - gamma(s2)| <= eps_x and |s1 - s2| >
    eps_s.  Defaults: eps_x = 1e-6 x diameter of the sampled image, eps_s = 3
    grid steps.  Cuts are then placed greedily (mid-way between the pair along
    the axis where they are furthest apart) until no flagged pair shares a
    sub-box.  Detection only sees what the grid resolves.
    """
    grid = pmap.grid
    shape = grid.shape
    idx_list = list(grid.indices())
    params = np.array([grid.param(i) for i in idx_list])
    points = np.array([pmap.point(s) for s in params])
    if eps_x is None:
        diam = float(np.linalg.norm(points.max(axis=0) - points.min(axis=0)))
        eps_x = 1e-6 * diam
    if eps_s is None:
        eps_s = 3.0 * float(np.max(grid.spacing))
    pairs = sorted(cKDTree(points).query_pairs(eps_x))
    flagged = []
    for i, j in pairs:
        if np.linalg.norm(params[i] - params[j]) > eps_s:
            flagged.append((i, j))

    cuts: list[set[int]] = [set() for _ in shape]  # cut c separates index c from c + 1

    def separated(a, b) -> bool:
        for d in range(len(shape)):
            lo, hi = sorted((a[d], b[d]))
            if any(lo <= c < hi for c in cuts[d]):
                return True
        return False

    by_span = sorted(flagged, key=lambda ij: max(abs(x - y) for x, y in zip(idx_list[ij[0]], idx_list[ij[1]])))
    for i, j in by_span:
        a, b = idx_list[i], idx_list[j]
        if separated(a, b):
            continue
        d = max(range(len(shape)), key=lambda k: abs(a[k] - b[k]))
        lo, hi = sorted((a[d], b[d]))
        cuts[d].add((lo + hi - 1) // 2)

    ranges_per_axis = []
    for d, count in enumerate(shape):
        edges = [0] + [c + 1 for c in sorted(cuts[d])] + [count]
        ranges_per_axis.append([(edges[k], edges[k + 1]) for k in range(len(edges) - 1)])
    patches = [tuple(box) for box in itertools.product(*ranges_per_axis)]
    crossings = [
        {
            "s1": params[i].tolist(),
            "s2": params[j].tolist(),
            "distance": float(np.linalg.norm(points[i] - points[j])),
        }
        for i, j in flagged
    ]
    thin = any(hi - lo < 2 for box in patches for lo, hi in box)
    pathological = len(flagged) > len(idx_list) or (thin and bool(flagged))
    return PatchPartition(patches, crossings, pathological)
