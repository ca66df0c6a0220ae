"""Construction and verification of frames in which a connection (or derivation) has vanishing components.

Three constructions are provided:

* :func:`build_frame_at_point` -- first-order frame around one point;
* :func:`build_frame_along_map` -- frame in a neighbourhood of gamma(J^p) for an
  adapted map, A = (I - sum_l Gamma_l(gamma(s)) (x^l - t0^l)) Y(s) B0 with the
  quadratic remainder set to zero;
* :func:`build_frame_fixed_field` -- frame along an integral curve of a fixed
  vector field, A(s) = Y(s, s0; -W_X o gamma) B.

Verification (:func:`verify_vanishing`) re-differentiates the frame evaluator
with central differences and never reads the transport tables directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .calculus import (
    MultiTransportResult,
    OdeSettings,
    continue_transport,
    integral_curve,
    multiparam_transport,
    partial,
    solve_linear_transport,
)
from .core import (
    DEFAULT_H,
    ConnectionField,
    SDerivationAlongX,
    check_invertible,
    commutation_coefficients,
    frame_tensor_components,
    torsion_components,
)
from .errors import AdaptedCoordinatesRequired, DomainBoundaryError, ObstructionFailed
from .obstruction import OBSTRUCTION_TOL, ParamMap, PatchPartition, detect_crossings, obstruction_matrices

RESIDUAL_TOL = 1e-5


class PointFrame:
    """A(x) = (I - sum_k Gamma_k(x0) (x^k - x0^k)) B0."""

    def __init__(self, conn: ConnectionField, x0, B0):
        self.x0 = np.asarray(x0, dtype=float)
        self.B0 = np.asarray(B0, dtype=float)
        check_invertible(self.B0)
        self.G0 = conn.matrices(self.x0)
        self.domain = conn.domain

    def __call__(self, x) -> np.ndarray:
        dx = np.asarray(x, dtype=float) - self.x0
        n = self.B0.shape[0]
        return (np.eye(n) - np.einsum("kij,k->ij", self.G0, dx)) @ self.B0


def build_frame_at_point(conn: ConnectionField, x0, B0=None) -> PointFrame:
    B0 = np.eye(conn.dim) if B0 is None else B0
    return PointFrame(conn, x0, B0)


@dataclass
class _Patch:
    box: tuple[tuple[int, int], ...]
    nodes: tuple[np.ndarray, ...]
    transport: MultiTransportResult


class MapFrame:
    """Frame along an adapted map, evaluable in a first-order tube around gamma(J^p)."""

    def __init__(self, conn: ConnectionField, pmap: ParamMap, B0, settings: OdeSettings,
                 partition: PatchPartition, s0=None):
        self.conn = conn
        self.pmap = pmap
        self.grid = pmap.grid
        self.B0 = np.asarray(B0, dtype=float)
        check_invertible(self.B0)
        self.settings = settings
        self.partition = partition
        self.domain = conn.domain
        tang = list(self.grid.tangential)
        self._tang = tang
        self._trans = list(self.grid.transverse)
        self.Zs = [
            (lambda s, a=a: -conn.matrices(self.grid.embed(s))[tang[a]]) for a in range(self.grid.p)
        ]
        all_nodes = [ax.nodes for ax in self.grid.axes]
        self.patches: list[_Patch] = []
        for box in partition.patches:
            nodes = tuple(all_nodes[d][lo:hi] for d, (lo, hi) in enumerate(box))
            if s0 is not None and len(partition.patches) == 1:
                base = np.atleast_1d(np.asarray(s0, dtype=float))
            else:
                base = np.array([nd[(len(nd) - 1) // 2] for nd in nodes])
            self.patches.append(_Patch(box, nodes, multiparam_transport(self.Zs, base, nodes, settings)))
        first = self.patches[0].transport
        self.s0 = np.array([nd[i] for nd, i in zip(first.nodes, first.origin)])

    @property
    def discontinuous(self) -> bool:
        """True when patches were glued; the frame may jump across patch boundaries."""
        return len(self.patches) > 1

    @property
    def discrepancy(self) -> float:
        return max(p.transport.discrepancy for p in self.patches)

    def _locate(self, s):
        idx = tuple(ax.nearest(v) for ax, v in zip(self.grid.axes, s))
        patch = self.patches[self.partition.patch_of(idx)]
        local = tuple(min(max(i - lo, 0), hi - lo - 1) for i, (lo, hi) in zip(idx, patch.box))
        return patch, local

    def Y(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        patch, local = self._locate(s)
        node = np.array([nd[i] for nd, i in zip(patch.nodes, local)])
        Y_node = patch.transport.Y[local]
        if np.array_equal(node, s):
            return Y_node.copy()
        return continue_transport(self.Zs, node, s, Y_node, self.settings)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        s = x[self._tang]
        n = self.grid.dim
        corr = np.eye(n)
        if self._trans:
            G = self.conn.matrices(self.grid.embed(s))
            dt = x[self._trans] - np.asarray(self.grid.t0)
            for lam, d in zip(self._trans, dt):
                corr -= G[lam] * d
        return corr @ self.Y(s) @ self.B0


def build_frame_along_map(conn: ConnectionField, pmap: ParamMap, B0=None,
                          settings: OdeSettings = OdeSettings(), h: float = DEFAULT_H,
                          tol: float = OBSTRUCTION_TOL, s0=None,
                          partition: PatchPartition | None = None) -> MapFrame:
    """Build the frame along ``pmap``; refuses with :class:`ObstructionFailed` if R_ab != 0."""
    if not pmap.adapted:
        raise AdaptedCoordinatesRequired(
            "frame construction needs an adapted map s -> (s, t0); transform the connection first"
        )
    B0 = np.eye(conn.dim) if B0 is None else np.asarray(B0, dtype=float)
    check_invertible(B0)
    report = obstruction_matrices(conn, pmap, h, tol)
    if not report.passed:
        raise ObstructionFailed(report)
    if partition is None:
        partition = detect_crossings(pmap)
    frame = MapFrame(conn, pmap, B0, settings, partition, s0)
    frame.obstruction = report
    return frame


class FixedFieldFrame:
    """Frame along one integral curve of X, known at curve samples."""

    def __init__(self, d: SDerivationAlongX, curve, transport, B, settings: OdeSettings, h: float):
        self.d = d
        self.curve = curve
        self.transport = transport
        self.B = np.asarray(B, dtype=float)
        self.settings = settings
        self.h = h
        self.s = transport.s
        self.points = curve.points[::2][: len(self.s)]
        self.values = transport.Y @ self.B

    @property
    def truncated(self) -> bool:
        return self.curve.truncated

    def _rhs(self, x, Y):
        return self.d.X(x), -self.d.coordinate_W(x, self.h) @ Y

    def at_parameter(self, s: float):
        """(gamma(s), A(s)), continuing the joint curve/frame ODE from the nearest sample."""
        i = int(np.argmin(np.abs(self.s - s)))
        x = self.points[i].copy()
        Y = self.transport.Y[i].copy()
        length = s - self.s[i]
        if length != 0.0:
            n = self.settings.substeps(length)
            dt = length / n
            for _ in range(n):
                k1x, k1y = self._rhs(x, Y)
                k2x, k2y = self._rhs(x + 0.5 * dt * k1x, Y + 0.5 * dt * k1y)
                k3x, k3y = self._rhs(x + 0.5 * dt * k2x, Y + 0.5 * dt * k2y)
                k4x, k4y = self._rhs(x + dt * k3x, Y + dt * k3y)
                x = x + (dt / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
                Y = Y + (dt / 6.0) * (k1y + 2 * k2y + 2 * k3y + k4y)
        return x, Y @ self.B


def build_frame_fixed_field(d: SDerivationAlongX, x0, span: float, B=None,
                            settings: OdeSettings = OdeSettings(), h: float = DEFAULT_H) -> FixedFieldFrame:
    """Frame along the integral curve of d.X through x0, s in [0, span].

    The curve is sampled at half the transport step so every RK4 stage of the
    transport lands on a curve sample.  A truncated curve (left the domain)
    yields a frame on the part that was integrated; check ``truncated``.
    """
    n = d.dim
    B = np.eye(n) if B is None else np.asarray(B, dtype=float)
    check_invertible(B)
    steps = settings.substeps(span)
    dt = span / steps
    curve = integral_curve(d.X, x0, span, settings, domain=d.domain, steps=2 * steps)
    usable = (len(curve.points) - 1) // 2
    if usable == 0:
        raise DomainBoundaryError(x0, "integral curve leaves the domain immediately")
    half = dt / 2

    def Z(s):
        return -d.coordinate_W(curve.points[int(round(s / half))], h)

    transport = solve_linear_transport(Z, 0.0, usable * dt, settings, steps=usable)
    return FixedFieldFrame(d, curve, transport, B, settings, h)


@dataclass
class ResidualReport:
    points: np.ndarray  # (N, n)
    M: np.ndarray  # (N, K, n, n) residual matrices
    tolerance: float = RESIDUAL_TOL
    kind: str = "connection"
    norms: np.ndarray = field(init=False)
    max_norm: float = field(init=False)

    def __post_init__(self):
        self.norms = np.linalg.norm(self.M, axis=(-2, -1))
        self.max_norm = float(self.norms.max()) if self.norms.size else 0.0

    @property
    def passed(self) -> bool:
        return self.max_norm < self.tolerance

    def summary(self) -> dict:
        worst = int(np.unravel_index(np.argmax(self.norms), self.norms.shape)[0]) if self.norms.size else None
        return {
            "kind": self.kind,
            "max_norm": self.max_norm,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "nodes": int(self.points.shape[0]),
            "worst_point": None if worst is None else self.points[worst].tolist(),
        }


def _target_points(target) -> np.ndarray:
    if isinstance(target, ParamMap):
        return target.points()
    return np.atleast_2d(np.asarray(target, dtype=float))


def verify_vanishing(source, frame, target=None, h: float = DEFAULT_H, tol: float = RESIDUAL_TOL) -> ResidualReport:
    """Residual of the vanishing-component condition at the target nodes.

    Connection case: M_k = Gamma_k A + d_k A for every chart direction k, with
    d_k A from central differences of ``frame``.  Fixed-field case (``frame``
    from :func:`build_frame_fixed_field`): W' = A^{-1}(W_X A + X(A)) at every
    curve sample, X(A) = dA/ds differentiated along the curve.
    """
    if isinstance(frame, FixedFieldFrame):
        return _verify_fixed_field(source, frame, h, tol)
    conn: ConnectionField = source
    if target is None:
        target = getattr(frame, "pmap", None)
        if target is None:
            target = [frame.x0]
    points = _target_points(target)
    n = conn.dim
    M = np.empty((len(points), n, n, n))
    for i, x in enumerate(points):
        A = frame(x)
        check_invertible(A, x)
        G = conn.matrices(x)
        for k in range(n):
            M[i, k] = G[k] @ A + partial(frame, x, k, h, conn.domain)
    return ResidualReport(points, M, tol)


def _verify_fixed_field(d: SDerivationAlongX, frame: FixedFieldFrame, h: float, tol: float) -> ResidualReport:
    n = d.dim
    M = np.empty((len(frame.s), 1, n, n))
    for i, s in enumerate(frame.s):
        x, A = frame.at_parameter(s)
        check_invertible(A, x)
        _, Ap = frame.at_parameter(s + h)
        _, Am = frame.at_parameter(s - h)
        XofA = (Ap - Am) / (2.0 * h)
        W = d.coordinate_W(x, h)
        M[i, 0] = np.linalg.solve(A, W @ A + XofA)
    return ResidualReport(frame.points, M, tol, kind="fixed-field")


@dataclass
class HolonomicityReport:
    points: np.ndarray
    commutators: np.ndarray  # (N, n, n, n) C[k', i', j']
    torsion: np.ndarray  # (N, n, n, n) frame components of the torsion
    tolerance: float

    @property
    def commutator_norms(self) -> np.ndarray:
        return np.linalg.norm(self.commutators.reshape(len(self.points), -1), axis=1)

    @property
    def torsion_norms(self) -> np.ndarray:
        return np.linalg.norm(self.torsion.reshape(len(self.points), -1), axis=1)

    @property
    def identity_residual(self) -> float:
        """max |T'(E_i', E_j') + [E_i', E_j']| over nodes."""
        d = (self.torsion + self.commutators).reshape(len(self.points), -1)
        return float(np.max(np.abs(d)))

    @property
    def holonomic(self) -> bool:
        return bool(self.commutator_norms.max() < self.tolerance and self.torsion_norms.max() < self.tolerance)

    @property
    def verdict(self) -> str:
        return "holonomic-on-U" if self.holonomic else "anholonomic"

    def summary(self) -> dict:
        return {
            "verdict": self.verdict,
            "commutator_max": float(self.commutator_norms.max()),
            "commutator_min": float(self.commutator_norms.min()),
            "torsion_max": float(self.torsion_norms.max()),
            "identity_residual": self.identity_residual,
            "identity_holds": self.identity_residual < self.tolerance,
            "tolerance": self.tolerance,
        }


def check_holonomic(frame, target, conn: ConnectionField, h: float = DEFAULT_H,
                    tol: float = RESIDUAL_TOL) -> HolonomicityReport:
    """Commutators of the frame and torsion of ``conn`` in that frame, on the target nodes."""
    points = _target_points(target)
    n = conn.dim
    C = np.empty((len(points), n, n, n))
    T = np.empty_like(C)
    for i, x in enumerate(points):
        C[i] = commutation_coefficients(frame, x, h)
        T[i] = frame_tensor_components(torsion_components(conn, None, x), frame(x))
    return HolonomicityReport(points, C, T, tol)


@dataclass
class UniquenessReport:
    points: np.ndarray
    norms: np.ndarray  # (N, n) Frobenius norm of d_k(A^{-1} B)
    max_norm: float

    def summary(self) -> dict:
        return {"max_norm": self.max_norm, "nodes": int(self.points.shape[0])}


def check_uniqueness(frame_a, frame_b, target, h: float = DEFAULT_H, domain=None) -> UniquenessReport:
    """Max over nodes and directions of |d_k(A^{-1} B)|; ~0 when both frames are special."""
    points = _target_points(target)

    def transition(x):
        A = frame_a(x)
        check_invertible(A, x)
        return np.linalg.solve(A, frame_b(x))

    n = points.shape[1]
    norms = np.empty((len(points), n))
    for i, x in enumerate(points):
        for k in range(n):
            norms[i, k] = np.linalg.norm(partial(transition, x, k, h, domain))
    return UniquenessReport(points, norms, float(norms.max()))
