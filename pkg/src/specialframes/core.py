"""Chart-level data model and pointwise component algebra.

Index conventions (fixed for the whole package):

* connection matrices ``G = conn.matrices(x)`` have shape ``(n, n, n)`` with
  ``G[k, i, j] = Gamma^i_{jk}``; the last lower index of Gamma is the
  differentiation direction, so ``nabla_X E_j = Gamma^i_{jk} X^k E_i``;
* frames are matrices ``A[i, i']`` whose columns are the new basis vectors
  expressed in the coordinate frame, ``E_{i'} = A[i, i'] d_i``;
* rank-3 arrays with one upper and two lower indices are stored upper index
  first: ``C[k, i, j] = C^k_{ij}`` with ``[E_i, E_j] = C^k_{ij} E_k``, and
  ``T[i, k, l] = T^i_{kl}``.

Derivatives of fields are central differences with step ``h``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import fieldexpr
from .calculus import partial
from .domain import Box, as_point
from .errors import SingularFrameError

SINGULAR_DET = 1e-12
DEFAULT_H = 1e-4


@dataclass(frozen=True)
class ScalarField:
    """A real function of chart (or parameter) coordinates."""

    evaluator: Callable[[np.ndarray], float]
    descriptor: str = "<callable>"

    def __call__(self, x) -> float:
        return float(self.evaluator(x))

    @classmethod
    def from_expr(cls, text: str, names: Sequence[str]) -> "ScalarField":
        expr = fieldexpr.parse(text, names)
        return cls(expr, text)

    @classmethod
    def constant(cls, value: float) -> "ScalarField":
        value = float(value)
        return cls(lambda x: value, repr(value))


def _as_scalar_field(f, names=None) -> ScalarField:
    if isinstance(f, ScalarField):
        return f
    if isinstance(f, str):
        if names is None:
            raise ValueError("expression fields need variable names")
        return ScalarField.from_expr(f, names)
    if isinstance(f, (int, float)):
        return ScalarField.constant(f)
    return ScalarField(f)


class VectorField:
    """X = X^k d_k given by n scalar component fields."""

    def __init__(self, components: Sequence, domain: Box | None = None, names=None):
        self.components = tuple(_as_scalar_field(c, names) for c in components)
        if not self.components:
            raise ValueError("vector field needs at least one component")
        self.domain = domain or Box.unbounded(len(self.components))
        if self.domain.dim != self.dim:
            raise ValueError("domain dimension differs from component count")

    @property
    def dim(self) -> int:
        return len(self.components)

    def __call__(self, x) -> np.ndarray:
        x = as_point(x, self.dim)
        return np.array([c(x) for c in self.components])

    def jacobian(self, x, h: float = DEFAULT_H) -> np.ndarray:
        """J[i, j] = d_j X^i by central differences."""
        x = as_point(x, self.dim)
        cols = [partial(self, x, j, h, self.domain) for j in range(self.dim)]
        return np.stack(cols, axis=1)


class ConnectionField:
    """Connection coefficients Gamma^i_{jk} on one chart.

    Either ``gamma`` (nested ``[i][j][k]`` table of scalar fields or
    expression strings) or ``matrices`` (a callable returning the
    ``(n, n, n)`` array ``G[k, i, j]``) must be supplied.
    """

    def __init__(self, dim: int, gamma=None, *, matrices=None, domain: Box | None = None,
                 names=None, name: str = ""):
        if (gamma is None) == (matrices is None):
            raise ValueError("give exactly one of gamma table or matrices callable")
        self.dim = dim
        self.domain = domain or Box.unbounded(dim)
        self.name = name
        if gamma is not None:
            table = [[[_as_scalar_field(gamma[i][j][k], names) for k in range(dim)]
                      for j in range(dim)] for i in range(dim)]
            self._gamma = table

            def _matrices(x):
                G = np.empty((dim, dim, dim))
                for i in range(dim):
                    for j in range(dim):
                        for k in range(dim):
                            G[k, i, j] = table[i][j][k](x)
                return G

            self._matrices = _matrices
        else:
            self._gamma = None
            self._matrices = matrices

    def matrices(self, x) -> np.ndarray:
        x = as_point(x, self.dim)
        self.domain.require(x)
        return np.asarray(self._matrices(x), dtype=float)

    def gamma_k(self, x, k: int) -> np.ndarray:
        return self.matrices(x)[k]

    def component(self, i: int, j: int, k: int) -> ScalarField:
        if self._gamma is not None:
            return self._gamma[i][j][k]
        return ScalarField(lambda x: self.matrices(x)[k, i, j], f"{self.name}[{i}][{j}][{k}]")

    @classmethod
    def zero(cls, dim: int, domain: Box | None = None) -> "ConnectionField":
        return cls(dim, matrices=lambda x: np.zeros((dim, dim, dim)), domain=domain, name="zero")


class SDerivationAlongX:
    """D_X = L_X + S_X, or a derivation given directly by its coordinate components W_X.

    Exactly one of ``S`` and ``W`` is set; both are callables x -> (n, n).
    """

    def __init__(self, X: VectorField, S=None, W=None, name: str = ""):
        if (S is None) == (W is None):
            raise ValueError("give exactly one of S (tensor form) or W (direct components)")
        self.X = X
        self.S = S
        self.W = W
        self.name = name

    @property
    def dim(self) -> int:
        return self.X.dim

    @property
    def domain(self) -> Box:
        return self.X.domain

    @classmethod
    def from_connection(cls, conn: ConnectionField, X: VectorField) -> "SDerivationAlongX":
        return cls(X, W=lambda x: connection_WX(conn, X, x), name=f"nabla_X[{conn.name}]")

    def coordinate_W(self, x, h: float = DEFAULT_H) -> np.ndarray:
        x = as_point(x, self.dim)
        if self.W is not None:
            return np.asarray(self.W(x), dtype=float)
        return np.asarray(self.S(x), dtype=float) - self.X.jacobian(x, h)


class FrameSpec:
    """A frame given by its matrix field A(x) relative to the coordinate frame."""

    def __init__(self, A: Callable[[np.ndarray], np.ndarray], domain: Box | None = None, name: str = ""):
        self.A = A
        self.domain = domain
        self.name = name

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.domain is not None:
            self.domain.require(x)
        A = np.asarray(self.A(x), dtype=float)
        check_invertible(A, x)
        return A

    def derivatives(self, x, h: float = DEFAULT_H) -> np.ndarray:
        """dA[k] = d_k A at x."""
        x = np.asarray(x, dtype=float)
        return np.stack([partial(self, x, k, h, self.domain) for k in range(x.shape[0])])


def check_invertible(A: np.ndarray, x=None) -> float:
    det = float(np.linalg.det(A))
    if not abs(det) > SINGULAR_DET:
        raise SingularFrameError(det, x)
    return det


def _as_frame(frame) -> FrameSpec | None:
    if frame is None or isinstance(frame, FrameSpec):
        return frame
    return FrameSpec(frame)


def connection_WX(conn: ConnectionField, X, x) -> np.ndarray:
    """W_X(x) = Gamma_k(x) X^k(x)."""
    x = as_point(x, conn.dim)
    Xv = X(x) if callable(X) else np.asarray(X, dtype=float)
    return np.einsum("kij,k->ij", conn.matrices(x), Xv)


def transform_components(W: np.ndarray, A: np.ndarray, XofA: np.ndarray) -> np.ndarray:
    """W' = A^{-1} (W A + X(A))."""
    check_invertible(A)
    return np.linalg.solve(A, W @ A + XofA)


def commutation_coefficients(frame, x, h: float = DEFAULT_H) -> np.ndarray:
    """C[k', i', j'] with [E_{i'}, E_{j'}] = C^{k'}_{i'j'} E_{k'}."""
    frame = _as_frame(frame)
    x = np.asarray(x, dtype=float)
    A = frame(x)
    dA = frame.derivatives(x, h)
    n = A.shape[0]
    # U[k, i', j'] = E_{i'}(A^k_{j'}) = A^m_{i'} d_m A^k_{j'}
    U = np.einsum("mi,mkj->kij", A, dA)
    C = np.zeros((n, n, n))
    for a in range(n):
        for b in range(a + 1, n):
            C[:, a, b] = np.linalg.solve(A, U[:, a, b] - U[:, b, a])
            C[:, b, a] = -C[:, a, b]
    return C


def assemble_WX(d: SDerivationAlongX, frame, x, h: float = DEFAULT_H) -> np.ndarray:
    """Components of D_X in ``frame`` (None = coordinate frame) at x.

    Tensor form: W^i_j = S^i_j - E_j(X^i) + C^i_{kj} X^k, with the bracket
    term written so that [X, E_j] = X^k [E_k, E_j] - E_j(X^i) E_i.
    """
    x = as_point(x, d.dim)
    frame = _as_frame(frame)
    if frame is None:
        return d.coordinate_W(x, h)
    A = frame(x)
    if d.W is not None:
        return transform_components(d.coordinate_W(x, h), A, directional_derivative(frame, d.X(x), x, h))
    Ainv = np.linalg.inv(A)
    S_p = Ainv @ np.asarray(d.S(x), dtype=float) @ A

    def X_primed(y):
        return np.linalg.solve(frame(y), d.X(y))

    Xp = X_primed(x)
    # dXp[i', m] = d_m X'^{i'}
    dXp = np.stack([partial(X_primed, x, m, h, frame.domain) for m in range(d.dim)], axis=1)
    EjXi = dXp @ A  # [i', j'] = A^m_{j'} d_m X'^{i'}
    C = commutation_coefficients(frame, x, h)
    bracket = np.einsum("ikj,k->ij", C, Xp)
    return S_p - EjXi + bracket


def directional_derivative(frame, Xv, x, h: float = DEFAULT_H) -> np.ndarray:
    """X(A) = X^k d_k A at x for a coordinate vector Xv."""
    frame = _as_frame(frame)
    dA = frame.derivatives(x, h)
    return np.einsum("k,kij->ij", np.asarray(Xv, dtype=float), dA)


def transform_connection(conn: ConnectionField, frame, x, h: float = DEFAULT_H) -> np.ndarray:
    """Gamma'[k'] = A^k_{k'} A^{-1} (Gamma_k A + d_k A)."""
    frame = _as_frame(frame)
    x = as_point(x, conn.dim)
    A = frame(x)
    G = conn.matrices(x)
    dA = frame.derivatives(x, h)
    inner = np.einsum("kij,jl->kil", G, A) + dA
    M = np.linalg.solve(A[None, :, :], inner)  # A^{-1}(...) per k
    return np.einsum("kp,kij->pij", A, M)


def torsion_components(conn: ConnectionField, C, x) -> np.ndarray:
    """T[i, k, l] = -(Gamma^i_{kl} - Gamma^i_{lk}) - C^i_{kl}.

    ``C`` may be None (coordinate frame).  Antisymmetry in (k, l) is exact.
    """
    G = conn.matrices(x)
    n = conn.dim
    # Gamma^i_{kl} = G[l, i, k]
    Gam = np.transpose(G, (1, 2, 0))
    Cc = np.zeros((n, n, n)) if C is None else np.asarray(C, dtype=float)
    T = np.zeros((n, n, n))
    for k in range(n):
        for l in range(k + 1, n):
            T[:, k, l] = -(Gam[:, k, l] - Gam[:, l, k]) - Cc[:, k, l]
            T[:, l, k] = -T[:, k, l]
    return T


def frame_tensor_components(T: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Components of a (1,2) tensor in the frame A: T'[a, b, c] = A^{-1}[a, i] T[i, j, k] A[j, b] A[k, c]."""
    return np.einsum("ai,ijk,jb,kc->abc", np.linalg.inv(A), T, A, A)
