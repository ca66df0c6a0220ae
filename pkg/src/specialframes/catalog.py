"""Built-in connections and derivations with documented analytic coefficients.

Conventions follow :mod:`specialframes.core`: ``G[k, i, j] = Gamma^i_{jk}``.

flat-cartesian
    Gamma = 0 in Cartesian coordinates (any dimension).
flat-polar
    Euclidean plane in polar coordinates (r, phi):
    Gamma^r_{phi phi} = -r, Gamma^phi_{r phi} = Gamma^phi_{phi r} = 1/r, so
    Gamma_r = [[0, 0], [0, 1/r]] and Gamma_phi = [[0, -r], [1/r, 0]].
unit-sphere
    Levi-Civita connection of a round sphere (theta, phi), radius R:
    Gamma^theta_{phi phi} = -sin(theta)cos(theta),
    Gamma^phi_{theta phi} = Gamma^phi_{phi theta} = cot(theta).  The symbols do
    not depend on R; the radius is accepted for completeness.
flat-with-torsion
    Constant Gamma_1 = [[0, 1], [0, 0]], Gamma_2 = 0 on R^2: zero curvature,
    torsion T^1_{12} = 1.
lie-derivative
    The derivation D_X = L_X (S = 0) along a vector field X on flat R^2,
    default X = (-x2, x1).
"""

from __future__ import annotations

import math

import numpy as np

from .core import ConnectionField, SDerivationAlongX, VectorField
from .domain import Box
from .errors import ScenarioError

CONNECTIONS = ("flat-cartesian", "flat-polar", "unit-sphere", "flat-with-torsion")
DERIVATIONS = ("lie-derivative",)
BUILTINS = CONNECTIONS + DERIVATIONS


def flat_cartesian(dim: int = 2, domain: Box | None = None) -> ConnectionField:
    conn = ConnectionField.zero(dim, domain)
    conn.name = "flat-cartesian"
    return conn


def _polar_matrices(x):
    r = x[0]
    G = np.zeros((2, 2, 2))
    G[0, 1, 1] = 1.0 / r
    G[1, 0, 1] = -r
    G[1, 1, 0] = 1.0 / r
    return G


def flat_polar(domain: Box | None = None) -> ConnectionField:
    domain = domain or Box((1e-3, -np.inf), (np.inf, np.inf))
    return ConnectionField(2, matrices=_polar_matrices, domain=domain, name="flat-polar")


def unit_sphere(radius: float = 1.0, domain: Box | None = None) -> ConnectionField:
    if not radius > 0:
        raise ScenarioError(f"sphere radius must be positive, got {radius}")

    def matrices(x):
        th = x[0]
        s, c = math.sin(th), math.cos(th)
        G = np.zeros((2, 2, 2))
        G[0, 1, 1] = c / s
        G[1, 0, 1] = -s * c
        G[1, 1, 0] = c / s
        return G

    domain = domain or Box((1e-3, -np.inf), (math.pi - 1e-3, np.inf))
    conn = ConnectionField(2, matrices=matrices, domain=domain, name="unit-sphere")
    conn.radius = float(radius)
    return conn


def flat_with_torsion(domain: Box | None = None) -> ConnectionField:
    G = np.zeros((2, 2, 2))
    G[0, 0, 1] = 1.0
    return ConnectionField(2, matrices=lambda x: G.copy(), domain=domain, name="flat-with-torsion")


def lie_derivative(X: VectorField | None = None, domain: Box | None = None) -> SDerivationAlongX:
    if X is None:
        X = VectorField([lambda x: -x[1], lambda x: x[0]], domain=domain)
    n = X.dim
    return SDerivationAlongX(X, S=lambda x: np.zeros((n, n)), name="lie-derivative")


def builtin_connection(name: str, params: dict | None = None, domain: Box | None = None) -> ConnectionField:
    params = dict(params or {})
    if name == "flat-cartesian":
        return flat_cartesian(int(params.pop("dim", domain.dim if domain else 2)), domain)
    if name == "flat-polar":
        return flat_polar(domain)
    if name == "unit-sphere":
        return unit_sphere(float(params.pop("radius", 1.0)), domain)
    if name == "flat-with-torsion":
        return flat_with_torsion(domain)
    raise ScenarioError(f"unknown builtin connection {name!r}; known: {', '.join(CONNECTIONS)}")
