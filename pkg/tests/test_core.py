import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from specialframes import catalog
from specialframes.core import (
    ConnectionField,
    FrameSpec,
    SDerivationAlongX,
    VectorField,
    assemble_WX,
    commutation_coefficients,
    connection_WX,
    torsion_components,
    transform_components,
    transform_connection,
)
from specialframes.domain import Box
from specialframes.errors import DomainBoundaryError, SingularFrameError


def zero_S(n=2):
    return lambda x: np.zeros((n, n))


def polar_cartesian_frame(x):
    r, phi = x
    return np.array([[math.cos(phi), math.sin(phi)], [-math.sin(phi) / r, math.cos(phi) / r]])


def polar_orthonormal_frame(x):
    return np.diag([1.0, 1.0 / x[0]])


# --- assemble_WX ----------------------------------------------------------


def test_swap_field_coordinate_components():
    X = VectorField([lambda x: x[1], lambda x: x[0]])
    d = SDerivationAlongX(X, S=zero_S())
    for x in ([0.3, -1.2], [5.0, 2.0]):
        np.testing.assert_allclose(assemble_WX(d, None, x), [[0, -1], [-1, 0]], atol=1e-10)


def test_identity_S_constant_X():
    X = VectorField([2.0, -1.0])
    d = SDerivationAlongX(X, S=lambda x: np.eye(2))
    np.testing.assert_allclose(assemble_WX(d, None, [1.0, 1.0]), np.eye(2), atol=1e-12)


def test_hyperbolic_field_hand_value():
    X = VectorField([lambda x: x[0], lambda x: -x[1]])
    d = SDerivationAlongX(X, S=zero_S())
    np.testing.assert_allclose(assemble_WX(d, None, [1.0, 1.0]), [[-1, 0], [0, 1]], atol=1e-10)
    # cross-check the contraction with an independent finite-difference Jacobian
    f = lambda x: np.array([x[0], -x[1]])
    h = 1e-5
    J = np.stack([(f([1 + h, 1]) - f([1 - h, 1])) / (2 * h), (f([1, 1 + h]) - f([1, 1 - h])) / (2 * h)], axis=1)
    np.testing.assert_allclose(assemble_WX(d, None, [1.0, 1.0]), -J, atol=1e-9)


def test_stencil_leaving_domain():
    X = VectorField([lambda x: x[0], lambda x: x[1]], domain=Box((0.0, 0.0), (1.0, 1.0)))
    d = SDerivationAlongX(X, S=zero_S())
    with pytest.raises(DomainBoundaryError):
        assemble_WX(d, None, [0.0, 0.5])


def test_singular_frame_rejected():
    d = SDerivationAlongX(VectorField([1.0, 0.0]), S=zero_S())
    with pytest.raises(SingularFrameError):
        assemble_WX(d, lambda x: np.zeros((2, 2)), [1.0, 1.0])


def test_s_form_matches_w_form_in_anholonomic_frame():
    """The tensor formula (commutator term) and the transformation law must agree.

    D is the polar Levi-Civita derivative along a quadratic X, written once as
    W = Gamma_k X^k and once as S = W + dX.  The orthonormal polar frame has a
    nonzero commutator, so this pins the index placement of the C term.
    """
    conn = catalog.flat_polar()
    X = VectorField([lambda x: x[0] * x[1], lambda x: x[0] ** 2 - x[1]])
    d_w = SDerivationAlongX.from_connection(conn, X)
    d_s = SDerivationAlongX(X, S=lambda x: connection_WX(conn, X, x) + X.jacobian(x, 1e-5))
    for x in ([1.3, 0.4], [2.0, -1.0], [0.8, 2.5]):
        a = assemble_WX(d_w, polar_orthonormal_frame, x)
        b = assemble_WX(d_s, polar_orthonormal_frame, x)
        np.testing.assert_allclose(a, b, atol=1e-7)
        # both vanish-free: the frame is not special, so W' is generically nonzero
        assert np.linalg.norm(a) > 1e-2


def test_connection_form_equals_connection_WX():
    conn = catalog.unit_sphere()
    X = VectorField([lambda x: math.sin(x[1]), lambda x: x[0] ** 2])
    d = SDerivationAlongX.from_connection(conn, X)
    for x in ([0.7, 0.2], [1.5, -2.0], [2.8, 1.1]):
        np.testing.assert_allclose(assemble_WX(d, None, x), connection_WX(conn, X, x), atol=1e-10)


# --- connection_WX ----------------------------------------------------------


def test_connection_wx_examples():
    np.testing.assert_array_equal(connection_WX(ConnectionField.zero(2), [1.0, 2.0], [0.0, 0.0]), np.zeros((2, 2)))
    G = np.zeros((2, 2, 2))
    G[0] = [[1, 0], [0, 0]]
    conn = ConnectionField(2, matrices=lambda x: G)
    np.testing.assert_array_equal(connection_WX(conn, [2.0, 3.0], [0.0, 0.0]), [[2, 0], [0, 0]])


def test_sphere_gamma_phi():
    conn = catalog.unit_sphere()
    th = math.pi / 3
    W = connection_WX(conn, [0.0, 1.0], [th, 0.0])
    # hand values: Gamma^theta_{phi phi} = -sin cos, Gamma^phi_{theta phi} = cot
    np.testing.assert_allclose(W, [[0, -math.sqrt(3) / 4], [1 / math.sqrt(3), 0]], atol=1e-15)


def test_gamma_table_convention():
    # gamma[i][j][k] = Gamma^i_{jk}; the matrix for direction k has (i, j) entries
    conn = ConnectionField(2, [[["1", "2"], ["3", "4"]], [["5", "6"], ["7", "8"]]], names=["x1", "x2"])
    G = conn.matrices([0.0, 0.0])
    np.testing.assert_array_equal(G[0], [[1, 3], [5, 7]])
    np.testing.assert_array_equal(G[1], [[2, 4], [6, 8]])


# --- transform_components --------------------------------------------------


def test_transform_identity():
    W = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(transform_components(W, np.eye(2), np.zeros((2, 2))), W)


def test_transform_constant_scaling():
    W = np.array([[0.0, 1.0], [0.0, 0.0]])
    np.testing.assert_allclose(transform_components(W, np.diag([2.0, 1.0]), np.zeros((2, 2))), [[0, 0.5], [0, 0]])


def test_transform_to_vanishing():
    A = np.array([[1.0, 0.5], [-0.2, 2.0]])
    XofA = np.array([[0.3, -1.0], [2.0, 0.1]])
    W = -XofA @ np.linalg.inv(A)
    np.testing.assert_allclose(transform_components(W, A, XofA), 0.0, atol=1e-14)


def test_transform_singular():
    with pytest.raises(SingularFrameError):
        transform_components(np.eye(2), np.array([[1.0, 2.0], [2.0, 4.0]]), np.zeros((2, 2)))


mats = arrays(np.float64, (3, 3), elements=st.floats(-1.0, 1.0))


@settings(max_examples=200, deadline=None)
@given(mats, mats, mats)
def test_transform_round_trip(W, P, D):
    A = np.eye(3) * 2.0 + P  # diagonally dominant, safely invertible
    Wp = transform_components(W, A, D)
    Ainv = np.linalg.inv(A)
    # X(A^-1) = -A^-1 X(A) A^-1
    back = transform_components(Wp, Ainv, -Ainv @ D @ Ainv)
    np.testing.assert_allclose(back, W, atol=1e-8)


# --- transform_connection ------------------------------------------------


def test_transform_connection_identity():
    conn = catalog.unit_sphere()
    x = [1.0, 0.3]
    np.testing.assert_allclose(transform_connection(conn, lambda y: np.eye(2), x), conn.matrices(x), atol=1e-14)


def test_cartesian_frame_flattens_polar():
    conn = catalog.flat_polar()
    for x in ([1.0, 0.0], [2.0, 1.0], [0.7, -2.5]):
        assert np.max(np.abs(transform_connection(conn, polar_cartesian_frame, x))) <= 1e-6


def test_zero_connection_constant_frame():
    A = np.array([[1.0, 2.0], [0.0, 3.0]])
    np.testing.assert_array_equal(transform_connection(ConnectionField.zero(2), lambda y: A, [1.0, 1.0]), 0.0)


# --- torsion and commutators ------------------------------------------------


def test_symmetric_connection_torsion_free():
    for conn in (catalog.flat_polar(), catalog.unit_sphere()):
        np.testing.assert_array_equal(torsion_components(conn, None, [1.2, 0.4]), 0.0)


def test_torsion_example():
    T = torsion_components(catalog.flat_with_torsion(), None, [0.0, 0.0])
    expected = np.zeros((2, 2, 2))
    expected[0, 1, 0] = -1.0  # T^1_{21}
    expected[0, 0, 1] = 1.0  # T^1_{12}
    np.testing.assert_array_equal(T, expected)


def test_pure_commutator_torsion():
    C = np.zeros((2, 2, 2))
    C[0, 0, 1], C[0, 1, 0] = 0.7, -0.7
    T = torsion_components(ConnectionField.zero(2), C, [0.0, 0.0])
    assert T[0, 0, 1] == -0.7 and T[0, 1, 0] == 0.7


def test_constant_frame_commutes():
    A = np.array([[2.0, 1.0], [0.5, 3.0]])
    np.testing.assert_allclose(commutation_coefficients(lambda y: A, [1.0, 2.0]), 0.0, atol=1e-12)


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0, 4.0])
def test_orthonormal_polar_commutator(r):
    C = commutation_coefficients(polar_orthonormal_frame, [r, 0.3])
    # [E_1, E_2] = -(1/r) E_2
    assert C[1, 0, 1] == pytest.approx(-1.0 / r, rel=1e-7)
    assert C[1, 1, 0] == pytest.approx(1.0 / r, rel=1e-7)
    C[1, 0, 1] = C[1, 1, 0] = 0.0
    np.testing.assert_allclose(C, 0.0, atol=1e-8)


def random_matrix_connection(seed, n=3):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(2, n, n, n))
    return ConnectionField(n, matrices=lambda x: a + b * math.sin(x[0] + 2 * x[1]))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), arrays(np.float64, 3, elements=st.floats(-2.0, 2.0)))
def test_exact_antisymmetry(seed, x):
    conn = random_matrix_connection(seed)
    rng = np.random.default_rng(seed + 1)
    C0 = rng.normal(size=(3, 3, 3))
    T = torsion_components(conn, C0, x)
    assert np.array_equal(T, -np.transpose(T, (0, 2, 1)))
    P = rng.normal(size=(3, 3, 3)) * 0.2
    frame = FrameSpec(lambda y: np.eye(3) * 2 + np.einsum("kij,k->ij", P, np.sin(y)))
    C = commutation_coefficients(frame, x)
    assert np.array_equal(C, -np.transpose(C, (0, 2, 1)))
