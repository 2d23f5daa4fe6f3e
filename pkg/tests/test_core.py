import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hbernstein.core import (
    BaseParamPoint,
    DimensionError,
    HPoint,
    base_point,
    dilate,
    dinf,
    frame_coeffs,
    graph_point,
    group_inv,
    group_mul,
    hnorm,
    iota,
    lie_bracket,
)

coord = st.floats(-3, 3, allow_nan=False)


def points(n, k=1):
    return arrays(np.float64, (k, 2 * n + 1), elements=coord)


dims = st.sampled_from([1, 2, 3])


def mul_h1(p, q):
    """Hand-written H^1 law: (x, y, t)(x', y', t') = (x+x', y+y', t+t' + 2(y x' - x y'))."""
    x, y, t = p
    a, b, s = q
    return np.array([x + a, y + b, t + s + 2 * (y * a - x * b)])


@given(points(1), points(1))
def test_h1_law_matches_hand_formula(P, Q):
    assert np.allclose(group_mul(P, Q)[0], mul_h1(P[0], Q[0]), atol=1e-12)


@given(dims.flatmap(lambda n: st.tuples(points(n), points(n), points(n))))
def test_associativity(PQR):
    P, Q, R = PQR
    lhs = group_mul(group_mul(P, Q), R)
    rhs = group_mul(P, group_mul(Q, R))
    assert np.abs(lhs - rhs).max() <= 1e-12


@given(dims.flatmap(points))
def test_inverse_and_identity(P):
    e = np.zeros_like(P)
    assert np.allclose(group_mul(P, group_inv(P)), e, atol=1e-12)
    assert np.allclose(group_mul(group_inv(P), P), e, atol=1e-12)
    assert np.array_equal(group_mul(P, e), P)


@given(dims.flatmap(lambda n: st.tuples(points(n), points(n), points(n))))
def test_distance_left_invariant(PQZ):
    P, Q, Z = PQZ
    assert abs(dinf(group_mul(Z, P), group_mul(Z, Q)) - dinf(P, Q)).max() <= 1e-12


@given(dims.flatmap(lambda n: st.tuples(points(n), points(n))), st.floats(0.1, 10))
def test_distance_homogeneous(PQ, lam):
    P, Q = PQ
    assert abs(dinf(dilate(lam, P), dilate(lam, Q)) - lam * dinf(P, Q)).max() <= 1e-12 * (1 + lam)


@given(dims.flatmap(lambda n: st.tuples(points(n), points(n))), st.floats(0.1, 10))
def test_dilation_is_automorphism(PQ, lam):
    P, Q = PQ
    lhs = dilate(lam, group_mul(P, Q))
    rhs = group_mul(dilate(lam, P), dilate(lam, Q))
    assert np.allclose(lhs, rhs, atol=1e-10 * lam * lam)


@given(dims.flatmap(lambda n: st.tuples(points(n), points(n))))
def test_distance_symmetric_and_zero_on_diagonal(PQ):
    P, Q = PQ
    assert np.allclose(dinf(P, Q), dinf(Q, P), atol=1e-12)
    assert np.all(dinf(P, P) == 0)


def test_norm_examples():
    assert hnorm([3.0, 4.0, 1.0]) == 5.0
    assert hnorm([0.0, 0.0, -9.0]) == 3.0


def test_dilate_rejects_nonpositive():
    with pytest.raises(ValueError):
        dilate(0.0, [1.0, 2.0, 3.0])


def test_dimension_errors():
    with pytest.raises(DimensionError):
        group_mul(np.zeros(3), np.zeros(5))
    with pytest.raises(DimensionError):
        hnorm(np.zeros(4))
    with pytest.raises(DimensionError):
        iota(np.zeros(3))


@given(dims.flatmap(points), st.integers(0, 5))
def test_frame_is_derivative_of_right_translation(P, j):
    # X_j(P) = d/ds P . exp(s e_j) at s = 0, an independent route to the frame
    n = (P.shape[-1] - 1) // 2
    j = j % (2 * n)
    E = np.zeros_like(P)
    s = 1e-6
    E[..., j] = s
    fd = (group_mul(P, E) - group_mul(P, -E)) / (2 * s)
    assert np.allclose(fd, frame_coeffs(P)[..., :, j], atol=1e-8)


@pytest.mark.parametrize("n", [1, 2])
def test_brackets(n):
    P = np.random.default_rng(0).normal(size=(4, 2 * n + 1))
    for i in range(2 * n):
        for j in range(2 * n):
            B = lie_bracket(i, j, P)
            want = np.zeros(2 * n + 1)
            if j == i + n:
                want[-1] = -4.0
            elif i == j + n:
                want[-1] = 4.0
            assert np.allclose(B, want, atol=1e-9)


@given(st.sampled_from([1, 2]).flatmap(lambda n: arrays(np.float64, (2 * n,), elements=coord)), coord)
def test_graph_point_roundtrip(A, s):
    P = graph_point(A, s)
    A2, s2 = base_point(P)
    assert np.allclose(A2, A, atol=1e-12)
    assert np.isclose(s2, s, atol=1e-12)


def test_iota_lands_in_subgroup():
    A = np.array([0.5, -1.0])
    assert np.array_equal(iota(A), [0.0, 0.5, -1.0])
    A = np.array([0.5, 2.0, 3.0, -1.0])
    assert np.array_equal(iota(A), [0.0, 2.0, 0.5, 3.0, -1.0])


def test_point_wrappers():
    P = HPoint.of(1.0, 2.0, 3.0)
    Q = HPoint.of(-1.0, 0.5, 0.0)
    R = P * Q
    assert np.allclose(R.coords, group_mul(P.coords, Q.coords))
    assert P * P.inverse() == HPoint.of(0.0, 0.0, 0.0)
    assert np.isclose(P.dist(Q), dinf(P.coords, Q.coords))
    assert np.allclose(P.dilate(2.0).coords, [2.0, 4.0, 12.0])
    with pytest.raises(DimensionError):
        BaseParamPoint(2, np.zeros(3))
    with pytest.raises(DimensionError):
        P * HPoint.of(0.0, 0.0, 0.0, 0.0, 0.0)
