import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from hbernstein import builtins as bi
from hbernstein.graph import (
    GraphFunction,
    OutsideCylinder,
    OutsideDomain,
    ScalarField,
    area,
    classical_residual,
    dilate_graph,
    horizontal_normal,
    lift,
    mse_residual,
    subgraph_membership,
    wphi_apply,
)
from hbernstein.core import graph_point
from hbernstein.quadrature import QuadratureSpec
from helpers import sym_graph

eta, tau, k = sp.symbols("eta tau k", real=True)


def W1(phi, u):
    """W^phi u in H^1, built by composition."""
    return sp.diff(u, eta) - 4 * phi * sp.diff(u, tau)


def test_dgn_wphi_closed_form():
    phi = -k * eta * tau / (1 + 2 * k * eta**2)
    w = sp.simplify(W1(phi, phi))
    assert sp.simplify(w + k * tau / (1 + 2 * k * eta**2)) == 0
    assert sp.simplify(W1(phi, w)) == 0
    g = bi.dgn_graph(2.0)
    A = np.random.default_rng(1).uniform(-1.5, 1.5, (50, 2))
    want = -2.0 * A[:, 1] / (1 + 4.0 * A[:, 0] ** 2)
    assert np.allclose(wphi_apply(g, A)[:, 0], want, atol=1e-14)
    assert np.abs(mse_residual(g, A)).max() <= 1e-13


def test_h1_residual_matches_composition():
    expr = sp.sin(eta) + tau**2 / 3 + eta * tau / 5
    oracle = sp.lambdify((eta, tau), sp.expand(W1(expr, W1(expr, expr))), "numpy")
    g = sym_graph(expr, (eta, tau), (-2, -2), (2, 2))
    A = np.random.default_rng(2).uniform(-1.5, 1.5, (40, 2))
    assert np.allclose(mse_residual(g, A), oracle(A[:, 0], A[:, 1]), atol=1e-12)
    # value-only finite differences reach the same answer at order h^2
    assert np.allclose(mse_residual(g, A, h=1e-3), oracle(A[:, 0], A[:, 1]), atol=1e-5)


def test_h2_divergence_form_matches_composition():
    e, v2, v4, t = sp.symbols("eta v2 v4 tau", real=True)
    phi = e * v2 / 2 + t * v4 / 3 + sp.sin(t) * e**2 / 5 + v2 * t / 7
    ops = [
        lambda u: sp.diff(u, v2) + 2 * v4 * sp.diff(u, t),
        lambda u: sp.diff(u, e) - 4 * phi * sp.diff(u, t),
        lambda u: sp.diff(u, v4) - 2 * v2 * sp.diff(u, t),
    ]
    w = [D(phi) for D in ops]
    S = sp.sqrt(1 + sum(wi**2 for wi in w))
    div = sum(D(wi / S) for D, wi in zip(ops, w))
    oracle = sp.lambdify((e, v2, v4, t), div, "numpy")
    g = sym_graph(phi, (e, v2, v4, t), [-2] * 4, [2] * 4)
    A = np.random.default_rng(3).uniform(-1, 1, (30, 4))
    assert np.allclose(mse_residual(g, A), oracle(*A.T), atol=1e-12)
    woracle = [sp.lambdify((e, v2, v4, t), wi, "numpy") for wi in w]
    assert np.allclose(wphi_apply(g, A), np.stack([f(*A.T) for f in woracle], -1), atol=1e-13)


def test_lift_residual_is_classical():
    rng = np.random.default_rng(4)
    c = rng.normal(size=(3, 3))

    def f(B):
        return np.einsum("...i,ij,...j->...", B, c, B) + np.sin(B[..., 0]) * B[..., 2]

    psi = ScalarField(3, f, lo=[-1] * 3, hi=[1] * 3)
    phi = lift(psi)
    B = rng.uniform(-0.5, 0.5, (20, 3))
    A = np.concatenate([B, rng.uniform(-3, 3, (20, 1))], axis=-1)
    assert np.allclose(mse_residual(phi, A, h=1e-4), classical_residual(psi, B, h=1e-4), atol=1e-6)


def test_scherk_is_minimal():
    psi = bi.scherk()
    B = np.random.default_rng(5).uniform(-0.45, 0.45, (100, 3))
    assert np.abs(classical_residual(psi, B)).max() <= 1e-13


def test_area_against_dblquad():
    phi = bi.dgn_graph(1.0)
    ours = area(phi, [(-1, 1), (-0.5, 1.5)], QuadratureSpec(order=10, cells=8))
    ref, _ = integrate.dblquad(lambda t, e: np.sqrt(1 + (t / (1 + 2 * e * e)) ** 2), -1, 1, -0.5, 1.5,
                               epsabs=1e-13, epsrel=1e-13)
    assert abs(ours - ref) <= 1e-11


def test_area_of_vertical_plane():
    phi = bi.affine_graph(2.0, 1.0)
    assert np.isclose(area(phi, [(0, 1), (0, 1.5)]), 1.5 * np.sqrt(5.0), rtol=1e-14)


@given(st.floats(0.3, 3.0), st.floats(-1.0, 0.5), st.floats(-1.0, 0.5))
def test_area_scales_with_cube(lam, e0, t0):
    phi = bi.dgn_graph(1.0, lo=(-2, -2), hi=(2, 2))
    box = np.array([[e0, e0 + 1.0], [t0, t0 + 1.2]])
    q = QuadratureSpec(order=8, cells=4)
    scaled = box * np.array([[lam], [lam * lam]])
    assert np.isclose(area(dilate_graph(phi, lam), scaled, q), lam**3 * area(phi, box, q), rtol=1e-12)


def test_dilate_graph_is_group_dilation():
    # the dilated surface is delta_lam of the original, pointwise
    from hbernstein.core import dilate

    phi = bi.dgn_graph(1.0)
    A = np.random.default_rng(6).uniform(-1, 1, (20, 2))
    lam = 1.7
    P = dilate(lam, graph_point(A, phi.value(A)))
    scale = np.array([lam, lam * lam])
    Q = graph_point(A * scale, dilate_graph(phi, lam).value(A * scale))
    assert np.allclose(P, Q, atol=1e-13)
    with pytest.raises(ValueError):
        dilate_graph(phi, 0.0)


def test_horizontal_normal_unit():
    phi = bi.dgn_graph(1.0)
    A = np.random.default_rng(7).uniform(-1, 1, (20, 2))
    N = horizontal_normal(phi, A)
    assert np.allclose(np.linalg.norm(N, axis=-1), 1.0)
    assert np.all(N[:, 0] < 0)


def test_subgraph_membership():
    phi = bi.affine_graph(0.0, 1.0, lo=[-1, -1], hi=[1, 1])
    A = np.array([[0.2, 0.3], [0.2, 0.3]])
    P = graph_point(A, np.array([0.5, 1.5]))
    assert list(subgraph_membership(phi, P)) == [True, False]
    with pytest.raises(OutsideCylinder):
        subgraph_membership(phi, graph_point(np.array([5.0, 0.0]), 0.0))


def test_domain_checks():
    phi = bi.dgn_graph(1.0, lo=(-1, -1), hi=(1, 1))
    with pytest.raises(OutsideDomain):
        phi.value(np.array([1.5, 0.0]))


def test_from_grid_interpolates_smooth_data():
    A = np.random.default_rng(8).uniform(-0.9, 0.9, (30, 2))
    errs = []
    for m in (41, 81):
        e = np.linspace(-1, 1, m)
        E, T = np.meshgrid(e, e, indexing="ij")
        phi = GraphFunction.from_grid([e, e], np.sin(E) * np.cos(T))
        assert np.allclose(phi.value(A), np.sin(A[:, 0]) * np.cos(A[:, 1]), atol=1e-5)
        errs.append(np.abs(phi.gradient(A)[:, 0] - np.cos(A[:, 0]) * np.cos(A[:, 1])).max())
    # derivative of a cubic interpolant is second order in the spacing
    assert errs[1] < 2e-3
    assert errs[0] / errs[1] > 3.0


def test_lift_needs_odd_dimension():
    with pytest.raises(ValueError):
        lift(ScalarField(2, lambda B: B[..., 0]))
