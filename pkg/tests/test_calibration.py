import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hbernstein import builtins as bi
from hbernstein import calibration as ca
from hbernstein.battery import observed_order
from hbernstein.core import group_mul
from hbernstein.graph import OutsideDomain, horizontal_normal

rng = np.random.default_rng(0)
P1 = rng.uniform(-1, 1, (300, 3))
P1[:, 1] = np.sign(P1[:, 1]) * (0.2 + 0.8 * np.abs(P1[:, 1]))


def smooth_section():
    return ca.HorizontalSection(1, lambda P: np.stack([np.sin(P[..., 0]) * np.cos(P[..., 2]), P[..., 1] ** 2], -1))


def test_constant_section_is_divergence_free():
    nu = ca.HorizontalSection.constant([0.6, 0.8, 0.0, 0.0])
    P = np.random.default_rng(1).normal(size=(50, 5))
    assert ca.divx_residual(nu, P) <= 1e-10
    with pytest.raises(ValueError):
        nu(np.zeros(3))


def test_divergence_matches_frame_derivatives():
    # X f1 + Y f2 with X = d_x + 2y d_t, Y = d_y - 2x d_t
    nu = smooth_section()
    for p in P1[:10]:
        x, y, t = p
        want = np.cos(x) * np.cos(t) - 2 * y * np.sin(x) * np.sin(t) + 2 * y
        assert abs(ca.divx_residual(nu, p[None], h=1e-4) - abs(want)) <= 1e-7


def test_xyt_divergence_converges_to_zero():
    nu = bi.xyt_section(1.0)
    errs = [ca.divx_residual(nu, P1, h) for h in (1e-2, 5e-3, 2.5e-3)]
    assert min(observed_order(errs)) >= 1.9
    assert ca.divx_residual(nu, P1, 1e-6) <= 1e-8


def test_margin_error_near_singular_set():
    with pytest.raises(ca.MarginError):
        ca.divx_residual(bi.xyt_section(1.0), np.array([[0.5, 1e-7, 0.0]]))


@pytest.mark.parametrize("alpha", [1.0, 2.0])
def test_xyt_section_calibrates_dgn(alpha):
    phi = bi.dgn_graph(alpha)
    E, T = np.meshgrid(np.linspace(0.1, 1, 5), np.linspace(-1, 1, 5), indexing="ij")
    rep = ca.calibrate_verdict(bi.xyt_section(alpha), phi, np.stack([E, T], -1).reshape(-1, 2), h=1e-6)
    assert rep.verdict == "calibrated"
    assert rep.to_dict()["verdict"] == "calibrated"


def test_plane_calibrated_by_its_normal():
    phi = bi.affine_graph(1.0, 0.5)
    A = np.random.default_rng(2).uniform(-0.5, 0.5, (20, 2))
    assert ca.calibrate_verdict(bi.section("constant", phi), phi, A).verdict == "calibrated"
    # rotated and oversized sections fail the match and norm checks
    wrong = ca.calibrate_verdict(ca.HorizontalSection.constant([0.0, 1.0]), phi, A)
    assert wrong.verdict == "not_calibrated" and wrong.normal_match_defect > 0.1
    big = ca.calibrate_verdict(ca.HorizontalSection.constant(2 * horizontal_normal(phi, A[0])), phi, A)
    assert big.max_norm_defect > 0.9 and big.verdict == "not_calibrated"


def test_tgraph_normal_formula_and_characteristic_point():
    a = 1.0
    phi_t, grad = bi.tgraph(f"tgraph_poly({a:g},0)")
    X = np.random.default_rng(3).uniform(-1, 1, (50, 2))
    X = X[np.abs(4 * X[:, 0] + a) > 0.05]
    N = ca.tgraph_normal(phi_t, X, grad)
    assert np.allclose(N, np.stack([0 * X[:, 0], -np.sign(4 * X[:, 0] + a)], -1), atol=1e-14)
    assert np.allclose(ca.tgraph_normal(phi_t, X), N, atol=1e-8)
    with pytest.raises(ca.CharacteristicPoint):
        ca.tgraph_normal(phi_t, np.array([-a / 4, 0.3]), grad)


def test_weak_residual_sees_unit_divergence():
    # div (x, 0) = 1, and each bump integrates to r^2
    battery = ca.bump_battery([[-1, 1], [-1, 1]])
    r = ca.weak_divergence_residual(lambda X: np.stack([X[..., 0], 0 * X[..., 0]], -1), battery)
    assert np.isclose(r, max(b["radius"] for b in battery) ** 2, rtol=1e-12)


@pytest.mark.parametrize("a", [1.0, -0.5])
def test_step_normal_is_weakly_divergence_free(a):
    battery = ca.bump_battery([[-1, 1], [-1, 1]])

    def N(X):
        return np.stack([0 * X[..., 0], np.sign(4 * X[..., 0] - a)], -1)

    assert ca.weak_divergence_residual(N, battery, jumps=((a / 4,), ())) <= 1e-12


def test_bump_gradient():
    f, g = ca.smoothstep_bump([0.1, -0.2], 0.4)
    X = np.random.default_rng(4).uniform(-0.3, 0.2, (30, 2))
    h = 1e-6
    fd = np.stack([(f(X + [h, 0]) - f(X - [h, 0])) / (2 * h), (f(X + [0, h]) - f(X - [0, h])) / (2 * h)], -1)
    assert np.allclose(g(X), fd, atol=1e-8)


E, T = np.meshgrid(np.linspace(-0.2, 0.2, 9), np.linspace(-2, 2, 9), indexing="ij")
GRID = np.stack([E, T], -1)


def test_abs_profile_closed_form():
    phi = ca.lipschitz_phi_from_beta(bi.profile("abs"))
    closed = np.where(T >= 0, T / (1 - 4 * E), -T / (1 + 4 * E))
    assert np.abs(phi.value(GRID) - closed).max() <= 1e-12


def test_const_profile():
    phi = ca.lipschitz_phi_from_beta(bi.profile("const(0.7)"))
    assert np.all(phi.value(GRID * 50) == 0.7)
    assert np.all(phi.gradient(GRID) == 0)


@pytest.mark.parametrize("k", [0.5, -1.0])
def test_slope_profile(k):
    phi = ca.lipschitz_phi_from_beta(bi.profile(f"slope({k:g})"))
    assert np.allclose(phi.value(GRID), k * T / (1 - 4 * k * E), atol=1e-12)
    assert np.abs(ca.wphi_ae_residual(bi.profile(f"slope({k:g})"), GRID)) <= 1e-8


@settings(max_examples=30)
@given(st.floats(-0.24, 0.24), st.floats(-3, 3))
def test_profile_graph_solves_transport(eta, tau):
    p = ca.LipschitzProfile(lambda t: np.sin(t), 1.0, name="sin")
    phi = ca.lipschitz_phi_from_beta(p)
    A = np.array([eta, tau])
    assert np.isclose(phi.value(np.array([0.0, tau])), np.sin(tau), atol=1e-12)
    # phi is constant along the characteristic line tau = t - 4 eta beta(t)
    t = tau + 4 * eta * float(phi.value(A))
    assert np.isclose(t - 4 * eta * np.sin(t), tau, atol=1e-10)
    g = phi.gradient(A)
    assert abs(g[0] - 4 * phi.value(A) * g[1]) <= 1e-6


def test_profile_strip():
    phi = ca.lipschitz_phi_from_beta(bi.profile("abs"))
    with pytest.raises(OutsideDomain):
        phi.value(np.array([0.25, 0.0]))
    with pytest.raises(ValueError):
        ca.LipschitzProfile(np.abs, np.inf)


def test_lipschitz_check():
    assert bi.profile("abs").check_lipschitz()
    assert not ca.LipschitzProfile(lambda t: 2 * t, 1.0).check_lipschitz()


def test_kink_images():
    p = ca.LipschitzProfile(lambda t: np.abs(t - 1), 1.0, kinks=(1.0,))
    assert np.allclose(ca.kink_images(p, np.array([0.0, 0.1]))[0], [1.0, 1.0])


def test_ae_residual_on_abs_profile():
    p = bi.profile("abs")
    off = GRID[np.abs(T) > 0.01]
    assert ca.wphi_ae_residual(p, off) <= 1e-8
    with pytest.raises(ca.MarginError):
        ca.wphi_ae_residual(p, np.array([[0.1, 1e-6]]))


def test_ae_residual_near_slanted_kink():
    # beta(1) = 1 slants the kink line, so stencils in both axes switch sides
    p = ca.LipschitzProfile(lambda t: np.maximum(t, 1.0), 1.0, kinks=(1.0,), dbeta=lambda t: (t > 1).astype(float))
    e = np.linspace(-0.2, 0.2, 7)
    pts = np.stack([e, 1 - 4 * e + 6e-5], -1)
    assert ca.wphi_ae_residual(p, pts) <= 1e-7


def test_mollified_sweep_improves():
    p = bi.profile("abs")
    E2, T2 = np.meshgrid(np.linspace(-0.1, 0.1, 9), np.linspace(-0.3, 0.3, 9), indexing="ij")
    rows = ca.mollified_sweep(p, np.stack([E2, T2], -1))
    w = [r["max_wphi"] for r in rows]
    dev = [r["max_dev"] for r in rows]
    assert w[0] > w[1] > w[2]
    assert dev[0] > dev[1] > dev[2]
    with pytest.raises(OutsideDomain):
        ca.mollified_sweep(p, np.array([[0.2, 0.0]]))


def test_mollified_graph_is_smooth_limit():
    phi = ca.lipschitz_phi_from_beta(ca.LipschitzProfile(np.sin, 1.0))
    A = np.array([[0.05, 0.3], [-0.1, 1.0]])
    v, de, dt = ca.mollify_graph(phi, 0.01)(A)
    g = phi.gradient(A)
    assert np.allclose(v, phi.value(A), atol=1e-4)
    assert np.allclose(de, g[:, 0], atol=1e-3) and np.allclose(dt, g[:, 1], atol=1e-3)


def test_mollifier_mass():
    # the volume of {max(|z|^2, |t|) < s} is 2 pi s^2, so the mass is 4 pi B(2, 4) = pi / 5
    assert abs(ca.mollifier_mass(1) - np.pi / 5) <= 1e-3


def test_mollified_constant_is_unchanged():
    nu = ca.HorizontalSection.constant([0.6, -0.8])
    m = ca.mollify_section(nu, 0.3)
    assert np.abs(m(P1) - [0.6, -0.8]).max() <= 1e-10


def test_mollified_section_bounds_and_limit():
    nu = smooth_section()
    m = ca.mollify_section(nu, 0.2)
    vals = m(P1[:20])
    assert np.all(np.abs(vals[:, 0]) <= 1 + 1e-12)
    errs = [np.abs(ca.mollify_section(nu, e)(P1[:20]) - nu(P1[:20])).max() for e in (0.2, 0.1, 0.05)]
    assert errs[0] > errs[1] > errs[2]


def test_mollification_commutes_with_right_translation():
    nu = smooth_section()
    g = np.array([0.3, -0.2, 0.5])
    shifted = ca.HorizontalSection(1, lambda P: nu(group_mul(P, np.broadcast_to(g, P.shape))))
    P = P1[:15]
    lhs = ca.mollify_section(shifted, 0.2)(P)
    rhs = ca.mollify_section(nu, 0.2)(group_mul(P, np.broadcast_to(g, P.shape)))
    assert np.abs(lhs - rhs).max() <= 1e-12


def test_mollify_section_needs_resolution():
    axes = [np.linspace(-1, 1, 5)] * 3
    vals = np.zeros((5, 5, 5, 2))
    nu = ca.HorizontalSection.from_grid(axes, vals)
    with pytest.raises(ca.ResolutionError):
        ca.mollify_section(nu, 0.2)
    with pytest.raises(ValueError):
        ca.mollify_section(nu, 0.0)
    fine = ca.HorizontalSection.from_grid([np.linspace(-1, 1, 81)] * 3, np.ones((81, 81, 81, 2)))
    assert np.allclose(ca.mollify_section(fine, 0.2)(np.zeros((1, 3))), 1.0)
