import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from hbernstein import builtins as bi
from hbernstein import variation as va
from hbernstein.characteristics import CharacteristicChart
from hbernstein.quadrature import QuadratureSpec
from helpers import sym_graph

eta, tau = sp.symbols("eta tau", real=True)
Q = QuadratureSpec(order=8, cells=8)


def generic_graph():
    return sym_graph(sp.sin(eta) + tau**2 / 3 + eta * tau / 5, (eta, tau), (-2, -2), (2, 2))


def test_bump_gradient_against_finite_differences():
    psi = va.bump([0.1, -0.2], [0.7, 0.5], p=3, tilt=[0.4, -0.3], scale=1.3)
    X = np.random.default_rng(0).uniform(-0.6, 0.6, (40, 2))
    h = 1e-6
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        fd = (psi.value(X + e) - psi.value(X - e)) / (2 * h)
        assert np.allclose(psi.gradient(X)[:, k], fd, atol=1e-8)
    assert np.all(psi.value(np.array([[0.8, 0.0], [0.1, 0.31]])) == 0)


def test_bump_rejects_bad_shape():
    with pytest.raises(ValueError):
        va.bump([0.0], [0.0])
    with pytest.raises(ValueError):
        va.bump([0.0], [1.0], p=1)


def test_battery_stays_in_box():
    box = [(-1, 1), (-0.5, 0.5)]
    for psi in va.psi_battery(box, count=12):
        assert np.all(psi.lo >= [-1, -0.5]) and np.all(psi.hi <= [1, 0.5])


@pytest.mark.parametrize("i", [0, 3, 7])
def test_variations_match_finite_differences_of_area(i):
    phi = generic_graph()
    psi = va.psi_battery([(-1, 1), (-1, 1)], seed=1)[i]
    g = {s: va.perturbed_area(phi, psi, s, Q) for s in (-2e-3, -1e-3, 0.0, 1e-3, 2e-3)}
    h = 1e-3
    d1 = (-g[2e-3] + 8 * g[1e-3] - 8 * g[-1e-3] + g[-2e-3]) / (12 * h)
    d2 = (-g[2e-3] + 16 * g[1e-3] - 30 * g[0.0] + 16 * g[-1e-3] - g[-2e-3]) / (12 * h * h)
    assert abs(va.first_variation(phi, psi, Q) - d1) <= 1e-8
    assert abs(va.second_variation_general(phi, psi, Q) - d2) <= 1e-5


def test_perturbed_wphi_matches_direct_evaluation():
    phi = generic_graph()
    psi = va.bump([0.0, 0.0], [0.8, 0.8], tilt=[0.3, 0.2])
    s = 0.37
    X = np.random.default_rng(2).uniform(-0.7, 0.7, (30, 2))
    p = phi.value(X) + s * psi.value(X)
    g = phi.gradient(X) + s * psi.gradient(X)
    assert np.allclose(va.perturbed_wphi(phi, psi, s, X)[:, 0], g[:, 0] - 4 * p * g[:, 1], atol=1e-13)


@pytest.mark.parametrize("i", range(4))
def test_stationary_form_equals_general_form_on_dgn(i):
    phi = bi.dgn_graph(1.0, lo=(-2, -2), hi=(2, 2))
    psi = va.psi_battery([(-1.5, 1.5), (-1.5, 1.5)], seed=3)[i]
    assert abs(va.first_variation(phi, psi, Q)) <= 1e-12
    assert np.isclose(va.second_variation_stationary(phi, psi, Q),
                      va.second_variation_general(phi, psi, Q), rtol=1e-10, atol=1e-12)


def test_stationary_form_refuses_nonstationary_graph():
    with pytest.raises(va.StationarityViolated):
        va.second_variation_stationary(generic_graph(), va.bump([0, 0], [0.5, 0.5]), Q)


def test_support_must_fit():
    phi = bi.dgn_graph(1.0, lo=(-1, -1), hi=(1, 1))
    with pytest.raises(va.SupportError):
        va.first_variation(phi, va.bump([0.8, 0.0], [0.5, 0.5]))
    with pytest.raises(va.SupportError):
        va.first_variation(phi, va.bump([0.0], [0.5]))


@settings(max_examples=20)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 11))
def test_planes_are_stable(w, c, i):
    phi = bi.affine_graph(w, c, lo=(-1, -1), hi=(1, 1))
    psi = va.psi_battery([(-1, 1), (-1, 1)], seed=4)[i]
    q = QuadratureSpec(order=6, cells=4)
    assert abs(va.first_variation(phi, psi, q)) <= 1e-10
    assert va.second_variation_general(phi, psi, q) >= 0


def oracle_witness(a, b, eps):
    """Both sides of the 1-D inequality with zeta = chi_eps / sqrt(h), by scipy.quad."""
    def h(t):
        return a * t * t / 2 + b * t + 1

    def chi(t):
        s = min(max(eps * abs(t) - 1, 0.0), 1.0)
        return 1 - s * s * (3 - 2 * s)

    def dchi(t):
        s = min(max(eps * abs(t) - 1, 0.0), 1.0)
        return -6 * s * (1 - s) * eps * np.sign(t)

    def dz(t):
        return dchi(t) / np.sqrt(h(t)) - 0.5 * chi(t) * (a * t + b) / h(t) ** 1.5

    R = 2 / eps
    pts = [-R / 2, R / 2]
    kw = dict(points=pts, epsabs=1e-13, epsrel=1e-13, limit=400)
    lhs = integrate.quad(lambda t: dz(t) ** 2 * h(t), -R, R, **kw)[0]
    rhs = (2 * a - b * b) * integrate.quad(lambda t: chi(t) ** 2 / h(t) ** 2, -R, R, **kw)[0]
    return lhs, rhs


@pytest.mark.parametrize("a,b,eps", [(4.0, 0.0, 0.5), (1.0, 0.5, 0.1), (2.0, -1.0, 0.05)])
def test_dgn_witness_against_quad(a, b, eps):
    _, lhs, rhs, ratio = va.dgn_witness(a, b, eps)
    ref_l, ref_r = oracle_witness(a, b, eps)
    assert np.isclose(lhs, ref_l, rtol=1e-9)
    assert np.isclose(rhs, ref_r, rtol=1e-9)
    assert ratio < 1


def test_witness_ratio_tends_to_quarter():
    ratios = [va.dgn_witness(1.0, 0.0, e)[3] for e in (0.01, 0.001, 0.0001)]
    assert all(abs(r - 0.25) < abs(s - 0.25) for r, s in zip(ratios[1:], ratios))
    assert abs(ratios[-1] - 0.25) < 1e-3


@pytest.mark.parametrize("a,b", [(4.0, 0.0), (1.0, 0.5), (3.0, -2.0)])
def test_step3_integrals_closed_form(a, b):
    alpha, i1, i2 = va.step3_integrals(a, b)
    assert np.isclose(alpha, a * a / (2 * a - b * b))
    assert abs(i1 - np.pi / np.sqrt(alpha)) <= 1e-12
    assert abs(i2 - np.pi / (2 * np.sqrt(alpha))) <= 1e-12


@pytest.mark.parametrize("a,b", [(0.0, 0.0), (1.0, 2.0), (-1.0, 0.0)])
def test_reduced_weights_need_admissible_slopes(a, b):
    with pytest.raises(va.InadmissibleData):
        va.ReducedWeights(a, b)


def test_cutoff_profile():
    chi, dchi = va.cutoff(0.5)
    t = np.array([0.0, 1.9, 2.0, 3.0, 4.0, 5.0])
    assert np.allclose(chi(t), [1, 1, 1, 0.5, 0, 0])
    assert abs(dchi(np.array([3.0]))[0] + 0.75) < 1e-14
    with pytest.raises(ValueError):
        va.cutoff(0.0)


def test_full_reduced_form_matches_second_variation():
    d = bi.initial_data("linear(4)")
    r = va.bernstein_verdict(d)
    w = r.witness
    _, zeta = va.transport_witness(CharacteristicChart(d), w["c0"], w["delta"], w["epsilon"], w["a"], w["b"])
    full = va.reduced_form(va.ReducedWeights(w["a"], w["b"], data=d, c0=w["c0"]), zeta,
                           QuadratureSpec(order=8, cells=32))
    assert abs(full - r.g2) <= 1e-5


@pytest.mark.parametrize("spec", ["linear(4)", "tanh"])
def test_nonplanar_data_is_not_minimizing(spec):
    r = va.bernstein_verdict(bi.initial_data(spec))
    assert r.verdict == "non_minimizing"
    assert r.g2 < -1e-3 and r.errors["g2"] < abs(r.g2) / 10
    assert abs(r.g1) <= 1e-7
    assert r.witness["ratio"] < 1


def test_constant_data_is_vertical_plane():
    r = va.bernstein_verdict(bi.initial_data("constants(1,0.5)"))
    assert r.verdict == "vertical_plane"
    assert r.plane == {"w": 1.0, "c": 0.5}


@pytest.mark.parametrize("spec", ["ex4.7", "ex4.8"])
def test_non_entire_data_is_refused(spec):
    with pytest.raises(va.InadmissibleData):
        va.bernstein_verdict(bi.initial_data(spec))
