"""First and second variation of the graph area, and the non-minimality witness.

Perturbations phi + s psi use compactly supported C^1 test functions, so
every integral runs over the support box of psi only.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .characteristics import (
    CharacteristicChart,
    InitialData,
    admissibility_check,
    domain_classification,
    synthesize_phi,
)
from .graph import GraphFunction, area, mse_residual
from .quadrature import QuadratureSpec, integrate_1d, integrate_with_error, tensor_integrate

__all__ = [
    "SupportError",
    "StationarityViolated",
    "InadmissibleData",
    "TestFunction",
    "Profile1D",
    "bump",
    "psi_battery",
    "perturbed_wphi",
    "perturbed_area",
    "first_variation",
    "second_variation_general",
    "second_variation_stationary",
    "ReducedWeights",
    "reduced_form",
    "one_d_form",
    "cutoff",
    "dgn_witness",
    "step3_integrals",
    "transport_witness",
    "VariationReport",
    "bernstein_verdict",
]


class SupportError(ValueError):
    """The test function's support is not contained in the parameter box."""


class StationarityViolated(ValueError):
    """The graph does not solve the minimal surface equation on the support."""


class InadmissibleData(ValueError):
    """Initial data do not define an entire stationary graph."""


@dataclass(frozen=True)
class TestFunction:
    """Compactly supported C^1 field on R^dim with closed-form gradient."""

    __test__ = False  # not a pytest class

    dim: int
    f: Callable
    grad: Callable
    lo: np.ndarray
    hi: np.ndarray
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float))

    @property
    def box(self):
        return np.stack([self.lo, self.hi], axis=-1)

    def value(self, X):
        return np.asarray(self.f(np.asarray(X, dtype=float)), dtype=float)

    def gradient(self, X):
        return np.asarray(self.grad(np.asarray(X, dtype=float)), dtype=float)


def _bump1(s, p):
    inside = np.abs(s) < 1
    q = np.where(inside, 1 - s * s, 0.0)
    return q**p, np.where(inside, -2 * p * s * q ** (p - 1), 0.0)


def bump(center, radii, p: int = 2, tilt=None, scale: float = 1.0, name="bump") -> TestFunction:
    """scale * prod_k (1 - s_k^2)^p * (1 + tilt . s), s_k = (x_k - center_k) / radii_k.

    p >= 2 gives a C^1 function supported in the box center +- radii.
    """
    center = np.asarray(center, dtype=float)
    radii = np.broadcast_to(np.asarray(radii, dtype=float), center.shape).copy()
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    if p < 2:
        raise ValueError("p >= 2 is needed for a C^1 bump")
    tilt = np.zeros_like(center) if tilt is None else np.asarray(tilt, dtype=float)
    d = center.size

    def parts(X):
        s = (X - center) / radii
        vals, ders = _bump1(s, p)
        lin = 1 + s @ tilt
        return s, vals, ders, lin

    def f(X):
        _, vals, _, lin = parts(X)
        return scale * np.prod(vals, axis=-1) * lin

    def grad(X):
        s, vals, ders, lin = parts(X)
        out = np.empty(X.shape)
        for k in range(d):
            others = np.prod(np.delete(vals, k, axis=-1), axis=-1)
            out[..., k] = others * (ders[..., k] * lin + vals[..., k] * tilt[k]) / radii[k]
        return scale * out

    return TestFunction(d, f, grad, center - radii, center + radii, name)


def psi_battery(box, count: int = 12, seed: int = 0, fill: float = 0.45):
    """Deterministic family of tilted bumps inside a parameter box."""
    box = np.asarray(box, dtype=float)
    rng = np.random.default_rng(seed)
    lo, hi = box[:, 0], box[:, 1]
    width = hi - lo
    out = []
    for i in range(count):
        r = width * rng.uniform(0.15, fill, size=len(lo))
        c = rng.uniform(lo + r, hi - r)
        tilt = rng.uniform(-0.8, 0.8, size=len(lo)) if i % 2 else None
        p = 2 + i % 3
        out.append(bump(c, r, p=p, tilt=tilt, scale=rng.uniform(0.5, 2.0), name=f"psi{i}"))
    return out


def _check_support(phi: GraphFunction, psi: TestFunction):
    if psi.dim != phi.dim:
        raise SupportError(f"test function lives on R^{psi.dim}, graph on R^{phi.dim}")
    if np.any(psi.lo < phi.lo) or np.any(psi.hi > phi.hi):
        raise SupportError("support of psi is not inside the parameter box")


def _pieces(phi: GraphFunction, psi: TestFunction, X):
    """w = W^phi phi, w1 = d/ds W^{phi_s} phi_s, and the s^2 coefficient, at X."""
    n = phi.n
    p = phi.value(X)
    g = phi.gradient(X)
    q = psi.value(X)
    gq = psi.gradient(X)
    pt = g[..., -1]
    w = np.empty(X.shape[:-1] + (2 * n - 1,))
    w1 = np.empty_like(w)
    for j in range(2, n + 1):
        vj, vjn = j - 1, n + j - 2
        w[..., j - 2] = g[..., vj] + 2 * X[..., vjn] * pt
        w1[..., j - 2] = gq[..., vj] + 2 * X[..., vjn] * gq[..., -1]
        w[..., n + j - 2] = g[..., vjn] - 2 * X[..., vj] * pt
        w1[..., n + j - 2] = gq[..., vjn] - 2 * X[..., vj] * gq[..., -1]
    w[..., n - 1] = g[..., 0] - 4 * p * pt
    # W*psi = -(psi_eta - 4 phi psi_tau) + 4 psi phi_tau
    wstar = -(gq[..., 0] - 4 * p * gq[..., -1]) + 4 * q * pt
    w1[..., n - 1] = -wstar
    w2 = -4 * q * gq[..., -1]
    return w, w1, w2


def perturbed_wphi(phi: GraphFunction, psi: TestFunction, s: float, X):
    """W^{phi_s} phi_s at X via the expansion in s."""
    w, w1, w2 = _pieces(phi, psi, X)
    out = w + s * w1
    out[..., phi.n - 1] += s * s * w2
    return out


def _support_integral(f, psi, q, breakpoints=None):
    return tensor_integrate(f, psi.box, q or QuadratureSpec(), breakpoints)


def perturbed_area(phi: GraphFunction, psi: TestFunction, s: float, q: QuadratureSpec | None = None,
                   box=None) -> float:
    """g(s) = area of phi + s psi over the parameter box."""
    _check_support(phi, psi)

    def delta(X):
        w0 = np.sum(perturbed_wphi(phi, psi, 0.0, X) ** 2, axis=-1)
        ws = np.sum(perturbed_wphi(phi, psi, s, X) ** 2, axis=-1)
        return (ws - w0) / (np.sqrt(1 + ws) + np.sqrt(1 + w0))

    base = area(phi, phi.box if box is None else box, q)
    return base + _support_integral(delta, psi, q)


def first_variation(phi: GraphFunction, psi: TestFunction, q: QuadratureSpec | None = None) -> float:
    _check_support(phi, psi)

    def integrand(X):
        w, w1, _ = _pieces(phi, psi, X)
        return np.sum(w * w1, axis=-1) / np.sqrt(1 + np.sum(w * w, axis=-1))

    return _support_integral(integrand, psi, q)


def _second_general_density(phi, psi, X):
    w, w1, w2 = _pieces(phi, psi, X)
    S2 = 1 + np.sum(w * w, axis=-1)
    num = S2 * (np.sum(w1 * w1, axis=-1) + 2 * w[..., phi.n - 1] * w2) - np.sum(w * w1, axis=-1) ** 2
    return num / S2**1.5


def second_variation_general(phi: GraphFunction, psi: TestFunction, q: QuadratureSpec | None = None) -> float:
    _check_support(phi, psi)
    return _support_integral(lambda X: _second_general_density(phi, psi, X), psi, q)


def _stationary_density(phi, psi, X):
    p = phi.value(X)
    g = phi.gradient(X)
    H = phi.hessian(X)
    q = psi.value(X)
    gq = psi.gradient(X)
    pe, pt = g[..., 0], g[..., 1]
    w = pe - 4 * p * pt
    wpsi = gq[..., 0] - 4 * p * gq[..., 1]
    bracket = H[..., 0, 1] - 2 * pt**2 - 4 * p * H[..., 1, 1]
    return (wpsi**2 + 8 * q * q * bracket) / (1 + w * w) ** 1.5


def _assert_stationary(phi, box, tol=1e-6, num=9):
    axes = [np.linspace(lo, hi, num) for lo, hi in box]
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    r = float(np.max(np.abs(mse_residual(phi, X))))
    if r > tol:
        raise StationarityViolated(f"minimal surface residual {r:.3e} exceeds {tol:g} on the support")
    return r


def second_variation_stationary(phi: GraphFunction, psi: TestFunction, q: QuadratureSpec | None = None,
                                with_error: bool = False):
    """g''(0) in the form valid for stationary graphs in H^1."""
    if phi.n != 1:
        raise ValueError("the stationary form is implemented for n = 1")
    _check_support(phi, psi)
    _assert_stationary(phi, psi.box)

    def integrand(X):
        # looked up at call time so a patched density takes effect
        return _stationary_density(phi, psi, X)

    if with_error:
        return integrate_with_error(integrand, psi.box, q or QuadratureSpec())
    return _support_integral(integrand, psi, q)


@dataclass(frozen=True)
class ReducedWeights:
    """Weights of the second variation in chart coordinates (c, t).

    With `data` the full weights J / (1+A^2)^(3/2) and
    (B'^2 - 2A') / ((1+A^2)^(3/2) J) are used; without it the weights are
    frozen at c0 to h(t) and (b^2 - 2a) / h(t).
    """

    a: float
    b: float
    data: InitialData | None = None
    c0: float = 0.0

    def __post_init__(self):
        if not self.a > 0 or not self.b * self.b < 2 * self.a:
            raise InadmissibleData(f"need a > 0 and b^2 < 2a, got a={self.a}, b={self.b}")

    def h(self, t):
        return 0.5 * self.a * t * t + self.b * t + 1

    def dh(self, t):
        return self.a * t + self.b

    @property
    def scale(self) -> float:
        """(1 + A(c0)^2)^(-3/2), the factor dropped by the frozen weights."""
        if self.data is None:
            return 1.0
        return float((1 + self.data.ev("A", self.c0) ** 2) ** -1.5)

    def weight_u(self, c, t):
        if self.data is None:
            return self.h(t) + 0 * c
        d = self.data
        J = d.ev("dA", c) * t**2 / 2 + d.ev("dB", c) * t + 1
        return J / (1 + d.ev("A", c) ** 2) ** 1.5

    def weight_v(self, c, t):
        if self.data is None:
            return (self.b**2 - 2 * self.a) / self.h(t) + 0 * c
        d = self.data
        a1, b1 = d.ev("dA", c), d.ev("dB", c)
        J = a1 * t**2 / 2 + b1 * t + 1
        return (b1**2 - 2 * a1) / ((1 + d.ev("A", c) ** 2) ** 1.5 * J)


def reduced_form(w: ReducedWeights, zeta: TestFunction, q: QuadratureSpec | None = None, breakpoints=None) -> float:
    """4 * integral of zeta_t^2 weight_u + zeta^2 weight_v over the (c, t) support."""

    def integrand(X):
        c, t = X[..., 0], X[..., 1]
        z = zeta.value(X)
        zt = zeta.gradient(X)[..., 1]
        return zt * zt * w.weight_u(c, t) + z * z * w.weight_v(c, t)

    return 4 * tensor_integrate(integrand, zeta.box, q, breakpoints)


@dataclass(frozen=True)
class Profile1D:
    """A compactly supported C^1 function of t, with derivative and kinks of f''."""

    f: Callable
    df: Callable
    lo: float
    hi: float
    kinks: tuple = ()


def one_d_form(a: float, b: float, zeta: Profile1D, tol: float = 1e-11):
    """(lhs, rhs) = (int zeta'^2 h, (2a - b^2) int zeta^2 / h)."""
    w = ReducedWeights(a, b)
    bp = tuple(zeta.kinks)
    lhs = integrate_1d(lambda t: zeta.df(t) ** 2 * w.h(t), zeta.lo, zeta.hi, tol, breakpoints=bp)
    rhs = (2 * a - b * b) * integrate_1d(lambda t: zeta.f(t) ** 2 / w.h(t), zeta.lo, zeta.hi, tol, breakpoints=bp)
    return lhs, rhs


def cutoff(eps: float):
    """chi_eps and its derivative: 1 on |t| <= 1/eps, C^1 smoothstep down to 0 at 2/eps."""
    if not eps > 0:
        raise ValueError("eps must be positive")

    def chi(t):
        s = np.clip(eps * np.abs(t) - 1, 0.0, 1.0)
        return 1 - s * s * (3 - 2 * s)

    def dchi(t):
        s = np.clip(eps * np.abs(t) - 1, 0.0, 1.0)
        return -6 * s * (1 - s) * eps * np.sign(t)

    return chi, dchi


def dgn_witness(a: float, b: float, eps: float):
    """zeta_eps = chi_eps / sqrt(h) with the two sides of the 1-D inequality.

    Returns (profile, lhs, rhs, lhs / rhs).  Minimality would require
    lhs >= rhs; the ratio tends to 1/4 as eps -> 0.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    w = ReducedWeights(a, b)
    chi, dchi = cutoff(eps)

    def f(t):
        return chi(t) / np.sqrt(w.h(t))

    def df(t):
        h = w.h(t)
        return dchi(t) / np.sqrt(h) - 0.5 * chi(t) * w.dh(t) / h**1.5

    R = 2 / eps
    prof = Profile1D(f, df, -R, R, (-R / 2, R / 2))
    lhs, rhs = one_d_form(a, b, prof)
    return prof, lhs, rhs, lhs / rhs


def step3_integrals(a: float, b: float):
    """Quadrature of int dt/(1+alpha t^2) and int dt/(1+alpha t^2)^2 over R, alpha = a^2/(2a-b^2)."""
    ReducedWeights(a, b)
    alpha = a * a / (2 * a - b * b)
    i1 = integrate_1d(lambda t: 1 / (1 + alpha * t * t), -np.inf, np.inf, 1e-13)
    i2 = integrate_1d(lambda t: 1 / (1 + alpha * t * t) ** 2, -np.inf, np.inf, 1e-13)
    return alpha, i1, i2


def transport_witness(chart: CharacteristicChart, c0: float, delta: float, eps: float, a: float, b: float):
    """psi(eta, tau) = zeta(c(-tau/4, eta), eta) for zeta(c, t) = bump(c) * zeta_eps(t).

    zeta_eps uses the frozen h of (a, b).  Returns (psi, zeta) as
    TestFunctions on the (eta, tau) and (c, t) planes.
    """
    prof, *_ = dgn_witness(a, b, eps)
    cb = bump([c0], [delta], p=3)

    def zf(X):
        return cb.value(X[..., :1]) * prof.f(X[..., 1])

    def zg(X):
        out = np.empty(X.shape)
        out[..., 0] = cb.gradient(X[..., :1])[..., 0] * prof.f(X[..., 1])
        out[..., 1] = cb.value(X[..., :1]) * prof.df(X[..., 1])
        return out

    zeta = TestFunction(2, zf, zg, [c0 - delta, prof.lo], [c0 + delta, prof.hi], "zeta")

    def chart_coords(X):
        x, t = -X[..., 1] / 4, X[..., 0]
        p = chart.u_derivatives(x, t)
        return p, np.stack([p["c"], t], axis=-1)

    def pf(X):
        _, C = chart_coords(X)
        return zeta.value(C)

    def pg(X):
        p, C = chart_coords(X)
        gz = zeta.gradient(C)
        # c_x = 1/J, c_t = -u/J; x = -tau/4, t = eta
        out = np.empty(X.shape)
        out[..., 0] = gz[..., 0] * (-p["u"] / p["J"]) + gz[..., 1]
        out[..., 1] = gz[..., 0] / p["J"] * (-0.25)
        return out

    ts = np.linspace(prof.lo, prof.hi, 2001)
    xs_hi = chart.x_of(np.full_like(ts, c0 + delta), ts)
    xs_lo = chart.x_of(np.full_like(ts, c0 - delta), ts)
    pad = 1e-9
    lo = [prof.lo, -4 * xs_hi.max() - pad]
    hi = [prof.hi, -4 * xs_lo.min() + pad]
    return TestFunction(2, pf, pg, lo, hi, "transported"), zeta


@dataclass
class VariationReport:
    verdict: str
    g0: float | None = None
    g1: float | None = None
    g2: float | None = None
    errors: dict = field(default_factory=dict)
    witness: dict | None = None
    plane: dict | None = None

    def to_dict(self):
        return asdict(self)


def _pick_c0(d: InitialData):
    c = d.samples()
    a = d.ev("dA", c)
    near = a >= a.max() * (1 - 1e-9)
    cand = c[near]
    return float(cand[np.argmin(np.abs(cand))])


def bernstein_verdict(d: InitialData, eps: float = 0.5, delta: float = 0.05,
                      q: QuadratureSpec | None = None) -> VariationReport:
    """Vertical plane, or a concrete perturbation with negative second variation."""
    adm = admissibility_check(d)
    if not adm.admissible:
        raise InadmissibleData(f"admissibility fails at c = {adm.c_star:g}")
    dom = domain_classification(d)
    if dom.kind != "all_of_plane":
        raise InadmissibleData(f"graph is not entire ({dom.kind}: {dom.description})")
    c = d.samples()
    a_s, b_s = d.ev("dA", c), d.ev("dB", c)
    if np.all(np.abs(a_s) <= 1e-12) and np.all(np.abs(b_s) <= 1e-12):
        A0, B0 = float(d.ev("A", 0.0)), float(d.ev("B", 0.0))
        return VariationReport("vertical_plane", plane={"w": A0, "c": B0})
    c0 = _pick_c0(d)
    a, b = float(d.ev("dA", c0)), float(d.ev("dB", c0))
    chart = CharacteristicChart(d)
    psi, zeta = transport_witness(chart, c0, delta, eps, a, b)
    span = psi.hi - psi.lo
    phi = synthesize_phi(chart, lo=psi.lo - 0.01 * span, hi=psi.hi + 0.01 * span)
    q = q or QuadratureSpec(order=6, cells=48)
    g2, g2_err = second_variation_stationary(phi, psi, q, with_error=True)
    g1 = first_variation(phi, psi, q)
    g0 = area(phi, psi.box, q)
    _, lhs, rhs, ratio = dgn_witness(a, b, eps)
    verdict = "non_minimizing" if g2 < -1e-3 else "undecided"
    return VariationReport(
        verdict, g0=g0, g1=g1, g2=g2, errors={"g2": g2_err},
        witness={"a": a, "b": b, "c0": c0, "epsilon": eps, "delta": delta,
                 "lhs": lhs, "rhs": rhs, "ratio": ratio},
    )
