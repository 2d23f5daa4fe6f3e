"""Entire solutions of the double Burgers equation by characteristics.

Initial data (A, B) generate the parabolas x(c, t) = A(c) t^2/2 + B(c) t + c
along which u = A(c) t + B(c).  Inverting c -> x(c, t) gives u(x, t), and the
change of variables phi(eta, tau) = u(-tau/4, eta) turns u into a stationary
intrinsic graph in H^1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .graph import GraphFunction
from .rootfind import ChartError, DegenerateChart, OutsideImage, invert_increasing

__all__ = [
    "ChartError",
    "DegenerateChart",
    "OutsideImage",
    "InitialData",
    "Admissibility",
    "DomainVerdict",
    "CharacteristicChart",
    "admissibility_check",
    "char_position",
    "chart_invert",
    "synthesize_u",
    "synthesize_phi",
    "domain_classification",
    "burgers_residual",
    "double_burgers",
]

FD_STEP = 1e-6
FD_STEP2 = 1e-4
SQRT2 = np.sqrt(2.0)


def _fd1(f, h):
    return lambda c: (f(c + h) - f(c - h)) / (2 * h)


@dataclass(frozen=True)
class InitialData:
    """Profiles A(c) = L_u u(c, 0) and B(c) = u(c, 0) with derivatives.

    Derivatives left as None are replaced by central differences.  `image`
    optionally records a known description of the chart image when it is
    a proper subset of the plane.
    """

    A: Callable
    B: Callable
    dA: Callable | None = None
    dB: Callable | None = None
    d2A: Callable | None = None
    d2B: Callable | None = None
    c_window: tuple = (-10.0, 10.0)
    name: str = ""
    image: str | None = None

    def __post_init__(self):
        lo, hi = self.c_window
        if not lo < hi:
            raise ValueError("c_window must be an increasing interval")
        if self.dA is None:
            object.__setattr__(self, "dA", _fd1(self.A, FD_STEP))
        if self.dB is None:
            object.__setattr__(self, "dB", _fd1(self.B, FD_STEP))
        if self.d2A is None:
            object.__setattr__(self, "d2A", _fd1(self.dA, FD_STEP2))
        if self.d2B is None:
            object.__setattr__(self, "d2B", _fd1(self.dB, FD_STEP2))

    @classmethod
    def from_samples(cls, c, A, B, name="grid"):
        """Cubic-spline profiles through samples (c_i, A_i, B_i)."""
        c = np.asarray(c, dtype=float)
        sa, sb = CubicSpline(c, A), CubicSpline(c, B)
        return cls(A=sa, B=sb, dA=sa.derivative(), dB=sb.derivative(),
                   d2A=sa.derivative(2), d2B=sb.derivative(2),
                   c_window=(float(c[0]), float(c[-1])), name=name)

    def samples(self, num=2001):
        return np.linspace(*self.c_window, num)

    def ev(self, name, c):
        c = np.asarray(c, dtype=float)
        return np.broadcast_to(np.asarray(getattr(self, name)(c), dtype=float), c.shape)


@dataclass(frozen=True)
class Admissibility:
    admissible: bool
    c_star: float | None = None

    @property
    def verdict(self) -> str:
        return "admissible" if self.admissible else "violated"


@dataclass(frozen=True)
class DomainVerdict:
    kind: str
    description: str = ""
    evidence: dict = field(default_factory=dict)


def admissibility_check(d: InitialData, samples=None) -> Admissibility:
    """At each sample either A' = B' = 0 or B'^2 < 2A'; report the first failure."""
    c = d.samples() if samples is None else np.asarray(samples, dtype=float)
    a, b = d.ev("dA", c), d.ev("dB", c)
    flat = (np.abs(a) <= 1e-12) & (np.abs(b) <= 1e-12)
    bad = ~flat & (b * b >= 2 * a - 1e-12)
    if bad.any():
        return Admissibility(False, float(c[np.argmax(bad)]))
    return Admissibility(True)


def char_position(d: InitialData, c, t):
    c = np.asarray(c, dtype=float)
    return d.ev("A", c) * t**2 / 2 + d.ev("B", c) * t + c


class CharacteristicChart:
    """The map F(c, t) = (x(c, t), t) with inverse and derivatives of u."""

    def __init__(self, data: InitialData):
        self.data = data

    def x_of(self, c, t):
        return char_position(self.data, c, t)

    def jacobian(self, c, t):
        d = self.data
        return d.ev("dA", c) * t**2 / 2 + d.ev("dB", c) * t + 1

    def c_of(self, x, t):
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        return invert_increasing(self.x_of, x, self.jacobian, args=(t,))

    def u_derivatives(self, x, t):
        """u and its partials up to order two at (x, t), keyed by name."""
        d = self.data
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        c = self.c_of(x, t)
        A, B = d.ev("A", c), d.ev("B", c)
        a1, b1, a2, b2 = d.ev("dA", c), d.ev("dB", c), d.ev("d2A", c), d.ev("d2B", c)
        J = a1 * t**2 / 2 + b1 * t + 1
        u = A * t + B
        p = a1 * t + b1
        ux = p / J
        uxx = ((a2 * t + b2) * J - p * (a2 * t**2 / 2 + b2 * t)) / J**3
        ut = A - u * ux
        uxt = a1 / J - ux**2 - u * uxx
        utt = -a1 * u / J - ut * ux - u * uxt
        return {"c": c, "A": A, "u": u, "ux": ux, "ut": ut, "uxx": uxx, "uxt": uxt, "utt": utt, "J": J}


def chart_invert(chart: CharacteristicChart, x, t):
    """c(x, t); raises DegenerateChart or OutsideImage when inversion is impossible."""
    return chart.c_of(x, t)


def synthesize_u(chart: CharacteristicChart, x, t):
    c = chart.c_of(x, t)
    return chart.data.ev("A", c) * t + chart.data.ev("B", c)


def synthesize_phi(chart: CharacteristicChart, lo=(-4.0, -4.0), hi=(4.0, 4.0)) -> GraphFunction:
    """phi(eta, tau) = u(-tau/4, eta) with closed-form derivatives through the chart."""

    def parts(A):
        A = np.asarray(A, dtype=float)
        return chart.u_derivatives(-A[..., 1] / 4, A[..., 0])

    def f(A):
        return parts(A)["u"]

    def grad(A):
        p = parts(A)
        return np.stack([p["ut"], -p["ux"] / 4], axis=-1)

    def hess(A):
        p = parts(A)
        H = np.empty(p["u"].shape + (2, 2))
        H[..., 0, 0] = p["utt"]
        H[..., 0, 1] = H[..., 1, 0] = -p["uxt"] / 4
        H[..., 1, 1] = p["uxx"] / 16
        return H

    return GraphFunction(dim=2, f=f, grad=grad, hess=hess, lo=lo, hi=hi, h=1e-3,
                         name=f"chars[{chart.data.name}]")


def _side_ok(d: InitialData, sign: int, horizon: float):
    """Sampled sufficient conditions for x(c, t) -> sign * inf as c -> sign * inf."""
    c = sign * np.geomspace(1.0, horizon, 801)
    A, B = d.ev("A", c), d.ev("B", c)
    tail = np.abs(c) >= horizon / 1e3
    At, Bt, ct = A[tail], B[tail], c[tail]
    ev = {}
    if np.all(np.isfinite(At)) and abs(At[-1] - At[0]) <= 1e-6 * (1 + abs(At[-1])):
        ev["finite_limit"] = float(At[-1])
        return True, ev
    if not np.all(np.isfinite(At)) or np.sign(At[-1]) != sign:
        ev["limit"] = "not divergent in the monotone direction"
        return False, ev
    ratio = np.abs(At / ct)
    ev["min_A_over_c"] = float(ratio.min())
    ev["max_A_over_c"] = float(ratio.max())
    with np.errstate(invalid="ignore", divide="ignore"):
        q = np.abs(Bt / np.sqrt(ct * At))
    ev["min_B_ratio"] = float(np.nanmin(q))
    ok = ratio.min() <= 1e-3 or ratio.max() >= 1e3 or np.nanmin(q) < SQRT2 - 1e-6
    return bool(ok), ev


def domain_classification(d: InitialData, horizon: float = 1e8) -> DomainVerdict:
    """Numerical evidence that the chart covers the whole plane.

    Limits are sampled on a geometric grid up to |c| = horizon and judged
    over its last three decades.
    """
    adm = admissibility_check(d)
    if not adm.admissible:
        return DomainVerdict("inadmissible", f"B'^2 >= 2A' at c = {adm.c_star:g}")
    right, ev_r = _side_ok(d, 1, horizon)
    left, ev_l = _side_ok(d, -1, horizon)
    evidence = {"plus": ev_r, "minus": ev_l, "horizon": horizon}
    if right and left:
        return DomainVerdict("all_of_plane", "x(., t) is onto for every t (numerical evidence)", evidence)
    if d.image is not None:
        return DomainVerdict("proper_subset", d.image, evidence)
    return DomainVerdict("undetermined", "sufficient conditions not verified", evidence)


def double_burgers(u, ux, ut, uxx, uxt, utt):
    """(L_u)^2 u with L_u v = v_t + u v_x, expanded in partials of u."""
    return utt + 2 * u * uxt + u * u * uxx + ux * (ut + u * ux)


def burgers_residual(u, xs, ts, h, chart: CharacteristicChart | None = None):
    """Max of |L_u u - A(c)| (needs a chart) and of |(L_u)^2 u| on a grid.

    `u` is either a callable u(x, t) or an array sampled on xs x ts with
    uniform spacing h; in the sampled case only interior nodes are used.
    """
    xs = np.asarray(xs, dtype=float)
    ts = np.asarray(ts, dtype=float)
    X, T = np.meshgrid(xs, ts, indexing="ij")
    if callable(u):
        U = lambda dx, dt: np.asarray(u(X + dx * h, T + dt * h), dtype=float)
        u0 = U(0, 0)
        ux = (U(1, 0) - U(-1, 0)) / (2 * h)
        ut = (U(0, 1) - U(0, -1)) / (2 * h)
        uxx = (U(1, 0) - 2 * u0 + U(-1, 0)) / h**2
        utt = (U(0, 1) - 2 * u0 + U(0, -1)) / h**2
        uxt = (U(1, 1) - U(1, -1) - U(-1, 1) + U(-1, -1)) / (4 * h**2)
    else:
        V = np.asarray(u, dtype=float)
        if V.shape != X.shape:
            raise ValueError("sampled u must match the grid")
        if V.shape[0] < 3 or V.shape[1] < 3:
            raise ValueError("grid too small for a central stencil")
        if not (np.allclose(np.diff(xs), h) and np.allclose(np.diff(ts), h)):
            raise ValueError("sampled u needs uniform spacing h on both axes")
        s = (slice(1, -1), slice(1, -1))
        u0 = V[s]
        ux = (V[2:, 1:-1] - V[:-2, 1:-1]) / (2 * h)
        ut = (V[1:-1, 2:] - V[1:-1, :-2]) / (2 * h)
        uxx = (V[2:, 1:-1] - 2 * u0 + V[:-2, 1:-1]) / h**2
        utt = (V[1:-1, 2:] - 2 * u0 + V[1:-1, :-2]) / h**2
        uxt = (V[2:, 2:] - V[2:, :-2] - V[:-2, 2:] + V[:-2, :-2]) / (4 * h**2)
        X, T = X[s], T[s]
    r2 = float(np.max(np.abs(double_burgers(u0, ux, ut, uxx, uxt, utt))))
    r1 = None
    if chart is not None:
        A = chart.data.ev("A", chart.c_of(X, T))
        r1 = float(np.max(np.abs(ut + u0 * ux - A)))
    return r1, r2
