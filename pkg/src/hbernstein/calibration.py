"""Calibration certificates and weak minimal-surface checks.

A horizontal section nu is a map from points of H^n to coefficient vectors
on the frame (X_1..X_n, Y_1..Y_n).  A unit section with vanishing
horizontal divergence that agrees with a surface's normal certifies that
the surface minimises perimeter; the functions here measure each of the
three conditions numerically.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .core import frame_coeffs, graph_point, group_index, group_mul, dilate
from .graph import GraphFunction, OutsideDomain, horizontal_normal
from .quadrature import QuadratureSpec, axis_rule, tensor_integrate
from .rootfind import invert_increasing

__all__ = [
    "MarginError",
    "CharacteristicPoint",
    "ResolutionError",
    "HorizontalSection",
    "CalibrationReport",
    "LipschitzProfile",
    "divx_residual",
    "calibrate_verdict",
    "tgraph_normal",
    "smoothstep_bump",
    "bump_battery",
    "weak_divergence_residual",
    "lipschitz_phi_from_beta",
    "kink_images",
    "wphi_ae_residual",
    "mollify_graph",
    "mollified_sweep",
    "mollifier_mass",
    "mollify_section",
]

NORM_TOL = 1e-10
DIV_TOL = 1e-6
MATCH_TOL = 1e-8


class MarginError(ValueError):
    """Evaluation points come too close to a declared singular set."""


class CharacteristicPoint(ValueError):
    """The horizontal gradient of a t-graph vanishes."""


class ResolutionError(ValueError):
    """A grid is too coarse for the requested mollification scale."""


@dataclass(frozen=True)
class HorizontalSection:
    """A field nu: H^n -> R^(2n) with an optional singular set.

    `singular_distance(P)` is a lower bound for the distance from P to the
    set where nu is not smooth; None means nu is smooth everywhere.
    """

    n: int
    f: Callable
    singular_distance: Callable | None = None
    name: str = ""

    def __call__(self, P):
        P = np.asarray(P, dtype=float)
        if group_index(P) != self.n:
            raise ValueError(f"section lives on H^{self.n}")
        return np.asarray(self.f(P), dtype=float)

    @classmethod
    def constant(cls, coeffs, name="constant"):
        coeffs = np.asarray(coeffs, dtype=float)
        n = coeffs.size // 2
        return cls(n, lambda P: np.broadcast_to(coeffs, np.shape(P)[:-1] + coeffs.shape).copy(), name=name)

    @classmethod
    def from_grid(cls, axes, values, singular_distance=None, name="grid"):
        """Piecewise-linear section sampled on a tensor grid of H^n; values shape grid + (2n,)."""
        axes = [np.asarray(a, dtype=float) for a in axes]
        interp = RegularGridInterpolator(axes, np.asarray(values, dtype=float))
        n = group_index(np.empty(len(axes)))

        def f(P):
            return interp(P.reshape(-1, P.shape[-1])).reshape(P.shape[:-1] + (2 * n,))

        sec = cls(n, f, singular_distance, name)
        object.__setattr__(sec, "spacing", max(float(np.max(np.diff(a))) for a in axes))
        return sec


@dataclass
class CalibrationReport:
    max_norm_defect: float
    max_div_residual: float
    normal_match_defect: float
    thresholds: dict = field(default_factory=lambda: {"norm": NORM_TOL, "div": DIV_TOL, "match": MATCH_TOL})

    @property
    def verdict(self) -> str:
        ok = (self.max_norm_defect <= self.thresholds["norm"]
              and self.max_div_residual <= self.thresholds["div"]
              and self.normal_match_defect <= self.thresholds["match"])
        return "calibrated" if ok else "not_calibrated"

    def to_dict(self):
        return {
            "max_norm_defect": self.max_norm_defect,
            "max_div_residual": self.max_div_residual,
            "normal_match_defect": self.normal_match_defect,
            "thresholds": dict(self.thresholds),
            "verdict": self.verdict,
        }


def _margin(nu: HorizontalSection, P, h):
    if nu.singular_distance is None:
        return
    d = np.asarray(nu.singular_distance(P))
    if np.any(d <= h):
        raise MarginError(f"points within {h:g} of the singular set of {nu.name or 'section'}")


def divx_residual(nu: HorizontalSection, P, h: float = 1e-5):
    """Max over points P of |sum_j V_j nu_j|, V_j the j-th frame field.

    Each V_j nu_j is a central difference along the straight line through
    P in the direction V_j(P).
    """
    P = np.asarray(P, dtype=float)
    _margin(nu, P, 2 * h)
    F = frame_coeffs(P)
    total = np.zeros(P.shape[:-1])
    for j in range(2 * nu.n):
        V = F[..., :, j]
        total += (nu(P + h * V)[..., j] - nu(P - h * V)[..., j]) / (2 * h)
    return float(np.max(np.abs(total)))


def calibrate_verdict(nu: HorizontalSection, phi: GraphFunction, base_points, h: float = 1e-5,
                      offsets=(-0.25, 0.0, 0.25)) -> CalibrationReport:
    """Check the three calibration conditions near the graph of phi.

    Norm and divergence are measured on the graph and on its translates
    along x_1 by `offsets`; the normal is compared on the graph itself.
    """
    A = np.asarray(base_points, dtype=float)
    s = phi.value(A)
    on_graph = graph_point(A, s)
    region = np.concatenate([graph_point(A, s + o).reshape(-1, 2 * phi.n + 1) for o in offsets])
    norm_defect = float(np.max(np.maximum(np.linalg.norm(nu(region), axis=-1) - 1.0, 0.0)))
    div = divx_residual(nu, region, h)
    match = float(np.max(np.abs(nu(on_graph) - horizontal_normal(phi, A))))
    return CalibrationReport(norm_defect, div, match)


def tgraph_normal(phi_t, xy, grad=None):
    """Unit vector (-phi_x + 2y, -phi_y - 2x) / |.| for the t-graph t = phi_t(x, y).

    `grad` maps points (..., 2) to the gradient of phi_t; without it
    central differences of phi_t are used.
    """
    xy = np.asarray(xy, dtype=float)
    if grad is None:
        h = 1e-6
        g = np.stack([(phi_t(xy + [h, 0]) - phi_t(xy - [h, 0])) / (2 * h),
                      (phi_t(xy + [0, h]) - phi_t(xy - [0, h])) / (2 * h)], axis=-1)
    else:
        g = np.asarray(grad(xy), dtype=float)
    v = np.stack([-g[..., 0] + 2 * xy[..., 1], -g[..., 1] - 2 * xy[..., 0]], axis=-1)
    r = np.linalg.norm(v, axis=-1)
    if np.any(r < 1e-12):
        raise CharacteristicPoint("horizontal gradient vanishes")
    return v / r[..., None]


def smoothstep_bump(center, radius):
    """C^1 bump prod_k (1 - 3 s_k^2 + 2 |s_k|^3) on |s_k| < 1, with its gradient."""
    center = np.asarray(center, dtype=float)

    def parts(X):
        s = (X - center) / radius
        a = np.abs(s)
        inside = a < 1
        v = np.where(inside, 1 - 3 * a**2 + 2 * a**3, 0.0)
        d = np.where(inside, (-6 * s + 6 * s * a) / radius, 0.0)
        return v, d

    def f(X):
        return np.prod(parts(X)[0], axis=-1)

    def grad(X):
        v, d = parts(X)
        out = np.empty(np.shape(X))
        for k in range(center.size):
            out[..., k] = d[..., k] * np.prod(np.delete(v, k, axis=-1), axis=-1)
        return out

    return f, grad


def bump_battery(box, centers_per_axis: int = 5, scales=3):
    """Bumps on a centers_per_axis^2 grid of centres and dyadic radii, inside a 2-D box."""
    box = np.asarray(box, dtype=float)
    out = []
    width = box[:, 1] - box[:, 0]
    for k in range(scales):
        r = 0.5 * float(width.min()) / (centers_per_axis + 1) * 2.0 ** (-k) * 2
        cx = np.linspace(box[0, 0] + r, box[0, 1] - r, centers_per_axis)
        cy = np.linspace(box[1, 0] + r, box[1, 1] - r, centers_per_axis)
        for x in cx:
            for y in cy:
                f, g = smoothstep_bump([x, y], r)
                out.append({"center": (float(x), float(y)), "radius": r, "f": f, "grad": g})
    return out


def weak_divergence_residual(N: Callable, battery, q: QuadratureSpec | None = None, jumps=((), ())):
    """Max over the battery of |integral <N, grad phi_test>|.

    `jumps` lists per-axis coordinates where N may be discontinuous; the
    quadrature panels are split there and at each bump's kinks.
    """
    q = q or QuadratureSpec(order=8, cells=4)
    worst = 0.0
    for b in battery:
        (x, y), r = b["center"], b["radius"]
        box = [(x - r, x + r), (y - r, y + r)]
        bps = [tuple(jumps[0]) + (x,), tuple(jumps[1]) + (y,)]
        g = b["grad"]
        val = tensor_integrate(lambda X: np.sum(N(X) * g(X), axis=-1), box, q, bps)
        worst = max(worst, abs(val))
    return worst


@dataclass(frozen=True)
class LipschitzProfile:
    """A Lipschitz function beta of t with constant L and declared kinks."""

    beta: Callable
    L: float
    kinks: tuple = ()
    dbeta: Callable | None = None
    name: str = ""

    def __post_init__(self):
        if not (self.L >= 0 and np.isfinite(self.L)):
            raise ValueError("Lipschitz constant must be finite")

    def slope(self, t):
        if self.dbeta is not None:
            return np.asarray(self.dbeta(t), dtype=float)
        h = 1e-7
        return (self.beta(t + h) - self.beta(t - h)) / (2 * h)

    def check_lipschitz(self, lo=-10.0, hi=10.0, num=20001):
        t = np.linspace(lo, hi, num)
        q = np.abs(np.diff(self.beta(t))) / np.diff(t)
        return float(q.max()) <= self.L * (1 + 1e-9) + 1e-15


def lipschitz_phi_from_beta(p: LipschitzProfile, tau_range=(-np.inf, np.inf)) -> GraphFunction:
    """phi(eta, tau) = beta(t) where tau = t - 4 eta beta(t), for |eta| < 1/(4L)."""
    half = np.inf if p.L == 0 else 1 / (4 * p.L)

    def t_of(A):
        A = np.asarray(A, dtype=float)
        eta, tau = np.broadcast_arrays(A[..., 0], A[..., 1])
        if np.any(np.abs(eta) >= half):
            raise OutsideDomain(f"|eta| must be below 1/(4L) = {half:g}")
        return invert_increasing(
            lambda t, e: t - 4 * e * p.beta(t), tau,
            lambda t, e: 1 - 4 * e * p.slope(t), guess=tau, args=(eta,),
        )

    def f(A):
        return np.asarray(p.beta(t_of(A)), dtype=float)

    def grad(A):
        A = np.asarray(A, dtype=float)
        t = t_of(A)
        b, db = p.beta(t), p.slope(t)
        denom = 1 - 4 * A[..., 0] * db
        return np.stack([db * 4 * b / denom, db / denom], axis=-1)

    lo = [-half, tau_range[0]]
    hi = [half, tau_range[1]]
    return GraphFunction(dim=2, f=f, grad=grad, lo=lo, hi=hi, h=1e-4, name=f"profile[{p.name}]")


def kink_images(p: LipschitzProfile, eta):
    """tau-coordinates of the kink lines t = k at the given eta."""
    eta = np.asarray(eta, dtype=float)
    return [k - 4 * eta * p.beta(np.float64(k)) for k in p.kinks]


_C4 = np.array([1, -8, 0, 8, -1]) / 12.0
_F4 = np.array([-25, 48, -36, 16, -3]) / 12.0


def _d4(f, A, axis, h, sides):
    """Fourth-order derivative along an axis; one-sided where `sides` is +1/-1."""
    e = np.zeros(2)
    e[axis] = h
    out = np.zeros(A.shape[:-1])
    central = sides == 0
    for k, c in zip(range(-2, 3), _C4):
        if c:
            out = out + np.where(central, c * f(A + k * e), 0.0)
    for sgn in (1, -1):
        m = sides == sgn
        if m.any():
            acc = np.zeros(A.shape[:-1])
            for k, c in enumerate(_F4):
                acc = acc + c * f(A + sgn * k * e)
            out = np.where(m, sgn * acc, out)
    return out / h


def wphi_ae_residual(p: LipschitzProfile, points, h: float = 2e-5, margin: float | None = None):
    """Max |W^phi phi| by finite differences on points away from kink images.

    Stencils that would cross a kink line switch to one-sided formulas on
    the side of the point.
    """
    phi = lipschitz_phi_from_beta(p)
    A = np.asarray(points, dtype=float)
    margin = 2 * h if margin is None else margin
    tau_side = np.zeros(A.shape[:-1], dtype=int)
    eta_side = np.zeros(A.shape[:-1], dtype=int)
    for k in p.kinks:
        bk = float(p.beta(np.float64(k)))
        dist = A[..., 1] - (k - 4 * A[..., 0] * bk)
        if np.any(np.abs(dist) <= margin):
            raise MarginError("points too close to the image of a kink")
        tau_side = np.where(np.abs(dist) < 4 * h, np.sign(dist).astype(int), tau_side)
        if bk != 0:
            # the kink line is slanted, so eta-stencils can cross it too
            eta_star = (k - A[..., 1]) / (4 * bk)
            off = A[..., 0] - eta_star
            eta_side = np.where(np.abs(off) < 4 * h, np.sign(off).astype(int), eta_side)
    f = phi.value
    pe = _d4(f, A, 0, h, eta_side)
    pt = _d4(f, A, 1, h, tau_side)
    return float(np.max(np.abs(pe - 4 * f(A) * pt)))


def _kernel_1d(s):
    return np.where(np.abs(s) < 1, (1 - s * s) ** 3, 0.0)


def _dkernel_1d(s):
    return np.where(np.abs(s) < 1, -6 * s * (1 - s * s) ** 2, 0.0)


def mollify_graph(phi: GraphFunction, eps: float, cells: int = 8, order: int = 8):
    """Euclidean tensor mollification of phi in (eta, tau) with derivatives on the kernel.

    Returns a function A -> (phi_eps, d_eta phi_eps, d_tau phi_eps).
    """
    s, w = axis_rule(-1.0, 1.0, cells, order)
    k, dk = _kernel_1d(s), _dkernel_1d(s)
    mass = float(np.dot(w, k))
    S1, S2 = np.meshgrid(s, s, indexing="ij")
    K = np.outer(w * k, w * k) / mass**2
    DK1 = np.outer(w * dk, w * k) / mass**2
    DK2 = np.outer(w * k, w * dk) / mass**2
    offs = np.stack([S1, S2], axis=-1) * eps

    def evaluate(A):
        A = np.asarray(A, dtype=float)
        # phi_eps(A) = sum K(s) phi(A - eps s); d/dA moves to the kernel with a 1/eps
        vals = phi.value(A[..., None, None, :] - offs)
        v = np.einsum("...ij,ij->...", vals, K)
        d1 = np.einsum("...ij,ij->...", vals, DK1) / eps
        d2 = np.einsum("...ij,ij->...", vals, DK2) / eps
        return v, d1, d2

    return evaluate


def mollified_sweep(p: LipschitzProfile, points, eps_list=(0.1, 0.05, 0.025)):
    """For each eps: max |W^{phi_eps} phi_eps| and max |phi_eps - phi| on the points."""
    phi = lipschitz_phi_from_beta(p)
    A = np.asarray(points, dtype=float)
    half = phi.hi[0]
    if np.any(np.abs(A[..., 0]) + max(eps_list) >= half):
        raise OutsideDomain("mollification window leaves the strip |eta| < 1/(4L)")
    rows = []
    for eps in eps_list:
        v, de, dt = mollify_graph(phi, eps)(A)
        rows.append({
            "epsilon": float(eps),
            "max_wphi": float(np.max(np.abs(de - 4 * v * dt))),
            "max_dev": float(np.max(np.abs(v - phi.value(A)))),
        })
    return rows


def _rho(W, n):
    z2 = np.sum(W[..., :2 * n] ** 2, axis=-1)
    r2 = np.maximum(z2, np.abs(W[..., 2 * n]))
    return np.where(r2 < 1, (1 - r2) ** 3, 0.0)


def _ball_rule(n, cells, order):
    nodes, weights = axis_rule(-1.0, 1.0, cells, order, breakpoints=(0.0,))
    grids = np.meshgrid(*([nodes] * (2 * n + 1)), indexing="ij")
    W = np.stack([g.ravel() for g in grids], axis=-1)
    wg = np.meshgrid(*([weights] * (2 * n + 1)), indexing="ij")
    wt = np.prod(np.stack([g.ravel() for g in wg], axis=-1), axis=-1)
    rho = _rho(W, n) * wt
    keep = rho > 0
    return W[keep], rho[keep]


def mollifier_mass(n: int, cells: int = 4, order: int = 6) -> float:
    """Quadrature value of the unnormalised bump over the unit ball of the homogeneous norm."""
    _, r = _ball_rule(n, cells, order)
    return float(r.sum())


def mollify_section(nu: HorizontalSection, eps: float, cells: int = 2, order: int = 5) -> HorizontalSection:
    """Group convolution (rho_eps * nu)(x) = int rho(w) nu(delta_eps(w)^-1 x) dw.

    rho is (1 - ||w||^2)^3 on the unit ball of the homogeneous norm; the
    discrete weights are normalised to unit mass.  Grid-backed sections
    need spacing at most eps/4.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    spacing = getattr(nu, "spacing", None)
    if spacing is not None and spacing > eps / 4:
        raise ResolutionError(f"grid spacing {spacing:g} exceeds eps/4 = {eps / 4:g}")
    W, r = _ball_rule(nu.n, cells, order)
    r = r / r.sum()
    Winv = -dilate(eps, W)

    def f(P):
        P = np.asarray(P, dtype=float)
        Q = group_mul(Winv, P[..., None, :])
        return np.einsum("...kj,k->...j", nu(Q), r)

    return HorizontalSection(nu.n, f, nu.singular_distance, f"mollified[{nu.name}]")
