"""Intrinsic X_1-graphs: the nonlinear gradient, area, normal and residuals.

A graph is parametrised by a scalar field phi on a box of base parameters
A = (eta, v_2..v_n, v_{n+2}..v_{2n}, tau).  All evaluators accept arrays of
base points with shape (..., 2n).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import spsolve

from .core import base_point
from .quadrature import QuadratureSpec, tensor_integrate

__all__ = [
    "OutsideDomain",
    "OutsideCylinder",
    "ScalarField",
    "GraphFunction",
    "wphi_apply",
    "wphi_operators",
    "area",
    "horizontal_normal",
    "subgraph_membership",
    "mse_residual",
    "classical_residual",
    "classical_lift_residual",
    "lift",
    "dilate_graph",
]


class OutsideDomain(ValueError):
    """Evaluation point lies outside the field's domain (or its stencil margin)."""


class OutsideCylinder(ValueError):
    """The base point of a group element lies outside the parameter box."""


def fd_gradient(f, X, h):
    X = np.asarray(X, dtype=float)
    d = X.shape[-1]
    out = np.empty(X.shape)
    for k in range(d):
        e = np.zeros(d)
        e[k] = h
        out[..., k] = (f(X + e) - f(X - e)) / (2 * h)
    return out


def fd_hessian(f, X, h, grad=None):
    """Central-difference Hessian; differentiates `grad` when it is known."""
    X = np.asarray(X, dtype=float)
    d = X.shape[-1]
    H = np.empty(X.shape + (d,))
    if grad is not None:
        for k in range(d):
            e = np.zeros(d)
            e[k] = h
            H[..., k, :] = (grad(X + e) - grad(X - e)) / (2 * h)
        return 0.5 * (H + np.swapaxes(H, -1, -2))
    f0 = f(X)
    for k in range(d):
        ek = np.zeros(d)
        ek[k] = h
        H[..., k, k] = (f(X + ek) - 2 * f0 + f(X - ek)) / h**2
        for l in range(k):
            el = np.zeros(d)
            el[l] = h
            v = (f(X + ek + el) - f(X + ek - el) - f(X - ek + el) + f(X - ek - el)) / (4 * h**2)
            H[..., k, l] = H[..., l, k] = v
    return H


@dataclass(frozen=True)
class ScalarField:
    """A scalar field on a box of R^dim with optional closed-form derivatives.

    Missing derivatives fall back to central differences at step h.  The
    box may have infinite sides.
    """

    dim: int
    f: Callable
    grad: Callable | None = None
    hess: Callable | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    h: float = 1e-4
    margin: float = 0.0

    def __post_init__(self):
        lo = np.full(self.dim, -np.inf) if self.lo is None else np.asarray(self.lo, dtype=float)
        hi = np.full(self.dim, np.inf) if self.hi is None else np.asarray(self.hi, dtype=float)
        if lo.shape != (self.dim,) or hi.shape != (self.dim,):
            raise ValueError(f"domain bounds must have length {self.dim}")
        if np.any(lo >= hi):
            raise ValueError("empty domain box")
        if not self.h > 0:
            raise ValueError("finite-difference step must be positive")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def box(self):
        return np.stack([self.lo, self.hi], axis=-1)

    def _check(self, X, margin=0.0):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.dim:
            raise ValueError(f"points must have last axis {self.dim}, got {X.shape[-1]}")
        m = self.margin + margin
        if np.any(X < self.lo + m) or np.any(X > self.hi - m):
            raise OutsideDomain(f"point outside domain box (margin {m:g})")
        return X

    def value(self, X):
        return np.asarray(self.f(self._check(X)), dtype=float)

    def gradient(self, X, h=None):
        if self.grad is not None and h is None:
            return np.asarray(self.grad(self._check(X)), dtype=float)
        h = self.h if h is None else h
        return fd_gradient(self.f, self._check(X, h), h)

    def hessian(self, X, h=None):
        if self.hess is not None and h is None:
            return np.asarray(self.hess(self._check(X)), dtype=float)
        step = self.h if h is None else h
        # with an explicit h the oracle uses values only
        grad = self.grad if h is None else None
        return fd_hessian(self.f, self._check(X, 2 * step), step, grad)


@dataclass(frozen=True)
class GraphFunction(ScalarField):
    """Parametrisation phi of an intrinsic X_1-graph in H^n, on a box of R^(2n)."""

    name: str = ""

    @property
    def n(self) -> int:
        return self.dim // 2

    @classmethod
    def closed_form(cls, n, f, grad=None, hess=None, lo=None, hi=None, h=1e-4, name=""):
        return cls(dim=2 * n, f=f, grad=grad, hess=hess, lo=lo, hi=hi, h=h, name=name)

    @classmethod
    def from_grid(cls, axes, values, h=1e-4, name="grid"):
        """Cubic interpolant of samples on a tensor grid; derivatives by finite differences."""
        axes = [np.asarray(a, dtype=float) for a in axes]
        values = np.asarray(values, dtype=float)
        if len(axes) % 2:
            raise ValueError("grid must have an even number of axes")
        # a direct solve: the default iterative spline fit stalls near 1e-6
        interp = RegularGridInterpolator(axes, values, method="cubic", solver=spsolve)

        def f(X):
            X = np.asarray(X, dtype=float)
            return interp(X.reshape(-1, X.shape[-1])).reshape(X.shape[:-1])

        lo = np.array([a[0] for a in axes])
        hi = np.array([a[-1] for a in axes])
        return cls(dim=len(axes), f=f, lo=lo, hi=hi, h=h, margin=h, name=name)


def wphi_operators(phi: GraphFunction, A, grad=None):
    """Coefficient matrix C with (W operators) = C @ (d/dA), shape (..., 2n-1, 2n).

    Rows are ordered (X~_2..X~_n, W_{n+1}, Y~_2..Y~_n); W_{n+1} depends on
    phi itself, so C is evaluated along the graph.
    """
    A = np.asarray(A, dtype=float)
    n = phi.n
    C = np.zeros(A.shape[:-1] + (2 * n - 1, 2 * n))
    for j in range(2, n + 1):
        r, vj, vjn = j - 2, j - 1, n + j - 2
        C[..., r, vj] = 1.0
        C[..., r, -1] = 2.0 * A[..., vjn]
        r2 = n + j - 2
        C[..., r2, vjn] = 1.0
        C[..., r2, -1] = -2.0 * A[..., vj]
    C[..., n - 1, 0] = 1.0
    C[..., n - 1, -1] = -4.0 * phi.value(A)
    return C


def _wphi_from(A, p, g, n):
    w = np.empty(A.shape[:-1] + (2 * n - 1,))
    pt = g[..., -1]
    for j in range(2, n + 1):
        vj, vjn = j - 1, n + j - 2
        w[..., j - 2] = g[..., vj] + 2.0 * A[..., vjn] * pt
        w[..., n + j - 2] = g[..., vjn] - 2.0 * A[..., vj] * pt
    w[..., n - 1] = g[..., 0] - 4.0 * p * pt
    return w


def wphi_apply(phi: GraphFunction, A, h=None):
    """W^phi phi at A, last axis of length 2n-1 ordered (X~_j, W_{n+1}, Y~_j)."""
    A = np.asarray(A, dtype=float)
    return _wphi_from(A, phi.value(A), phi.gradient(A, h), phi.n)


def area(phi: GraphFunction, box=None, q: QuadratureSpec | None = None, breakpoints=None) -> float:
    """Integral of sqrt(1 + |W^phi phi|^2) over a box of base parameters."""
    box = phi.box if box is None else np.asarray(box, dtype=float)
    if not np.all(np.isfinite(box)):
        raise ValueError("area needs a bounded box")

    def integrand(X):
        w = wphi_apply(phi, X)
        return np.sqrt(1.0 + np.sum(w * w, axis=-1))

    return tensor_integrate(integrand, box, q, breakpoints)


def horizontal_normal(phi: GraphFunction, A):
    """Unit normal (-1, W^phi phi)/S on the frame (X_1..X_n, Y_1..Y_n)."""
    w = wphi_apply(phi, A)
    n = phi.n
    S = np.sqrt(1.0 + np.sum(w * w, axis=-1))
    out = np.empty(w.shape[:-1] + (2 * n,))
    out[..., 0] = -1.0
    out[..., 1:] = w
    return out / S[..., None]


def subgraph_membership(phi: GraphFunction, P):
    """True where P lies strictly on the x_1 < phi side of the graph."""
    A, s = base_point(P)
    if np.any(A < phi.lo) or np.any(A > phi.hi):
        raise OutsideCylinder("base point outside the parameter box")
    return s < phi.value(A)


def _wgrad(A, p, g, H, n):
    """Gradients (in A) of each W^phi component, shape (..., 2n-1, 2n)."""
    D = np.zeros(A.shape[:-1] + (2 * n - 1, 2 * n))
    pt = g[..., -1]
    for j in range(2, n + 1):
        vj, vjn = j - 1, n + j - 2
        D[..., j - 2, :] = H[..., vj, :] + 2.0 * A[..., vjn, None] * H[..., -1, :]
        D[..., j - 2, vjn] += 2.0 * pt
        D[..., n + j - 2, :] = H[..., vjn, :] - 2.0 * A[..., vj, None] * H[..., -1, :]
        D[..., n + j - 2, vj] -= 2.0 * pt
    D[..., n - 1, :] = H[..., 0, :] - 4.0 * pt[..., None] * g - 4.0 * p[..., None] * H[..., -1, :]
    return D


def mse_residual(phi: GraphFunction, A, h=None):
    """Residual of the intrinsic minimal surface equation at A.

    For n = 1 this is (W^phi)^2 phi.  For n >= 2 it is the divergence
    sum_k D_k (w_k / S) with w = W^phi phi, S = sqrt(1+|w|^2) and D_k the
    k-th W^phi operator.  With h given, derivatives of phi come from
    central differences at that step.
    """
    A = np.asarray(A, dtype=float)
    p = phi.value(A)
    g = phi.gradient(A, h)
    H = phi.hessian(A, h)
    if phi.n == 1:
        pe, pt = g[..., 0], g[..., 1]
        pee, pet, ptt = H[..., 0, 0], H[..., 0, 1], H[..., 1, 1]
        return (pee - 4 * pe * pt - 8 * p * pet + 16 * p * pt**2 + 16 * p**2 * ptt)
    n = phi.n
    w = _wphi_from(A, p, g, n)
    C = wphi_operators(phi, A)
    # M[k, l] = D_k w_l
    M = np.einsum("...km,...lm->...kl", C, _wgrad(A, p, g, H, n))
    S2 = 1.0 + np.sum(w * w, axis=-1)
    S = np.sqrt(S2)
    tr = np.trace(M, axis1=-2, axis2=-1)
    quad = np.einsum("...k,...kl,...l->...", w, M, w)
    return tr / S - quad / (S * S2)


def classical_residual(psi: ScalarField, B, h=None):
    """div(grad psi / sqrt(1 + |grad psi|^2)) at B."""
    g = psi.gradient(B, h)
    H = psi.hessian(B, h)
    S2 = 1.0 + np.sum(g * g, axis=-1)
    lap = np.trace(H, axis1=-2, axis2=-1)
    quad = np.einsum("...k,...kl,...l->...", g, H, g)
    return lap / np.sqrt(S2) - quad / S2**1.5


def lift(psi: ScalarField, name="lift") -> GraphFunction:
    """The tau-independent graph phi(eta, v, tau) = psi(eta, v) in H^n, 2n-1 = psi.dim."""
    if psi.dim % 2 == 0:
        raise ValueError("psi must live on an odd-dimensional space R^(2n-1)")
    d = psi.dim + 1

    def f(A):
        return psi.value(np.asarray(A)[..., :-1])

    def grad(A):
        A = np.asarray(A)
        out = np.zeros(A.shape)
        out[..., :-1] = psi.gradient(A[..., :-1])
        return out

    def hess(A):
        A = np.asarray(A)
        out = np.zeros(A.shape + (d,))
        out[..., :-1, :-1] = psi.hessian(A[..., :-1])
        return out

    lo = np.append(psi.lo, -np.inf)
    hi = np.append(psi.hi, np.inf)
    return GraphFunction(dim=d, f=f, grad=grad, hess=hess, lo=lo, hi=hi, h=psi.h, name=name)


def classical_lift_residual(psi: ScalarField, B, h=None):
    """Classical minimal surface residual of psi; equals mse_residual of lift(psi)."""
    return classical_residual(psi, B, h)


def dilate_graph(phi: GraphFunction, lam: float) -> GraphFunction:
    """Parametrisation of delta_lam applied to the graph of phi.

    The base box scales by lam in (eta, v) and lam^2 in tau, and
    phi_lam(A) = lam * phi(A / scale).
    """
    if not lam > 0:
        raise ValueError(f"dilation factor must be positive, got {lam}")
    scale = np.full(phi.dim, float(lam))
    scale[-1] = lam * lam

    def f(A):
        return lam * phi.value(np.asarray(A) / scale)

    def grad(A):
        return lam * phi.gradient(np.asarray(A) / scale) / scale

    def hess(A):
        return lam * phi.hessian(np.asarray(A) / scale) / np.outer(scale, scale)

    return GraphFunction(dim=phi.dim, f=f, grad=grad, hess=hess, lo=phi.lo * scale, hi=phi.hi * scale,
                         h=phi.h, name=f"{phi.name}@{lam:g}")
