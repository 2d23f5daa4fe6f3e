"""Heisenberg group arithmetic in exponential coordinates.

Points of H^n are stored as float arrays whose last axis has length 2n+1,
ordered (x_1..x_n, y_1..y_n, t).  Every function broadcasts over leading
axes, so a batch of points is just an array of shape (..., 2n+1).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DimensionError",
    "HPoint",
    "HorizontalVector",
    "BaseParamPoint",
    "group_index",
    "group_mul",
    "group_inv",
    "dilate",
    "hnorm",
    "dinf",
    "frame_coeffs",
    "lie_bracket",
    "iota",
    "graph_point",
    "base_point",
]


class DimensionError(ValueError):
    """Operands live in Heisenberg groups of different dimension."""


def group_index(coords) -> int:
    """Return n for an array whose last axis has length 2n+1."""
    m = np.shape(coords)[-1]
    if m < 3 or m % 2 == 0:
        raise DimensionError(f"last axis has length {m}, expected 2n+1 with n >= 1")
    return (m - 1) // 2


def _split(P):
    n = group_index(P)
    return P[..., :n], P[..., n:2 * n], P[..., 2 * n], n


def group_mul(P, Q):
    """Group product [z + w, t + s + 2 Im<z, conj w>]."""
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if P.shape[-1] != Q.shape[-1]:
        raise DimensionError(f"cannot multiply points of length {P.shape[-1]} and {Q.shape[-1]}")
    x, y, t, _ = _split(P)
    xp, yp, tp, _ = _split(Q)
    tt = t + tp + 2.0 * np.sum(y * xp - x * yp, axis=-1)
    return np.concatenate([x + xp, y + yp, tt[..., None]], axis=-1)


def group_inv(P):
    return -np.asarray(P, dtype=float)


def dilate(r, P):
    """Anisotropic dilation [r z, r^2 t]; r may be an array broadcasting against P[..., :1]."""
    r = np.asarray(r, dtype=float)
    if not np.all(r > 0):
        raise ValueError(f"dilation factor must be positive, got {r}")
    P = np.asarray(P, dtype=float)
    n = group_index(P)
    return P * np.where(np.arange(2 * n + 1) == 2 * n, r * r, r)


def hnorm(P):
    """Homogeneous norm max(|z|, |t|^(1/2))."""
    P = np.asarray(P, dtype=float)
    n = group_index(P)
    z = np.sqrt(np.sum(P[..., :2 * n] ** 2, axis=-1))
    return np.maximum(z, np.sqrt(np.abs(P[..., 2 * n])))


def dinf(P, Q):
    """Left-invariant distance ||P^-1 . Q||_inf."""
    return hnorm(group_mul(group_inv(P), Q))


def frame_coeffs(P):
    """Coordinate columns of X_1..X_n, Y_1..Y_n at P, shape (..., 2n+1, 2n).

    X_j = d/dx_j + 2 y_j d/dt,  Y_j = d/dy_j - 2 x_j d/dt.
    """
    P = np.asarray(P, dtype=float)
    x, y, _, n = _split(P)
    M = np.zeros(P.shape[:-1] + (2 * n + 1, 2 * n))
    idx = np.arange(2 * n)
    M[..., idx, idx] = 1.0
    M[..., 2 * n, :n] = 2.0 * y
    M[..., 2 * n, n:] = -2.0 * x
    return M


def lie_bracket(i: int, j: int, P, h: float = 1e-3):
    """Coordinates of [V_i, V_j] at P, V_k the k-th frame field.

    The frame fields are affine in P, so central differences are exact up
    to rounding for any step h.
    """
    P = np.asarray(P, dtype=float)
    F = frame_coeffs(P)
    Vi, Vj = F[..., :, i], F[..., :, j]

    def directional(col, v):
        # d(frame column col)/d(direction v) at P
        return (frame_coeffs(P + h * v)[..., :, col] - frame_coeffs(P - h * v)[..., :, col]) / (2 * h)

    return directional(j, Vi) - directional(i, Vj)


def iota(A):
    """Embed base parameters into the maximal subgroup {x_1 = 0}.

    n = 1: (eta, tau) -> (0, eta, tau).
    n >= 2: (eta, v_2..v_n, v_{n+2}..v_{2n}, tau) -> (0, v_2..v_n, eta, v_{n+2}..v_{2n}, tau).
    """
    A = np.asarray(A, dtype=float)
    m = A.shape[-1]
    if m < 2 or m % 2:
        raise DimensionError(f"base parameters must have even length 2n, got {m}")
    n = m // 2
    eta, tau = A[..., 0], A[..., -1]
    out = np.zeros(A.shape[:-1] + (2 * n + 1,))
    out[..., 1:n] = A[..., 1:n]
    out[..., n] = eta
    out[..., n + 1:2 * n] = A[..., n:2 * n - 1]
    out[..., 2 * n] = tau
    return out


def graph_point(A, s):
    """iota(A) . (s, 0, ..., 0)."""
    P = iota(A)
    S = np.zeros_like(P)
    S[..., 0] = s
    return group_mul(P, S)


def base_point(P):
    """Inverse of graph_point: P -> (A, s) with P = iota(A) . (s, 0, ..., 0)."""
    P = np.asarray(P, dtype=float)
    x, y, t, n = _split(P)
    s = x[..., 0]
    A = np.empty(P.shape[:-1] + (2 * n,))
    A[..., 0] = y[..., 0]
    A[..., 1:n] = x[..., 1:]
    A[..., n:2 * n - 1] = y[..., 1:]
    A[..., 2 * n - 1] = t - 2.0 * y[..., 0] * s
    return A, s


@dataclass(frozen=True, eq=False)
class HPoint:
    """A point of H^n; `p * q` is the group product."""

    n: int
    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.shape != (2 * self.n + 1,):
            raise DimensionError(f"H^{self.n} point needs {2 * self.n + 1} coordinates, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coordinates must be finite")
        object.__setattr__(self, "coords", c)

    @classmethod
    def of(cls, *coords) -> "HPoint":
        return cls(group_index(np.empty(len(coords))), np.array(coords, dtype=float))

    def __mul__(self, other: "HPoint") -> "HPoint":
        if self.n != other.n:
            raise DimensionError(f"H^{self.n} and H^{other.n}")
        return HPoint(self.n, group_mul(self.coords, other.coords))

    def __eq__(self, other):
        return isinstance(other, HPoint) and self.n == other.n and np.array_equal(self.coords, other.coords)

    def inverse(self) -> "HPoint":
        return HPoint(self.n, group_inv(self.coords))

    def dilate(self, r: float) -> "HPoint":
        return HPoint(self.n, dilate(r, self.coords))

    def dist(self, other: "HPoint") -> float:
        if self.n != other.n:
            raise DimensionError(f"H^{self.n} and H^{other.n}")
        return float(dinf(self.coords, other.coords))


@dataclass(frozen=True)
class HorizontalVector:
    """Coefficients on the frame (X_1..X_n, Y_1..Y_n)."""

    n: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape[-1] != 2 * self.n:
            raise DimensionError(f"horizontal vector in H^{self.n} needs {2 * self.n} coefficients")
        object.__setattr__(self, "coeffs", c)

    def norm(self):
        return np.linalg.norm(self.coeffs, axis=-1)


@dataclass(frozen=True)
class BaseParamPoint:
    """Parameters on the maximal subgroup, (eta, v..., tau) of length 2n."""

    n: int
    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.shape[-1] != 2 * self.n:
            raise DimensionError(f"base point for H^{self.n} needs {2 * self.n} coordinates")
        object.__setattr__(self, "coords", c)
