"""Composite Gauss-Legendre quadrature on boxes and intervals.

Nodes come from numpy's Legendre module; everything else (composite
panels, breakpoints, refinement, the compactifying substitution for
improper integrals) lives here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

__all__ = [
    "QuadratureError",
    "QuadratureSpec",
    "gauss_legendre",
    "axis_rule",
    "tensor_integrate",
    "integrate_with_error",
    "integrate_1d",
]

# points evaluated per call of the integrand
_CHUNK = 1 << 17


class QuadratureError(RuntimeError):
    """Adaptive refinement failed to reach the requested tolerance."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Tensor Gauss-Legendre rule: `order` nodes per cell, `cells` per axis.

    With ``adaptive=True`` the cell count is doubled until two successive
    estimates agree to ``tol`` (at most ``max_refine`` doublings).
    """

    order: int = 8
    cells: int = 16
    adaptive: bool = False
    tol: float = 1e-9
    max_refine: int = 5

    def __post_init__(self):
        if self.order < 2:
            raise ValueError("order must be >= 2")
        if self.cells < 1:
            raise ValueError("cells must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_refine < 1:
            raise ValueError("max_refine must be >= 1")

    def refined(self, factor: int = 2) -> "QuadratureSpec":
        return replace(self, cells=self.cells * factor)


@lru_cache(maxsize=64)
def gauss_legendre(order: int):
    x, w = leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def axis_rule(lo: float, hi: float, cells: int, order: int, breakpoints: Sequence[float] = ()):
    """Composite rule on [lo, hi]: `cells` equal panels, further split at breakpoints."""
    edges = np.linspace(lo, hi, cells + 1)
    extra = [b for b in breakpoints if lo < b < hi]
    if extra:
        edges = np.unique(np.concatenate([edges, extra]))
        # drop slivers created by breakpoints sitting on a panel edge
        keep = np.concatenate([[True], np.diff(edges) > 1e-13 * max(1.0, hi - lo)])
        edges = edges[keep]
        edges[-1] = hi
    x, w = gauss_legendre(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _tensor_sum(f, rules):
    """Sum of f over the tensor product of 1-D rules, chunked over the first axis."""
    d = len(rules)
    rest_nodes = [r[0] for r in rules[1:]]
    rest_w = [r[1] for r in rules[1:]]
    if d > 1:
        mesh = np.meshgrid(*rest_nodes, indexing="ij")
        rest_pts = np.stack([m.ravel() for m in mesh], axis=-1)
        wmesh = np.meshgrid(*rest_w, indexing="ij")
        rest_wt = np.prod(np.stack([m.ravel() for m in wmesh], axis=-1), axis=-1)
    else:
        rest_pts = np.empty((1, 0))
        rest_wt = np.ones(1)
    x0, w0 = rules[0]
    per = max(1, _CHUNK // len(rest_wt))
    total = 0.0
    for start in range(0, len(x0), per):
        xs = x0[start:start + per]
        ws = w0[start:start + per]
        pts = np.concatenate(
            [np.repeat(xs, len(rest_wt))[:, None], np.tile(rest_pts, (len(xs), 1))], axis=1
        )
        vals = np.asarray(f(pts), dtype=float)
        wt = np.repeat(ws, len(rest_wt)) * np.tile(rest_wt, len(xs))
        total += float(np.dot(vals, wt))
    return total


def _rules(box, spec, breakpoints):
    box = np.asarray(box, dtype=float)
    if breakpoints is None:
        breakpoints = [()] * len(box)
    return [axis_rule(lo, hi, spec.cells, spec.order, bp) for (lo, hi), bp in zip(box, breakpoints)]


def tensor_integrate(f: Callable, box, spec: QuadratureSpec | None = None, breakpoints=None) -> float:
    """Integrate f over an axis-aligned box.

    f maps an array of points of shape (N, d) to N values.  `box` is a
    sequence of (lo, hi) pairs and `breakpoints` an optional per-axis list
    of coordinates where f is not smooth; panels are split there.
    """
    spec = spec or QuadratureSpec()
    if spec.adaptive:
        return integrate_with_error(f, box, spec, breakpoints)[0]
    return _tensor_sum(f, _rules(box, spec, breakpoints))


def integrate_with_error(f: Callable, box, spec: QuadratureSpec | None = None, breakpoints=None):
    """Return (value, error estimate) from successive cell doublings.

    Without ``spec.adaptive`` a single doubling is used for the estimate
    and no tolerance is enforced.
    """
    spec = spec or QuadratureSpec()
    coarse = _tensor_sum(f, _rules(box, spec, breakpoints))
    cur = spec
    steps = spec.max_refine if spec.adaptive else 1
    for _ in range(steps):
        cur = cur.refined()
        fine = _tensor_sum(f, _rules(box, cur, breakpoints))
        err = abs(fine - coarse)
        if not spec.adaptive or err <= spec.tol:
            return fine, err
        coarse = fine
    raise QuadratureError(f"no convergence to tol={spec.tol:g} after {steps} doublings (last change {err:.3e})")


def _gl_interval(f, a, b, x, w):
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    return half * float(np.dot(w, f(mid + half * x)))


def integrate_1d(f: Callable, a: float, b: float, tol: float = 1e-12, order: int = 10,
                 breakpoints: Sequence[float] = (), max_depth: int = 40) -> float:
    """Adaptive Gauss-Legendre integral of a vectorised f over [a, b].

    Infinite endpoints are handled by the substitution t = tan(theta),
    which maps the real line onto a bounded interval; the integrand must
    then decay at least like |t|^-2.  Panels are bisected until the rule
    on a panel and on its two halves agree to a share of `tol`.
    """
    if a == b:
        return 0.0
    if a > b:
        return -integrate_1d(f, b, a, tol, order, breakpoints, max_depth)
    if math.isinf(a) or math.isinf(b):
        def g(theta):
            t = np.tan(theta)
            return f(t) / np.cos(theta) ** 2

        ta = -0.5 * math.pi if math.isinf(a) else math.atan(a)
        tb = 0.5 * math.pi if math.isinf(b) else math.atan(b)
        bps = [math.atan(p) for p in breakpoints]
        return integrate_1d(g, ta, tb, tol, order, bps, max_depth)

    x, w = gauss_legendre(order)
    edges = sorted({a, b, *[p for p in breakpoints if a < p < b]})
    total = 0.0
    stack = [(lo, hi, _gl_interval(f, lo, hi, x, w), 0) for lo, hi in zip(edges[:-1], edges[1:])]
    width = b - a
    while stack:
        lo, hi, whole, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left = _gl_interval(f, lo, mid, x, w)
        right = _gl_interval(f, mid, hi, x, w)
        if abs(left + right - whole) <= tol * (hi - lo) / width or depth >= max_depth:
            if depth >= max_depth and abs(left + right - whole) > tol:
                raise QuadratureError(f"interval [{lo:g}, {hi:g}] did not converge")
            total += left + right
        else:
            stack.append((mid, hi, right, depth + 1))
            stack.append((lo, mid, left, depth + 1))
    return total
