"""Vectorised inversion of strictly increasing scalar maps.

`invert_increasing` brackets each target by expanding a symmetric
interval, then runs Newton steps safeguarded by bisection.  It is used
for characteristic charts and for Lipschitz profile inversion.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

__all__ = ["ChartError", "OutsideImage", "DegenerateChart", "invert_increasing"]


class ChartError(ValueError):
    """Base class for failed inversions."""


class OutsideImage(ChartError):
    """No sign change was found while expanding the bracket."""


class DegenerateChart(ChartError):
    """The map is not strictly increasing where it was probed."""


def invert_increasing(
    f: Callable,
    target,
    dfdc: Callable | None = None,
    guess=None,
    radius: float = 1.0,
    max_doublings: int = 60,
    rtol: float = 1e-12,
    max_iter: int = 200,
    args=(),
):
    """Solve f(c) = target elementwise for a strictly increasing f.

    f(c, *args) and dfdc(c, *args) act elementwise; each entry of args is
    broadcast against target and sliced along with it.  The returned roots satisfy
    |f(c) - target| <= rtol * (1 + |target|).  When dfdc is given, a
    non-positive slope at the initial probes or inside the final bracket
    raises DegenerateChart; at an outward probe of an unbracketed target
    it means the map flattens before reaching the target, and raises
    OutsideImage.
    """
    x = np.asarray(target, dtype=float)
    shape = x.shape
    x = x.ravel()
    args = [np.broadcast_to(np.asarray(a, dtype=float), shape).ravel() for a in args]
    c0 = x.copy() if guess is None else np.broadcast_to(np.asarray(guess, dtype=float), shape).ravel().copy()

    def sub(mask):
        return [a[mask] for a in args]

    def check_slope(c, mask, error=DegenerateChart):
        if dfdc is None:
            return
        d = np.asarray(dfdc(c, *sub(mask)), dtype=float)
        if np.any(d <= 0):
            bad = c[np.argmax(d <= 0)]
            raise error(f"map has non-positive slope at c={bad:g}")

    r = np.full_like(x, radius)
    lo, hi = c0 - r, c0 + r
    every = np.ones(x.shape, dtype=bool)
    check_slope(lo, every)
    check_slope(hi, every)
    flo, fhi = f(lo, *args) - x, f(hi, *args) - x
    for _ in range(max_doublings):
        open_ = (flo > 0) | (fhi < 0)
        if not open_.any():
            break
        r[open_] *= 2
        lo[open_] = c0[open_] - r[open_]
        hi[open_] = c0[open_] + r[open_]
        check_slope(lo[open_], open_, OutsideImage)
        check_slope(hi[open_], open_, OutsideImage)
        flo[open_] = f(lo[open_], *sub(open_)) - x[open_]
        fhi[open_] = f(hi[open_], *sub(open_)) - x[open_]
    else:
        open_ = (flo > 0) | (fhi < 0)
        if open_.any():
            i = np.argmax(open_)
            raise OutsideImage(f"target {x[i]:g} not bracketed within radius {r[i]:g}")
    if np.any(~np.isfinite(flo) | ~np.isfinite(fhi)):
        raise OutsideImage("map is not finite on the bracket")

    tol = rtol * (1 + np.abs(x))
    # iterate well past tol: downstream finite differences amplify root noise
    floor = 4 * np.finfo(float).eps * (1 + np.abs(x))
    c = np.clip(c0, lo, hi)
    fc = f(c, *args) - x
    todo = np.abs(fc) > floor
    for _ in range(max_iter):
        if not todo.any():
            break
        neg = fc < 0
        lo = np.where(todo & neg, c, lo)
        hi = np.where(todo & ~neg, c, hi)
        if dfdc is not None:
            d = np.asarray(dfdc(c, *args), dtype=float)
            if np.any(d[todo] <= 0):
                raise DegenerateChart(f"map has non-positive slope at c={c[todo][np.argmax(d[todo] <= 0)]:g}")
            step = c - fc / np.where(d > 0, d, 1.0)
            nxt = np.where((step > lo) & (step < hi), step, 0.5 * (lo + hi))
        else:
            nxt = 0.5 * (lo + hi)
        moved = np.abs(nxt - c) > 2 * np.finfo(float).eps * (1 + np.abs(c))
        c = np.where(todo, nxt, c)
        fc = np.where(todo, f(c, *args) - x, fc)
        todo &= (np.abs(fc) > floor) & moved
    if np.any(np.abs(fc) > tol):
        i = np.argmax(np.abs(fc) - tol)
        raise ChartError(f"inversion stalled at target {x[i]:g} with residual {abs(fc[i]):.3e}")
    return c.reshape(shape)
