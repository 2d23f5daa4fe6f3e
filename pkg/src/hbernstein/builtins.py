"""Named built-in inputs, parsed from strings such as "linear(4)" or "affine(1, 0)"."""
from __future__ import annotations

import csv
import io
import re

import numpy as np

from .calibration import HorizontalSection, LipschitzProfile
from .characteristics import InitialData
from .graph import GraphFunction, ScalarField, horizontal_normal, lift

__all__ = ["UnknownBuiltin", "parse", "initial_data", "graph", "section", "profile", "tgraph", "scherk"]


class UnknownBuiltin(ValueError):
    pass


_CALL = re.compile(r"^\s*([A-Za-z_][\w.]*)\s*(?:\((.*)\))?\s*$")


def parse(spec: str):
    """'name(a, b)' -> ('name', [a, b]); a bare name gives no arguments."""
    m = _CALL.match(spec)
    if not m:
        raise UnknownBuiltin(f"cannot parse built-in {spec!r}")
    name, args = m.group(1), m.group(2)
    vals = []
    if args and args.strip():
        for a in args.split(","):
            a = a.strip()
            try:
                vals.append(float(a))
            except ValueError:
                vals.append(a)
    return name, vals


def _nargs(name, args, k):
    if len(args) != k:
        raise UnknownBuiltin(f"{name} takes {k} argument(s), got {len(args)}")


def _zero(c):
    return np.zeros_like(np.asarray(c, dtype=float))


def _linear_data(alpha):
    return InitialData(
        A=lambda c: alpha * np.asarray(c, dtype=float), B=_zero,
        dA=lambda c: alpha + _zero(c), dB=_zero, d2A=_zero, d2B=_zero,
        name=f"linear({alpha:g})",
    )


def _constants(A0, B0):
    return InitialData(
        A=lambda c: A0 + _zero(c), B=lambda c: B0 + _zero(c),
        dA=_zero, dB=_zero, d2A=_zero, d2B=_zero, name=f"constants({A0:g},{B0:g})",
    )


def _parabola_crossing():
    return InitialData(
        A=lambda c: 0.5 * np.asarray(c, dtype=float), B=lambda c: -np.asarray(c, dtype=float),
        dA=lambda c: 0.5 + _zero(c), dB=lambda c: -1 + _zero(c), d2A=_zero, d2B=_zero,
        name="ex4.7",
    )


def _half_lines():
    return InitialData(
        A=lambda c: np.asarray(c, dtype=float),
        B=lambda c: np.sqrt(2 * (1 + np.asarray(c, dtype=float) ** 2)),
        dA=lambda c: 1 + _zero(c),
        dB=lambda c: np.sqrt(2) * c / np.sqrt(1 + np.asarray(c, dtype=float) ** 2),
        d2A=_zero,
        d2B=lambda c: np.sqrt(2) / (1 + np.asarray(c, dtype=float) ** 2) ** 1.5,
        name="ex4.8",
        image="R^2 minus {(x, sqrt2): x <= 0} and {(x, -sqrt2): x >= 0}",
    )


def half_lines_inverse(x, t):
    """Closed-form c(x, t) for the ex4.8 data, |t| != sqrt 2."""
    k = (1 - t * t / 2) ** 2
    return (x * (1 + t * t / 2) - np.sqrt(2) * t * np.sqrt(x * x + (1 - t * t / 2) ** 2)) / k


def _tanh_data():
    return InitialData(
        A=np.tanh, B=_zero,
        dA=lambda c: 1 / np.cosh(c) ** 2, dB=_zero,
        d2A=lambda c: -2 * np.tanh(c) / np.cosh(c) ** 2, d2B=_zero,
        name="tanh",
    )


def _grid_data(payload):
    rows = _read_csv(payload, ("c", "A", "B"))
    return InitialData.from_samples(rows["c"], rows["A"], rows["B"])


def _read_csv(payload, required):
    reader = csv.DictReader(io.StringIO(payload))
    missing = set(required) - set(reader.fieldnames or ())
    if missing:
        raise UnknownBuiltin(f"CSV payload lacks columns {sorted(missing)}")
    cols = {k: [] for k in required}
    try:
        for r in reader:
            for k in required:
                cols[k].append(float(r[k]))
    except (TypeError, ValueError) as e:
        raise UnknownBuiltin(f"malformed CSV payload: {e}") from None
    return {k: np.array(v) for k, v in cols.items()}


def initial_data(spec: str, payload: str | None = None) -> InitialData:
    name, args = parse(spec)
    if name == "linear":
        _nargs(name, args, 1)
        return _linear_data(args[0])
    if name == "constants":
        _nargs(name, args, 2)
        return _constants(*args)
    if name == "ex4.7":
        return _parabola_crossing()
    if name == "ex4.8":
        return _half_lines()
    if name == "tanh":
        return _tanh_data()
    if name == "grid":
        if payload is None:
            raise UnknownBuiltin("grid data needs a CSV payload with columns c, A, B")
        return _grid_data(payload)
    raise UnknownBuiltin(f"unknown initial data {spec!r}")


def dgn_graph(k, lo=(-2.0, -2.0), hi=(2.0, 2.0)) -> GraphFunction:
    """phi = -k eta tau / (1 + 2 k eta^2) with exact derivatives."""

    def f(A):
        e, t = A[..., 0], A[..., 1]
        return -k * e * t / (1 + 2 * k * e * e)

    def grad(A):
        e, t = A[..., 0], A[..., 1]
        D = 1 + 2 * k * e * e
        return np.stack([-k * t * (1 - 2 * k * e * e) / D**2, -k * e / D], axis=-1)

    def hess(A):
        e, t = A[..., 0], A[..., 1]
        D = 1 + 2 * k * e * e
        H = np.zeros(A.shape + (2,))
        H[..., 0, 0] = 4 * k * k * t * e * (3 - 2 * k * e * e) / D**3
        H[..., 0, 1] = H[..., 1, 0] = -k * (1 - 2 * k * e * e) / D**2
        return H

    return GraphFunction(dim=2, f=f, grad=grad, hess=hess, lo=lo, hi=hi, name=f"dgn({k:g})")


def affine_graph(w, c, n=1, lo=None, hi=None) -> GraphFunction:
    """phi = w eta + c."""
    d = 2 * n
    lo = [-2.0] * d if lo is None else lo
    hi = [2.0] * d if hi is None else hi

    def f(A):
        return w * A[..., 0] + c

    def grad(A):
        g = np.zeros(A.shape)
        g[..., 0] = w
        return g

    def hess(A):
        return np.zeros(A.shape + (d,))

    return GraphFunction(dim=d, f=f, grad=grad, hess=hess, lo=lo, hi=hi, name=f"affine({w:g},{c:g})")


def scherk(half_width=0.5) -> ScalarField:
    """psi(eta, v2, v4) = log(cos v2 / cos eta) on a cube of R^3."""

    def f(B):
        return np.log(np.cos(B[..., 1]) / np.cos(B[..., 0]))

    def grad(B):
        g = np.zeros(B.shape)
        g[..., 0] = np.tan(B[..., 0])
        g[..., 1] = -np.tan(B[..., 1])
        return g

    def hess(B):
        H = np.zeros(B.shape + (3,))
        H[..., 0, 0] = 1 / np.cos(B[..., 0]) ** 2
        H[..., 1, 1] = -1 / np.cos(B[..., 1]) ** 2
        return H

    w = half_width
    return ScalarField(3, f, grad, hess, lo=[-w] * 3, hi=[w] * 3)


def graph(spec: str, payload: str | None = None) -> GraphFunction:
    name, args = parse(spec)
    if name == "dgn":
        _nargs(name, args, 1)
        return dgn_graph(args[0])
    if name == "affine":
        _nargs(name, args, 2)
        return affine_graph(*args)
    if name == "lift":
        if args != ["scherk"]:
            raise UnknownBuiltin("only lift(scherk) is registered")
        return lift(scherk(), name="lift(scherk)")
    if name == "grid":
        if payload is None:
            raise UnknownBuiltin("grid graph needs a CSV payload with columns eta, tau, phi")
        cols = _read_csv(payload, ("eta", "tau", "phi"))
        e, t = np.unique(cols["eta"]), np.unique(cols["tau"])
        order = np.lexsort((cols["tau"], cols["eta"]))
        vals = cols["phi"][order].reshape(e.size, t.size)
        return GraphFunction.from_grid([e, t], vals)
    raise UnknownBuiltin(f"unknown graph {spec!r}")


def xyt_section(alpha=1.0) -> HorizontalSection:
    """sign(y) (-y, x) / r, smooth off {y = 0}; calibrates the graph of dgn(alpha)."""

    def f(P):
        x, y = P[..., 0], P[..., 1]
        r = np.hypot(x, y)
        return np.sign(y)[..., None] * np.stack([-y / r, x / r], axis=-1)

    return HorizontalSection(1, f, singular_distance=lambda P: np.abs(P[..., 1]), name=f"dgn_xyt({alpha:g})")


def lift_section(psi: ScalarField) -> HorizontalSection:
    """(-1, grad psi) / S arranged on (X_1, X_2, Y_1, Y_2), independent of t and x_1."""

    def f(P):
        B = np.stack([P[..., 2], P[..., 1], P[..., 3]], axis=-1)
        g = psi.gradient(B)
        S = np.sqrt(1 + np.sum(g * g, axis=-1))
        return np.stack([-np.ones_like(S), g[..., 1], g[..., 0], g[..., 2]], axis=-1) / S[..., None]

    return HorizontalSection(2, f, name="lift(scherk)")


def section(spec: str, phi: GraphFunction | None = None) -> HorizontalSection:
    name, args = parse(spec)
    if name == "constant":
        if args:
            return HorizontalSection.constant(np.array(args, dtype=float))
        if phi is None:
            raise UnknownBuiltin("constant section needs coefficients or a graph")
        return HorizontalSection.constant(horizontal_normal(phi, np.zeros(phi.dim)))
    if name == "dgn_xyt":
        _nargs(name, args, 1)
        return xyt_section(args[0])
    if name == "lift":
        if args != ["scherk"]:
            raise UnknownBuiltin("only lift(scherk) is registered")
        return lift_section(scherk())
    raise UnknownBuiltin(f"unknown section {spec!r}")


def tgraph(spec: str):
    """t-graph height functions: returns (phi_t, grad)."""
    name, args = parse(spec)
    if name == "tgraph_poly":
        _nargs(name, args, 2)
        a, b = args

        def f(X):
            return 2 * X[..., 0] * X[..., 1] + a * X[..., 1] + b

        def g(X):
            return np.stack([2 * X[..., 1], 2 * X[..., 0] + a], axis=-1)

        return f, g
    raise UnknownBuiltin(f"unknown t-graph {spec!r}")


def profile(spec: str) -> LipschitzProfile:
    name, args = parse(spec)
    if name == "abs":
        return LipschitzProfile(np.abs, 1.0, (0.0,), dbeta=np.sign, name="abs")
    if name == "const":
        _nargs(name, args, 1)
        b = args[0]
        return LipschitzProfile(lambda t: b + _zero(t), 0.0, (), dbeta=_zero, name=f"const({b:g})")
    if name == "slope":
        _nargs(name, args, 1)
        k = args[0]
        return LipschitzProfile(lambda t: k * np.asarray(t, dtype=float), abs(k), (),
                                dbeta=lambda t: k + _zero(t), name=f"slope({k:g})")
    raise UnknownBuiltin(f"unknown profile {spec!r}")
