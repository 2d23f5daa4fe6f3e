import numpy as np
import sympy as sp

from hbernstein.graph import GraphFunction


def sym_graph(expr, syms, lo, hi, name="sym"):
    """GraphFunction with value, gradient and Hessian lambdified from a sympy expression."""
    f = sp.lambdify(syms, expr, "numpy")
    g = [sp.lambdify(syms, sp.diff(expr, s), "numpy") for s in syms]
    H = [[sp.lambdify(syms, sp.diff(expr, a, b), "numpy") for b in syms] for a in syms]

    def ev(fun, A):
        return np.broadcast_to(fun(*np.moveaxis(A, -1, 0)), A.shape[:-1]).astype(float)

    return GraphFunction(
        dim=len(syms),
        f=lambda A: ev(f, A),
        grad=lambda A: np.stack([ev(gi, A) for gi in g], axis=-1),
        hess=lambda A: np.stack([np.stack([ev(h, A) for h in row], axis=-1) for row in H], axis=-2),
        lo=lo, hi=hi, name=name,
    )
