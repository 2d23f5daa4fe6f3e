"""Finite-difference minimal surface residual of a synthesized graph as h shrinks.

    python3 scripts/residual_convergence.py --data tanh --h 4e-3 2e-3 1e-3 5e-4
"""
import argparse
import csv
import sys

import numpy as np

from hbernstein import builtins as bi
from hbernstein.battery import observed_order
from hbernstein.characteristics import CharacteristicChart, synthesize_phi
from hbernstein.graph import mse_residual


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", default="linear(4)", help="initial data built-in")
    ap.add_argument("--h", type=float, nargs="+", default=[4e-3, 2e-3, 1e-3, 5e-4])
    ap.add_argument("--eta", type=float, nargs=3, default=[-1, 1, 21], metavar=("LO", "HI", "N"))
    ap.add_argument("--tau", type=float, nargs=3, default=[-0.25, 0.25, 11], metavar=("LO", "HI", "N"))
    ap.add_argument("--out", default="-", help="CSV path, '-' for stdout")
    args = ap.parse_args(argv)

    chart = CharacteristicChart(bi.initial_data(args.data))
    axes = [np.linspace(lo, hi, int(n)) for lo, hi, n in (args.eta, args.tau)]
    A = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    pad = 2 * max(args.h) + 0.1
    phi = synthesize_phi(chart, lo=A.min(axis=(0, 1)) - pad, hi=A.max(axis=(0, 1)) + pad)

    hs = sorted(args.h, reverse=True)
    res = [float(np.abs(mse_residual(phi, A, h=h)).max()) for h in hs]
    orders = [None] + [observed_order([a, b], ra / rb) for a, b, ra, rb in zip(res, res[1:], hs, hs[1:])]

    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    writer = csv.writer(fh)
    writer.writerow(["h", "max_residual", "order"])
    for h, r, o in zip(hs, res, orders):
        writer.writerow([h, r, "" if o is None else o[0]])
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    main()
