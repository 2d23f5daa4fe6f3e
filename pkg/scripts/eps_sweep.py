"""Second variation and 1-D witness ratio along a sweep of cut-off widths.

    python3 scripts/eps_sweep.py --data "linear(4)" --eps 0.5 0.25 0.1 --out sweep.csv
"""
import argparse
import csv
import sys

from hbernstein import builtins as bi
from hbernstein.variation import bernstein_verdict, dgn_witness


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", default="linear(4)", help="initial data built-in")
    ap.add_argument("--eps", type=float, nargs="+", default=[0.5, 0.25, 0.1])
    ap.add_argument("--delta", type=float, default=0.05, help="half-width of the bump in c")
    ap.add_argument("--no-g2", action="store_true", help="skip the 2-D second variation (fast)")
    ap.add_argument("--out", default="-", help="CSV path, '-' for stdout")
    args = ap.parse_args(argv)

    d = bi.initial_data(args.data)
    rows = []
    for eps in args.eps:
        rep = bernstein_verdict(d, eps=eps, delta=args.delta)
        if rep.verdict == "vertical_plane":
            sys.exit(f"{args.data} is a vertical plane; nothing to sweep")
        w = rep.witness
        _, lhs, rhs, ratio = dgn_witness(w["a"], w["b"], eps)
        row = {"epsilon": eps, "lhs": lhs, "rhs": rhs, "ratio": ratio}
        if not args.no_g2:
            row.update(g2=rep.g2, g2_err=rep.errors["g2"], verdict=rep.verdict)
        rows.append(row)

    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
    writer.writeheader()
    writer.writerows(rows)
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    main()
