"""Tabulate s Tr(B^(1+s)) over a log grid and write it as CSV."""

import argparse
import csv
import sys

from catalens.counterexample import default_s_grid, upper_bound_sweep, upper_constant


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=241)
    ap.add_argument("--out", default="-", help="CSV path, '-' for stdout")
    args = ap.parse_args()

    sw = upper_bound_sweep(default_s_grid(args.points))
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(fh)
    w.writerow(["s", "value", "error_bound"])
    for s, v, e in sw.points:
        w.writerow([repr(s), f"{float(v):.15g}", f"{float(e):.3g}"])
    if fh is not sys.stdout:
        fh.close()
    print(f"# max {float(sw.max_value):.6f} at s = {sw.argmax:.3g}; "
          f"limit {float(upper_constant()):.6f}", file=sys.stderr)


if __name__ == "__main__":
    main()
