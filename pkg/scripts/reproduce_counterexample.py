"""Rebuild the infinite counterexample and print each certified piece."""

import argparse

from catalens.counterexample import run_all


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, default=None)
    ap.add_argument("--n-max", type=int, default=8)
    args = ap.parse_args()

    res = run_all(alpha=args.alpha, n_max=args.n_max)
    p = res.params
    print(f"alpha      {float(p.alpha):.6f}")
    print(f"delta      {p.delta:g}")
    print(f"rank one   {float(p.rank_one):.6f}")
    print(f"sweep max  {float(res.sweep.max_value):.6f} at s = {res.sweep.argmax:.3g}")
    print(f"PM         {'ok' if res.pm.ok else 'FAILED'} over {len(res.pm.rows)} points")
    print("\n n   x_N(B)     x_B - alpha   x_B - x_N(A)")
    for g in res.gap.rows:
        print(f"{g.n:2d}   {float(g.x_B):.6f}   {float(g.gap):+.6f}     {float(g.matched_gap):+.6f}")
    d = res.density
    print(f"\ndensity max {d.maximum} at t = {d.maximizer}, discrete {d.discrete_max:.6f}")
    print("all checks pass" if res.ok else "some check FAILED")
    return 0 if res.ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
