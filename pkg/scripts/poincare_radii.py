"""Per-radius Poincare ratios for u(x) = x, g = 1 on grid1d(n).

    python scripts/poincare_radii.py [--n 256] [--p 2] [--lam 2]

Radii outside the admissible window are marked; near the grid spacing the
ratio grows because balls hold only a handful of points.
"""

from __future__ import annotations

import argparse

import numpy as np

from newtonian_lab.covering import admissible_window
from newtonian_lab.experiments import poincare_sweep
from newtonian_lab.space import generate_space


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=256)
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--lam", type=float, default=2.0)
    args = ap.parse_args()
    s = generate_space("grid1d", n=args.n)
    rep = poincare_sweep(s, s.coords[:, 0], np.ones(s.n), args.p, args.lam)
    lo, hi = admissible_window(s)
    print("radius,c_PI,admissible")
    for r, c in sorted(rep.per_radius.items(), reverse=True):
        k = -np.log2(r)
        print(f"{r:.6g},{c:.4f},{int(lo <= k <= hi)}")


if __name__ == "__main__":
    main()
