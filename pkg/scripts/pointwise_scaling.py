"""Measured pointwise constants of the window limsup of |T_k u| against g_u
as the grid is refined.

    python scripts/pointwise_scaling.py [--sizes 256,512,1024,2048] [--q 1.5] [--p 2]

Prints one CSV row per grid size.
"""

from __future__ import annotations

import argparse

from newtonian_lab.experiments import pointwise_experiment
from newtonian_lab.space import generate_space


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="256,512,1024,2048")
    ap.add_argument("--q", type=float, default=1.5)
    ap.add_argument("--p", type=float, default=2.0)
    args = ap.parse_args()
    print("n,window,l1_C,l1_within,lp_C,lp_within,N,domination_constant,domination_empirical")
    for n in (int(v) for v in args.sizes.split(",")):
        s = generate_space("grid1d", n=n)
        rep = pointwise_experiment(s, s.coords[:, 0], args.q, args.p)
        print(
            f"{n},{rep.window[0]}:{rep.window[1]},{rep.l1.C_measured:.4f},{rep.l1.fraction_within:.3f},"
            f"{rep.lp.C_measured:.4f},{rep.lp.fraction_within:.3f},{rep.constants['N']},"
            f"{rep.domination_constant:.4g},{rep.domination_empirical:.4f}"
        )


if __name__ == "__main__":
    main()
