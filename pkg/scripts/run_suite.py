"""Write every acceptance report into one directory through the CLI.

    python scripts/run_suite.py OUT_DIR [--seed N]

Exit status is 0 when all reports pass.
"""

from __future__ import annotations

import argparse
import sys
import time

from newtonian_lab.cli import main as cli

# (report directory name, argv after the global flags)
SUITE: list[tuple[str, list[str]]] = [
    ("cover-grid1d", ["cover", "--space", "grid1d:n=256"]),
    ("cover-grid2d", ["cover", "--space", "grid2d:nx=32,ny=32"]),
    ("cover-circle", ["cover", "--space", "circle:n=256"]),
    ("almostug", ["verify", "almostug", "--trials", "10000"]),
    ("tk-bound", ["verify", "tk-bound", "--space", "grid1d:n=512", "--gradient", "1"]),
    *[
        (f"equivalence-{name}-p{p}", ["verify", "equivalence", "--space", "grid1d:n=1024", "--function", expr, "--p", p, "--k-window", "2:8"])
        for name, expr in (("linear", "x"), ("abs", "abs(x - 0.5)"), ("sin", "sin(2*pi*x)"))
        for p in ("1", "1.5", "2", "3")
    ],
    ("pointwise", ["verify", "pointwise", "--space", "grid1d:n=1024", "--q", "1.5", "--p", "2"]),
    ("modulus", ["modulus", "solve", "--space", "grid2d:nx=4,ny=4", "--terminals", "0,4,8,12:3,7,11,15", "--connecting"]),
    ("gradient-vertex", ["modulus", "gradient-vertex", "--space", "weighted_graph_path3.json", "--function", "i"]),
    ("convexity-p2", ["verify", "convexity", "--space", "grid1d:n=256", "--p", "2", "--k", "3"]),
    ("convexity-p1", ["verify", "convexity", "--space", "grid1d:n=256", "--p", "1", "--k", "3", "--samples", "1000"]),
    ("cross-cover", ["verify", "cross-cover", "--space", "grid1d:n=512"]),
    ("poincare", ["poincare", "--space", "grid1d:n=256", "--gradient", "1", "--k-window", "0:5"]),
]

PATH3 = """{"mode": "graph", "points": [{"id": 0, "weight": 1}, {"id": 1, "weight": 1}, {"id": 2, "weight": 1}],
 "edges": [{"a": 0, "b": 1, "len": 1}, {"a": 1, "b": 2, "len": 1}]}"""


def run(out_dir: str, seed: int = 0, verbose: bool = True) -> dict[str, int]:
    import os

    os.makedirs(out_dir, exist_ok=True)
    path3 = os.path.join(out_dir, "weighted_graph_path3.json")
    with open(path3, "w") as fh:
        fh.write(PATH3)
    codes = {}
    for name, argv in SUITE:
        argv = [path3 if a == "weighted_graph_path3.json" else a for a in argv]
        t = time.perf_counter()
        codes[name] = cli(["--seed", str(seed), "--out-dir", os.path.join(out_dir, name), *argv])
        if verbose:
            print(f"  {name}: exit {codes[name]} in {time.perf_counter() - t:.1f}s", flush=True)
    return codes


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_dir")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    codes = run(args.out_dir, args.seed)
    return 0 if all(c == 0 for c in codes.values()) else 1


if __name__ == "__main__":
    sys.exit(main())
