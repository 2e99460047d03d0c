"""Command line interface.

Every command writes a JSON report into ``--out-dir`` and exits with status
0 exactly when all pass flags in it are true. Spaces are given as a file
path or as a generator spec such as ``grid1d:n=1024``.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Callable


from . import experiments as ex
from .covering import admissible_window, clip_window, get_cover, validate_cover
from .curves import CurveFamily, check_S_k_inequality, check_upper_gradient, enumerate_family, load_family
from .functions import resolve
from .gradient import norm_star
from .io import open_space, write_csv, write_report
from .measure import estimate_doubling
from .modulus import (
    DisconnectedTerminals,
    minimal_upper_gradient_edge,
    minimal_upper_gradient_vertex,
    modulus_connecting,
    p_modulus,
)


def _window(text: str | None) -> tuple[int, int] | None:
    if text is None:
        return None
    a, _, b = text.partition(":")
    try:
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad window {text!r}, expected a:b") from None


def _ids(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _terminals(text: str | None):
    if text is None:
        return None
    src, _, dst = text.partition(":")
    return _ids(src), _ids(dst)


def _gradient(args, space, u):
    spec = args.gradient
    if spec == "edge-oracle":
        return minimal_upper_gradient_edge(space, u, args.p).g_vertex
    return resolve(spec, space, args.seed)


def _family(args, space) -> CurveFamily:
    if args.family:
        return load_family(space, args.family)
    return enumerate_family(
        space,
        args.generator,
        terminals=_terminals(args.terminals),
        hop_limit=args.hop_limit,
        k=args.k_paths,
    )


# -- commands ---------------------------------------------------------------------


def cmd_cover(args) -> tuple[str, dict, bool]:
    space = open_space(args.space)
    win = admissible_window(space) if args.k_window is None else clip_window(space, args.k_window)
    stats = estimate_doubling(space, seed=args.seed)
    covers = []
    ok = True
    for k in range(win[0], win[1] + 1):
        cov = get_cover(space, k)
        rep = validate_cover(cov)
        ok &= rep.ok
        covers.append({**cov.to_json(), "validation": rep.to_json()})
    return "cover", {"space": space.name, "window": list(win), "doubling": stats.to_json(), "covers": covers, "pass": ok}, ok


def cmd_norm_star(args):
    space = open_space(args.space)
    u = resolve(args.function, space, args.seed)
    rep = norm_star(u, space, args.p, args.k_window, args.trailing, plateau_tol=args.plateau_tol)
    body = {"space": space.name, "function": args.function, **rep.to_json()}
    if args.format == "csv":
        write_csv(os.path.join(args.out_dir, "norm-star.csv"), ["k", "value"], [[k, v] for k, v in rep.per_k])
    return "norm-star", body, True


def cmd_modulus(args):
    space = open_space(args.space)
    if args.action == "solve":
        if args.connecting:
            try:
                sol, fam = modulus_connecting(space, _terminals(args.terminals), args.p)
            except DisconnectedTerminals:
                return "modulus-solve", {"value": 0.0, "certificate": "terminals disconnected", "pass": True}, True
            body = {**sol.to_json(), "family_size": len(fam)}
        else:
            sol = p_modulus(space, _family(args, space), args.p)
            body = sol.to_json()
        ok = sol.converged and sol.min_curve_integral >= 1 - 1e-8
        return "modulus-solve", {**body, "pass": ok}, ok
    u = resolve(args.function, space, args.seed)
    if args.action == "gradient-edge":
        sol = minimal_upper_gradient_edge(space, u, args.p)
        return "modulus-gradient-edge", {**sol.to_json(), "pass": True}, True
    fam = _family(args, space) if (args.family or args.terminals) else None
    sol = minimal_upper_gradient_vertex(space, u, args.p, fam)
    return "modulus-gradient-vertex", {**sol.to_json(), "pass": sol.converged}, sol.converged


def cmd_poincare(args):
    space = open_space(args.space)
    u = resolve(args.function, space, args.seed)
    g = _gradient(args, space, u)
    rep = ex.poincare_sweep(space, u, g, args.p, args.lam, args.sampler, k_window=args.k_window)
    if args.format == "csv":
        write_csv(os.path.join(args.out_dir, "poincare.csv"), ["center", "radius", "lhs", "rhs"], [list(b) for b in rep.per_ball])
    return "poincare", rep.to_json(), rep.passed


def cmd_curves(args):
    space = open_space(args.space)
    u = resolve(args.function, space, args.seed)
    fam = _family(args, space)
    if args.action == "check-ug":
        rep = check_upper_gradient(u, _gradient(args, space, u), fam)
    else:
        rep = check_S_k_inequality(u, get_cover(space, args.k), args.p, fam)
    return f"curves-{args.action}", rep.to_json(), rep.ok


def cmd_verify(args):
    name = args.experiment
    if name == "almostug":
        rep = ex.almostug_experiment(trials=args.trials, seed=args.seed)
        return "verify-almostug", rep.to_json(), rep.passed
    space = open_space(args.space)
    if name == "convexity":
        rep = ex.convexity_probe(space, args.p, args.k, args.samples, seed=args.seed)
        return "verify-convexity", rep.to_json(), rep.passed
    u = resolve(args.function, space, args.seed)
    if name == "equivalence":
        rep = ex.equivalence_experiment(space, u, args.p, args.k_window, args.trailing, label=args.function)
        return "verify-equivalence", rep.to_json(), rep.passed
    if name == "pointwise":
        rep = ex.pointwise_experiment(space, u, args.q, args.p, args.k_window, args.trailing, lam=args.lam)
        return "verify-pointwise", rep.to_json(), rep.passed
    if name == "cross-cover":
        rep = ex.cross_cover_experiment(space, u, args.p, args.k_window, seeds=_ids(args.seeds), trailing=args.trailing)
        return "verify-cross-cover", rep.to_json(), rep.passed
    if name == "tk-bound":
        g = _gradient(args, space, u)
        rep = ex.tk_poincare_bound_check(space, u, g, args.p, args.lam, args.k_window)
        return "verify-tk-bound", rep.to_json(), rep.passed
    raise ValueError(name)


# -- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="newtonian-lab", description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out-dir", default="reports")
    ap.add_argument("--format", choices=("json", "csv"), default="json")
    # the global flags are also accepted after the subcommand
    glob = argparse.ArgumentParser(add_help=False)
    glob.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    glob.add_argument("--out-dir", default=argparse.SUPPRESS)
    glob.add_argument("--format", choices=("json", "csv"), default=argparse.SUPPRESS)
    sub = ap.add_subparsers(dest="command", required=True)
    _add = sub.add_parser
    sub.add_parser = lambda *a, **kw: _add(*a, parents=[glob], **kw)  # type: ignore[method-assign]

    def common(p, function=True, pval=2.0):
        p.add_argument("--space", required=True, help="space file or generator spec, e.g. grid1d:n=256")
        if function:
            p.add_argument("--function", default="linear", help="named function, value file or expression in x, y, i")
        p.add_argument("--p", type=float, default=pval)
        p.add_argument("--k-window", type=_window, default=None, help="kmin:kmax")

    def family_opts(p):
        p.add_argument("--family", help="family JSON file")
        p.add_argument("--generator", default="all-simple-paths", choices=("all-simple-paths", "k-shortest", "grid-rows"))
        p.add_argument("--terminals", help="sources:sinks as comma lists of point indices")
        p.add_argument("--hop-limit", type=int, default=None)
        p.add_argument("--k-paths", type=int, default=1)

    p = sub.add_parser("cover", help="build and validate covers")
    common(p, function=False)
    p.set_defaults(run=cmd_cover)

    p = sub.add_parser("norm-star", help="equivalent Sobolev norm over a window")
    common(p)
    p.add_argument("--trailing", type=int, default=3)
    p.add_argument("--plateau-tol", type=float, default=0.2)
    p.set_defaults(run=cmd_norm_star)

    p = sub.add_parser("modulus", help="p-modulus and minimal upper gradients")
    p.add_argument("action", choices=("solve", "gradient-edge", "gradient-vertex"))
    common(p)
    family_opts(p)
    p.add_argument("--connecting", action="store_true", help="all terminal-connecting paths by column generation")
    p.set_defaults(run=cmd_modulus)

    p = sub.add_parser("poincare", help="Poincare constant sweep")
    common(p)
    p.add_argument("--gradient", default="edge-oracle")
    p.add_argument("--lambda", dest="lam", type=float, default=ex.DEFAULT_LAMBDA)
    p.add_argument("--sampler", choices=("dyadic", "cover"), default="dyadic")
    p.set_defaults(run=cmd_poincare)

    p = sub.add_parser("curves", help="slack checks along curve families")
    p.add_argument("action", choices=("check-ug", "check-sk"))
    common(p)
    family_opts(p)
    p.add_argument("--gradient", default="edge-oracle")
    p.add_argument("--k", type=int, default=0)
    p.set_defaults(run=cmd_curves)

    p = sub.add_parser("verify", help="end-to-end experiments")
    p.add_argument("experiment", choices=("equivalence", "pointwise", "convexity", "almostug", "cross-cover", "tk-bound"))
    p.add_argument("--space", default="grid1d:n=1024")
    p.add_argument("--function", default="linear")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--k-window", type=_window, default=None)
    p.add_argument("--trailing", type=int, default=3)
    p.add_argument("--lambda", dest="lam", type=float, default=ex.DEFAULT_LAMBDA)
    p.add_argument("--gradient", default="edge-oracle")
    p.add_argument("--k", type=int, default=3, help="generation for the convexity probe")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.set_defaults(run=cmd_verify)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    run: Callable = args.run
    try:
        kind, body, ok = run(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    path = os.path.join(args.out_dir, f"{kind}.json")
    write_report(path, kind, body)
    print(f"{kind}: {'pass' if ok else 'fail'} -> {path}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
