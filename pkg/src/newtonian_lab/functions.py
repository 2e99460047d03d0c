"""Test functions and a small expression language for point functions.

Expressions see the coordinates as ``x`` (first), ``y`` (second), ``x1..xd``,
the point index ``i`` and the usual elementary functions. Only arithmetic,
calls of whitelisted functions and names are accepted.
"""

from __future__ import annotations

import ast
import json
import operator
import os

import numpy as np

from .space import MetricMeasureSpace, SpaceError

_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "sign": np.sign,
    "floor": np.floor,
    "ceil": np.ceil,
    "min": np.minimum,
    "max": np.maximum,
    "where": np.where,
}
_CONSTS = {"pi": np.pi, "e": np.e}
_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
    ast.Mod: operator.mod,
}
_CMPOPS = {
    ast.Lt: operator.lt,
    ast.LtE: operator.le,
    ast.Gt: operator.gt,
    ast.GtE: operator.ge,
}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}

NAMED = ("linear", "abs", "sin", "random-lipschitz", "constant")


def _coords(space: MetricMeasureSpace) -> np.ndarray:
    if space.coords is not None:
        return space.coords
    # graph or matrix spaces without coordinates: index on [0, 1]
    return (np.arange(space.n) / max(space.n - 1, 1))[:, None]


def evaluate(expr: str, space: MetricMeasureSpace) -> np.ndarray:
    """Evaluate an expression at every point of ``space``."""
    c = _coords(space)
    env: dict[str, object] = {f"x{j + 1}": c[:, j] for j in range(c.shape[1])}
    env["x"] = c[:, 0]
    if c.shape[1] > 1:
        env["y"] = c[:, 1]
    env["i"] = np.arange(space.n, dtype=float)
    env.update(_CONSTS)

    def ev(node: ast.AST):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id not in env:
                raise ValueError(f"unknown name {node.id!r}")
            return env[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        if isinstance(node, ast.Compare) and len(node.ops) == 1 and type(node.ops[0]) in _CMPOPS:
            return _CMPOPS[type(node.ops[0])](ev(node.left), ev(node.comparators[0])).astype(float)
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and not node.keywords:
            return _FUNCS[node.func.id](*[ev(a) for a in node.args])
        raise ValueError(f"unsupported expression element {ast.dump(node)[:40]}")

    out = ev(ast.parse(expr, mode="eval"))
    return np.broadcast_to(np.asarray(out, dtype=float), (space.n,)).copy()


def random_lipschitz(space: MetricMeasureSpace, seed: int = 0, L: float = 1.0, levels: int = 12, decay: float = 0.5) -> np.ndarray:
    """Random midpoint-subdivision profile of the first coordinate.

    Level ``j`` displaces midpoints by at most ``L * decay^j`` times the
    half-interval, so the profile is Lipschitz with constant at most
    ``L / (1 - decay)`` in the first coordinate.
    """
    rng = np.random.default_rng(seed)
    knots = np.array([0.0, 1.0])
    vals = np.zeros(2)
    for j in range(levels):
        mids = (knots[:-1] + knots[1:]) / 2
        h = (knots[1:] - knots[:-1]) / 2
        mv = (vals[:-1] + vals[1:]) / 2 + L * decay**j * h * rng.uniform(-1, 1, size=mids.size)
        knots = np.insert(knots, np.arange(1, knots.size), mids)
        vals = np.insert(vals, np.arange(1, vals.size), mv)
    x = _coords(space)[:, 0]
    lo, hi = x.min(), x.max()
    t = (x - lo) / (hi - lo) if hi > lo else np.zeros_like(x)
    return np.interp(t, knots, vals)


def named(name: str, space: MetricMeasureSpace, seed: int = 0) -> np.ndarray:
    x = _coords(space)[:, 0]
    if name == "linear":
        return x.copy()
    if name == "abs":
        return np.abs(x - 0.5)
    if name == "sin":
        return np.sin(2 * np.pi * x)
    if name == "constant":
        return np.ones(space.n)
    if name == "random-lipschitz":
        return random_lipschitz(space, seed)
    raise ValueError(f"unknown named function {name!r}")


def resolve(spec: str, space: MetricMeasureSpace, seed: int = 0) -> np.ndarray:
    """``spec`` is a named function, a JSON/CSV/whitespace file of values,
    or an expression."""
    if spec in NAMED:
        return named(spec, space, seed)
    if os.path.isfile(spec):
        if spec.endswith(".json"):
            with open(spec) as fh:
                data = json.load(fh)
            vals = data["values"] if isinstance(data, dict) else data
            u = np.asarray(vals, dtype=float)
        else:
            u = np.loadtxt(spec, delimiter="," if spec.endswith(".csv") else None, dtype=float).reshape(-1)
        if u.size != space.n:
            raise SpaceError(f"function file has {u.size} values, space has {space.n} points")
        return u
    return evaluate(spec, space)
