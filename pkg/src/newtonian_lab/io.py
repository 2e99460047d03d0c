"""Space files and report output.

Space JSON::

    {"mode": "euclidean" | "explicit-matrix" | "graph-shortest-path",
     "points": [{"id": ..., "coord": [...], "weight": w}, ...],
     "edges": [{"a": id, "b": id, "len": L}, ...],     # graph mode
     "matrix": [[...], ...],                          # matrix mode
     "normalize_weights": false}

Point-cloud CSV has a header with columns ``x1..xd`` and ``weight`` (and
optionally ``id``). Reports are JSON with ``schema_version`` and
``timestamp`` fields, written to a temporary file and renamed into place.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import math
import os
import tempfile
from typing import Any

import numpy as np

from .space import EUCLIDEAN, GRAPH, MATRIX, MetricMeasureSpace, SpaceError, canonical_mode, generate_space

SCHEMA_VERSION = "1.0"
TIMESTAMP_FIELD = "timestamp"


def _parse_error(path: str, exc: Exception) -> SpaceError:
    return SpaceError(f"parse failure in {path}: {exc}")


def space_from_dict(data: dict, name: str = "") -> MetricMeasureSpace:
    try:
        mode = canonical_mode(data["mode"])
        pts = data["points"]
        ids = tuple(p["id"] for p in pts)
        w = np.array([float(p.get("weight", 1.0)) for p in pts])
    except (KeyError, TypeError, ValueError) as exc:
        raise SpaceError(f"malformed space: {exc}") from None
    if len(set(ids)) != len(ids):
        raise SpaceError("duplicate point ids")
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise SpaceError("weights must be finite and strictly positive")
    if data.get("normalize_weights", False):
        w = w / w.sum()
    index = {pid: i for i, pid in enumerate(ids)}
    coords = None
    if all("coord" in p for p in pts):
        coords = np.array([np.atleast_1d(np.asarray(p["coord"], dtype=float)) for p in pts])
    elif mode == EUCLIDEAN:
        raise SpaceError("euclidean mode needs a coord for every point")
    edge_index = edge_length = None
    if "edges" in data:
        try:
            edge_index = np.array([(index[e["a"]], index[e["b"]]) for e in data["edges"]], dtype=np.int64).reshape(-1, 2)
            edge_length = np.array([float(e["len"]) for e in data["edges"]])
        except KeyError as exc:
            raise SpaceError(f"edge refers to unknown point {exc}") from None
    matrix = None
    if mode == MATRIX:
        if "matrix" not in data:
            raise SpaceError("explicit-matrix mode needs a matrix")
        matrix = np.asarray(data["matrix"], dtype=float)
        if matrix.shape != (len(ids), len(ids)):
            raise SpaceError("matrix shape does not match the point count")
    space = MetricMeasureSpace(
        ids=ids,
        weights=w,
        metric_mode=mode,
        coords=coords,
        edge_index=edge_index,
        edge_length=edge_length,
        matrix=matrix,
        name=name or data.get("name", ""),
    )
    if mode == GRAPH and not np.all(np.isfinite(space.dist)):
        raise SpaceError("graph is disconnected")
    space.validate()
    return space


def space_to_dict(space: MetricMeasureSpace) -> dict:
    pts = []
    for i, pid in enumerate(space.ids):
        entry: dict[str, Any] = {"id": pid, "weight": float(space.weights[i])}
        if space.coords is not None:
            entry["coord"] = space.coords[i].tolist()
        pts.append(entry)
    out: dict[str, Any] = {"mode": space.metric_mode, "points": pts, "name": space.name}
    if space.has_edges:
        out["edges"] = [
            {"a": space.ids[a], "b": space.ids[b], "len": float(L)}
            for (a, b), L in zip(space.edge_index.tolist(), space.edge_length)
        ]
    if space.matrix is not None:
        out["matrix"] = space.matrix.tolist()
    return out


def load_space(path: str, fmt: str | None = None) -> MetricMeasureSpace:
    """Read a space from JSON or point-cloud CSV; ``fmt`` defaults to the
    file extension."""
    fmt = (fmt or os.path.splitext(path)[1].lstrip(".")).lower()
    name = os.path.splitext(os.path.basename(path))[0]
    if fmt == "json":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise _parse_error(path, exc) from None
        return space_from_dict(data, name)
    if fmt == "csv":
        try:
            with open(path, newline="") as fh:
                rows = list(csv.DictReader(fh))
        except (OSError, csv.Error) as exc:
            raise _parse_error(path, exc) from None
        if not rows:
            raise SpaceError(f"parse failure in {path}: no rows")
        cols = sorted((c for c in rows[0] if c and c.startswith("x") and c[1:].isdigit()), key=lambda c: int(c[1:]))
        if not cols or "weight" not in rows[0]:
            raise SpaceError(f"parse failure in {path}: need columns x1..xd and weight")
        try:
            coords = np.array([[float(r[c]) for c in cols] for r in rows])
            w = np.array([float(r["weight"]) for r in rows])
        except ValueError as exc:
            raise _parse_error(path, exc) from None
        ids = tuple(r["id"] for r in rows) if "id" in rows[0] else tuple(range(len(rows)))
        data = {
            "mode": EUCLIDEAN,
            "points": [{"id": i, "coord": c.tolist(), "weight": x} for i, c, x in zip(ids, coords, w)],
        }
        return space_from_dict(data, name)
    raise SpaceError(f"unknown space format {fmt!r}")


def save_space(space: MetricMeasureSpace, path: str) -> None:
    atomic_write(path, json.dumps(space_to_dict(space), indent=1, sort_keys=True))


def parse_generator(spec: str) -> MetricMeasureSpace:
    """``kind:key=value,...``, e.g. ``grid2d:nx=32,ny=32``."""
    kind, _, rest = spec.partition(":")
    params: dict[str, Any] = {}
    for item in filter(None, rest.split(",")):
        key, _, val = item.partition("=")
        try:
            params[key.strip()] = int(val)
        except ValueError:
            params[key.strip()] = float(val)
    return generate_space(kind, **params)


def open_space(spec: str) -> MetricMeasureSpace:
    """A space file path or a generator spec."""
    if os.path.isfile(spec):
        return load_space(spec)
    return parse_generator(spec)


# -- reports ---------------------------------------------------------------------


def sanitize(obj: Any) -> Any:
    """Make an object JSON-strict: numpy scalars to Python, infinities to
    strings, tuples to lists."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return sanitize(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def report_payload(kind: str, body: dict, *, timestamp: str | None = None) -> dict:
    ts = timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return {"schema_version": SCHEMA_VERSION, TIMESTAMP_FIELD: ts, "kind": kind, **sanitize(body)}


def dumps_report(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_report(path: str, kind: str, body: dict) -> dict:
    payload = report_payload(kind, body)
    atomic_write(path, dumps_report(payload))
    return payload


def write_csv(path: str, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(repr(float(x)) if isinstance(x, (float, np.floating)) else str(x) for x in r))
    atomic_write(path, "\n".join(lines) + "\n")


def strip_timestamp(text: str) -> dict:
    """Parsed report without its timestamp, for determinism checks."""
    data = json.loads(text)
    data.pop(TIMESTAMP_FIELD, None)
    return data
