"""JSON-lines report records shared by the CLI and the acceptance suite."""

from __future__ import annotations

import dataclasses
import json
import math

import numpy as np

SCHEMA = 1


def jsonable(obj):
    """Convert numpy scalars/arrays, dataclasses and tuples into JSON-ready values."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)
                if not f.name.startswith("_")}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if obj is None or isinstance(obj, (int, str)):
        return obj
    return repr(obj)


def record(check, params, value, passed, anchor, runtime=None):
    rec = {
        "schema": SCHEMA,
        "check": check,
        "anchor": anchor,
        "params": jsonable(params),
        "value": jsonable(value),
        "pass": bool(passed),
    }
    if runtime is not None:
        rec["runtime"] = round(float(runtime), 3)
    return rec


def dumps(rec):
    return json.dumps(rec, sort_keys=True)


def write_jsonl(records, path):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(dumps(rec) + "\n")


def read_jsonl(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
