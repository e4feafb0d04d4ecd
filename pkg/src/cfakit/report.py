"""Deterministic JSON envelopes, plot-data CSV and event-string parsing."""
from __future__ import annotations

import csv
import io
import json
import math
import re

import numpy as np

from .oracle import Eq, Event, Interval, MeasureSpecError

SCHEMA_VERSION = "1.0"


def _plain(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (frozenset, set)):
        return sorted(_plain(v) for v in obj)
    return obj


def envelope(command, params, result):
    return {"schema_version": SCHEMA_VERSION, "command": command,
            "params": _plain(params), "result": _plain(result)}


def dumps(doc):
    """Byte-stable JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(_plain(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_text(text, path=None, stream=None):
    if path in (None, "-"):
        stream.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def rows_to_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


_CMP = re.compile(r"^\s*([A-Za-z_][\w.]*)\s*(>=|<|==|=)\s*([-+0-9.eE]+|inf|-inf)\s*$")


def parse_event(text):
    """Parse ``"X=0, Z=1, W>=20, W<30"`` into an ``Event``.

    ``=`` gives a point predicate; ``>=`` and ``<`` on the same variable
    combine into a half-open interval.
    """
    if text is None or not text.strip():
        return None
    eqs, bounds = [], {}
    for part in text.split(","):
        m = _CMP.match(part)
        if not m:
            raise MeasureSpecError(f"cannot parse event predicate {part.strip()!r}")
        var, op, val = m.group(1), m.group(2), float(m.group(3))
        if op in ("=", "=="):
            eqs.append(Eq(var, val))
        else:
            lo, hi = bounds.get(var, (-np.inf, np.inf))
            bounds[var] = (val, hi) if op == ">=" else (lo, val)
    preds = eqs + [Interval(v, lo, hi) for v, (lo, hi) in sorted(bounds.items())]
    return Event(tuple(preds))
