"""JSON Lines datasets and CSV output.

A dataset holds one record per line::

    {"weight": 0.5, "factors": [{"type": "euclidean", "value": [0.1, 2.0]},
                                {"type": "positive", "value": 0.7},
                                {"type": "sphere", "value": [0, 0, 1]},
                                {"type": "spd_bw", "value": [1, 0, 0, 1]}]}

``spd_bw`` values are row-major (flat or nested). Weights are optional but must
be given for all records or none (none means uniform); they are relative and
get normalized to sum to one. Floats are written with
17 significant digits so that they read back bit for bit.
"""

import csv
import json
import math

import numpy as np

from .errors import InvalidInput, ProductMedianError
from .manifolds import PositiveHalfLine, SpdBuresWasserstein, make_factor
from .product import ProductManifold, WeightedSample


class DatasetError(InvalidInput):
    """Malformed dataset record; ``line`` is 1-based."""

    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def fmt(x) -> str:
    """Float with 17 significant digits (integers and strings pass through)."""
    if isinstance(x, (bool, np.bool_)):
        return str(x).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x) or math.isinf(x):
            return str(x)
        return f"{x:.17g}"
    return str(x)


def _json_number_list(values):
    return "[" + ", ".join(fmt(float(v)) for v in np.ravel(values)) + "]"


def _factor_value(factor, raw, line):
    if isinstance(factor, PositiveHalfLine):
        if isinstance(raw, list):
            if len(raw) != 1:
                raise DatasetError("positive value must be a scalar", line)
            raw = raw[0]
        return float(raw)
    arr = np.asarray(raw, dtype=float)
    if isinstance(factor, SpdBuresWasserstein):
        return arr.reshape(factor.n, factor.n) if arr.size == factor.n**2 else arr
    return arr


def _infer_factor(obj, line):
    kind = obj.get("type")
    raw = obj.get("value")
    if raw is None:
        raise DatasetError("factor object lacks 'value'", line)
    if kind == "positive":
        return make_factor(kind)
    arr = np.asarray(raw, dtype=float)
    if kind == "spd_bw":
        d = math.isqrt(arr.size)
        if d * d != arr.size:
            raise DatasetError(f"spd_bw value has {arr.size} entries, not a square", line)
        return make_factor(kind, d)
    if kind in ("euclidean", "sphere"):
        return make_factor(kind, arr.size)
    raise DatasetError(f"unknown factor type {kind!r}", line)


def parse_dataset(lines, manifold: ProductManifold = None):
    """Parse JSON Lines records into ``(manifold, sample)``.

    The manifold is inferred from the first record unless given.
    """
    points, weights = [], []
    for line, text in enumerate(lines, start=1):
        if not text.strip():
            continue
        try:
            rec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"invalid JSON: {exc.msg}", line) from None
        if not isinstance(rec, dict) or not isinstance(rec.get("factors"), list):
            raise DatasetError("record must be an object with a 'factors' list", line)
        objs = rec["factors"]
        try:
            if manifold is None:
                manifold = ProductManifold([_infer_factor(o, line) for o in objs])
            if len(objs) != len(manifold):
                raise DatasetError(f"{len(objs)} factors, expected {len(manifold)}", line)
            comps = []
            for f, o in zip(manifold.factors, objs):
                if o.get("type") != f.kind:
                    raise DatasetError(f"factor type {o.get('type')!r}, expected {f.kind!r}", line)
                comps.append(_factor_value(f, o.get("value"), line))
            points.append(manifold.check_point(comps))
        except DatasetError:
            raise
        except (ProductMedianError, TypeError, ValueError) as exc:
            raise DatasetError(str(exc), line) from None
        weights.append(rec.get("weight"))
    if not points:
        raise DatasetError("dataset is empty")
    given = [w is not None for w in weights]
    if any(given) and not all(given):
        raise DatasetError("weights must be given for every record or for none")
    try:
        if all(given):
            return manifold, WeightedSample.normalized(manifold, points, [float(w) for w in weights])
        return manifold, WeightedSample(manifold, points)
    except (ProductMedianError, TypeError, ValueError) as exc:
        raise DatasetError(str(exc)) from None


def read_dataset(path, manifold: ProductManifold = None):
    with open(path, encoding="utf-8") as fh:
        return parse_dataset(fh, manifold)


def point_record(manifold: ProductManifold, z, weight=1.0) -> str:
    """One JSON Lines record for a product point."""
    parts = []
    for f, c in zip(manifold.factors, z):
        value = fmt(float(c)) if isinstance(f, PositiveHalfLine) else _json_number_list(c)
        parts.append(f'{{"type": "{f.kind}", "value": {value}}}')
    return f'{{"weight": {fmt(float(weight))}, "factors": [{", ".join(parts)}]}}'


def write_dataset(path, manifold: ProductManifold, points, weights=None):
    weights = [None] * len(points) if weights is None else list(weights)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for z, w in zip(points, weights):
            fh.write(point_record(manifold, z, 1.0 if w is None else w) + "\n")


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([fmt(v) for v in row])


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.reader(fh))


__all__ = [
    "DatasetError",
    "fmt",
    "parse_dataset",
    "point_record",
    "read_csv",
    "read_dataset",
    "write_csv",
    "write_dataset",
]
