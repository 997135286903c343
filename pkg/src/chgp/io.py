"""Serialization helpers shared by the experiment harnesses and the CLI.

Floats are written with 17 significant digits so that every value
round-trips exactly; JSON is written with sorted keys so files are stable.
"""

import csv
import dataclasses
import io
import json
import math
import os

import numpy as np

from .design import Locations
from .errors import DomainError
from .gp import Dataset, GPModel
from .kernels import CHParams, GCParams, MaternParams, TensorSpec

__all__ = [
    "CSVFormatError",
    "fmt",
    "write_table",
    "read_numeric_csv",
    "read_dataset",
    "kernel_to_dict",
    "kernel_from_dict",
    "model_to_dict",
    "model_from_dict",
    "locations_to_dict",
    "write_json",
    "dumps_json",
]

_KERNEL_TYPES = {
    "matern": MaternParams,
    "ch": CHParams,
    "gc": GCParams,
}


class CSVFormatError(ValueError):
    """Malformed CSV input; the message names the offending line."""


def fmt(value):
    """Text form of a table cell; floats use 17 significant digits."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        return format(v, ".17g")
    return str(value)


def write_table(path_or_buffer, header, rows):
    """Write a CSV with ``header`` and rows of cells (``\\n`` line endings)."""
    own = isinstance(path_or_buffer, (str, os.PathLike))
    fh = open(path_or_buffer, "w", newline="") if own else path_or_buffer
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    finally:
        if own:
            fh.close()


def read_numeric_csv(path, expected_header=None):
    """Read a headed all-numeric CSV.

    Returns
    -------
    header : list of str
    values : ndarray, shape (n_rows, n_columns)

    Raises
    ------
    CSVFormatError
        On an empty file, an unexpected header, a row with the wrong number of
        cells or a non-numeric cell; the message carries the line number.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CSVFormatError(f"{path}: line 1: file is empty")
    header = [h.strip() for h in rows[0]]
    if expected_header is not None and header not in expected_header:
        options = " or ".join(",".join(h) for h in expected_header)
        raise CSVFormatError(f"{path}: line 1: header {','.join(header)!r}, expected {options}")
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise CSVFormatError(
                f"{path}: line {lineno}: expected {len(header)} columns, found {len(row)}"
            )
        try:
            values.append([float(c) for c in row])
        except ValueError:
            bad = next(c for c in row if not _is_float(c))
            raise CSVFormatError(f"{path}: line {lineno}: non-numeric cell {bad!r}") from None
    if not values:
        raise CSVFormatError(f"{path}: line 2: no data rows")
    arr = np.array(values)
    if not np.all(np.isfinite(arr)):
        row = int(np.argwhere(~np.isfinite(arr))[0, 0])
        raise CSVFormatError(f"{path}: line {row + 2}: non-finite value")
    return header, arr


def _is_float(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


COORD_HEADERS = (["x1"], ["x1", "x2"], ["x1", "x2", "x3"])
SPHERICAL_HEADER = ["lon", "lat"]


def read_locations(path, metric="euclidean", radius=None, with_z=False):
    """Read locations (and optionally ``z``) from a CSV with the documented schema."""
    tail = ["z"] if with_z else []
    if metric == "euclidean":
        allowed = [h + tail for h in COORD_HEADERS]
    else:
        allowed = [SPHERICAL_HEADER + tail]
    header, arr = read_numeric_csv(path, allowed)
    n_coord = len(header) - len(tail)
    kw = {} if radius is None else {"radius": radius}
    try:
        locs = Locations(arr[:, :n_coord], metric=metric, **kw)
    except DomainError as exc:
        raise CSVFormatError(f"{path}: {exc}") from None
    return (locs, arr[:, n_coord]) if with_z else locs


def read_dataset(path, metric="euclidean", radius=None):
    locs, z = read_locations(path, metric, radius, with_z=True)
    return Dataset(locs, z)


def kernel_to_dict(kernel):
    if isinstance(kernel, TensorSpec):
        return {
            "family": "tensor",
            "sigma2": kernel.sigma2,
            "components": [kernel_to_dict(c) for c in kernel.components],
        }
    for name, cls in _KERNEL_TYPES.items():
        if isinstance(kernel, cls):
            out = {"family": name}
            out.update(dataclasses.asdict(kernel))
            return out
    raise DomainError(f"cannot serialize kernel {kernel!r}")


def kernel_from_dict(d):
    d = dict(d)
    family = d.pop("family")
    if family == "tensor":
        comps = tuple(kernel_from_dict(c) for c in d["components"])
        return TensorSpec(comps, float(d["sigma2"]))
    try:
        cls = _KERNEL_TYPES[family]
    except KeyError:
        raise DomainError(f"unknown kernel family {family!r}") from None
    return cls(**{k: float(v) for k, v in d.items()})


def model_to_dict(model):
    return {
        "kernel": kernel_to_dict(model.kernel),
        "mean_b": model.mean_b,
        "nugget_tau2": model.nugget_tau2,
        "estimate_mean": model.estimate_mean,
        "mean_correction": model.mean_correction,
    }


def model_from_dict(d):
    return GPModel(
        kernel=kernel_from_dict(d["kernel"]),
        mean_b=float(d["mean_b"]),
        nugget_tau2=float(d["nugget_tau2"]),
        estimate_mean=bool(d["estimate_mean"]),
        mean_correction=bool(d.get("mean_correction", True)),
    )


def locations_to_dict(locs):
    return {"metric": locs.metric, "radius": locs.radius, "n": locs.n, "dim": locs.dim}


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _normalize(obj):
    # floats as exact round-trip values; tuples as lists
    if isinstance(obj, dict):
        return {str(k): _normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_normalize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_normalize(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        return _normalize(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def dumps_json(obj):
    """Stable JSON text (sorted keys, two-space indent, trailing newline)."""
    return json.dumps(_normalize(obj), sort_keys=True, indent=2, default=_json_default) + "\n"


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(dumps_json(obj))


def table_text(header, rows):
    """CSV text of a table, as :func:`write_table` would write it."""
    buf = io.StringIO()
    write_table(buf, header, rows)
    return buf.getvalue()
