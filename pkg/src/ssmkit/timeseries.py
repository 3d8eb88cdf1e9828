"""Time-series data files.

Plain-text CSV: a `time` column followed by one column per variable slot,
scalar variables by bare name (`F`, `Pa`) and vector slots with bracketed
indices (`y[0]`, `y[3]`). One row per time, strictly increasing; an empty
cell marks a missing (masked) value. Floats are written with repr so a
write -> read round trip is lossless, masks included.
"""

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError, MissingInputError

_COLUMN_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)(?:\[(\d+(?:,\d+)*)\])?$")
_TIME_RTOL = 1e-9


def _fmt(value):
    return repr(float(value))


@dataclass
class TimeSeries:
    """Named variable values on a common time axis, with per-cell masks."""

    times: np.ndarray
    values: dict = field(default_factory=dict)  # name -> (T, size) float
    masks: dict = field(default_factory=dict)  # name -> (T, size) bool

    def names(self):
        return list(self.values)

    def add(self, name, values, mask=None):
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != len(self.times):
            raise DataFormatError(f"variable {name}: {values.shape[0]} rows for {len(self.times)} times")
        if mask is None:
            mask = np.isfinite(values)
        mask = np.asarray(mask, dtype=bool).reshape(values.shape)
        self.values[name] = values
        self.masks[name] = mask
        return self


def _parse_column(label):
    m = _COLUMN_RE.match(label.strip())
    if not m:
        raise DataFormatError(f"malformed column name {label!r}")
    name = m.group(1)
    if m.group(2) is None:
        return name, None
    return name, tuple(int(p) for p in m.group(2).split(","))


def _flat_index(var, parts):
    if parts is None:
        if var.dims:
            raise DataFormatError(f"vector variable {var.name} needs indexed columns")
        return 0
    if not var.dims:
        raise DataFormatError(f"scalar variable {var.name} must not be indexed")
    if len(parts) != len(var.dims):
        raise DataFormatError(
            f"variable {var.name} has {len(var.dims)} dim(s), column has {len(parts)} index(es)"
        )
    flat = 0
    for dim, p in zip(var.dims, parts):
        if not 0 <= p < dim.size:
            raise DataFormatError(f"index {p} out of range for dim {dim.name} in column of {var.name}")
        flat = flat * dim.size + p
    return flat


def read_timeseries(path, ir, roles=None):
    """Read a CSV time-series file, checking names/shapes against the model.

    `roles`, when given, restricts which variable roles the file may carry
    (e.g. ("obs",) for an observation file).
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise DataFormatError(f"{path}: empty time-series file")
    header = [c.strip() for c in lines[0].split(",")]
    if not header or header[0] != "time":
        raise DataFormatError(f"{path}: first column must be 'time'")
    columns = []  # (var, flat slot)
    for label in header[1:]:
        name, parts = _parse_column(label)
        var = ir.vars.get(name)
        if var is None:
            raise DataFormatError(f"{path}: unknown variable {name!r} (not declared in model {ir.name})")
        if roles is not None and var.role not in roles:
            raise DataFormatError(f"{path}: variable {name} has role {var.role}, expected one of {roles}")
        columns.append((var, _flat_index(var, parts)))

    times = []
    cells = []
    for ln in lines[1:]:
        row = [c.strip() for c in ln.split(",")]
        if len(row) != len(header):
            raise DataFormatError(f"{path}: row with {len(row)} cells, header has {len(header)}")
        try:
            times.append(float(row[0]))
        except ValueError:
            raise DataFormatError(f"{path}: bad time value {row[0]!r}") from None
        cells.append(row[1:])
    times = np.array(times)
    if len(times) > 1 and np.any(np.diff(times) <= 0):
        raise DataFormatError(f"{path}: times must be strictly increasing")

    ts = TimeSeries(times=times)
    for var, _ in columns:
        if var.name not in ts.values:
            ts.values[var.name] = np.zeros((len(times), var.size))
            ts.masks[var.name] = np.zeros((len(times), var.size), dtype=bool)
    for r, row in enumerate(cells):
        for (var, slot), cell in zip(columns, row):
            if cell == "":
                continue
            try:
                ts.values[var.name][r, slot] = float(cell)
            except ValueError:
                raise DataFormatError(f"{path}: bad numeric value {cell!r}") from None
            ts.masks[var.name][r, slot] = True
    return ts


def write_timeseries(path, ts: TimeSeries, ir=None):
    """Inverse of read_timeseries (masked cells become empty)."""
    header = ["time"]
    layout = []
    for name, values in ts.values.items():
        size = values.shape[1]
        if size == 1 and (ir is None or not ir.vars[name].dims):
            header.append(name)
            layout.append((name, 0))
        else:
            var = ir.vars[name] if ir is not None else None
            for flat in range(size):
                if var is not None:
                    label = var.labels()[flat]
                else:
                    label = f"{name}[{flat}]"
                header.append(label)
                layout.append((name, flat))
    lines = [",".join(header)]
    for r, t in enumerate(ts.times):
        row = [_fmt(t)]
        for name, flat in layout:
            if ts.masks[name][r, flat]:
                row.append(_fmt(ts.values[name][r, flat]))
            else:
                row.append("")
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def role_arrays(ts: TimeSeries, ir, role):
    """Align a TimeSeries onto the model's slot layout for one role.

    Returns (times, values (T, n_slots), mask); slots without a column are
    fully masked.
    """
    n = ir.counts[role]
    T = len(ts.times)
    values = np.zeros((T, n))
    mask = np.zeros((T, n), dtype=bool)
    for name in ts.values:
        var = ir.vars.get(name)
        if var is None or var.role != role:
            raise DataFormatError(f"variable {name} is not a {role} variable of model {ir.name}")
        values[:, var.offset : var.offset + var.size] = ts.values[name]
        mask[:, var.offset : var.offset + var.size] = ts.masks[name]
    return ts.times, values, mask


class InputProvider:
    """Piecewise-constant (last-observation-carried-forward) input values."""

    def __init__(self, ir, ts: TimeSeries):
        self.ir = ir
        self.times, values, mask = role_arrays(ts, ir, "input")
        n = ir.counts["input"]
        # forward-fill each slot; remember from which row a value exists
        self.values = np.zeros_like(values)
        self.first_valid = np.full(n, len(self.times))
        for k in range(n):
            have = False
            last = 0.0
            for r in range(len(self.times)):
                if mask[r, k]:
                    last = values[r, k]
                    if not have:
                        self.first_valid[k] = r
                    have = True
                self.values[r, k] = last

    def at(self, t):
        tol = _TIME_RTOL * max(1.0, abs(t))
        idx = int(np.searchsorted(self.times, t + tol, side="right")) - 1
        if idx < 0 or np.any(self.first_valid > idx):
            raise MissingInputError(f"no input values available at t={t:g}")
        return self.values[idx]
