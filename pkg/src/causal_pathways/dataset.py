"""Time series container, CSV ingestion and lag-aligned sample extraction."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed input data (bad files, invariant violations)."""


@dataclass(frozen=True)
class TimeSeriesDataset:
    """A T x N sample matrix with variable names and an optional row mask.

    ``mask[t]`` is True when row ``t`` may be used. The object is treated as
    immutable; the underlying arrays are marked read-only.
    """

    values: np.ndarray
    names: tuple
    mask: Optional[np.ndarray] = None
    time_step: float = 1.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise DataError("values must be a T x N matrix")
        T, N = values.shape
        if T < 1 or N < 1:
            raise DataError(f"dataset must have T >= 1 and N >= 1, got {values.shape}")
        names = tuple(str(n) for n in self.names)
        if len(names) != N:
            raise DataError(f"{len(names)} names given for {N} columns")
        seen = set()
        for name in names:
            if name in seen:
                raise DataError(f"duplicate variable name {name!r}")
            seen.add(name)
        mask = None
        if self.mask is not None:
            mask = np.array(self.mask, dtype=bool, copy=True).ravel()
            if mask.shape[0] != T:
                raise DataError(f"mask length {mask.shape[0]} != T={T}")
        usable = values if mask is None else values[mask]
        if not np.all(np.isfinite(usable)):
            raise DataError("non-finite values in unmasked rows")
        values.setflags(write=False)
        if mask is not None:
            mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "mask", mask)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.shape[1]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DataError(f"unknown variable {name!r}; known: {', '.join(self.names)}") from None

    def usable_rows(self) -> np.ndarray:
        if self.mask is None:
            return np.ones(self.T, dtype=bool)
        return self.mask.copy()

    def with_values(self, values: np.ndarray) -> "TimeSeriesDataset":
        return TimeSeriesDataset(values, self.names, self.mask, self.time_step)

    def add_variable(self, name: str, column: np.ndarray) -> "TimeSeriesDataset":
        values = np.column_stack([self.values, np.asarray(column, dtype=float)])
        return TimeSeriesDataset(values, self.names + (name,), self.mask, self.time_step)


def load_csv(path, time_step: float = 1.0) -> TimeSeriesDataset:
    """Read a header-first CSV file; an optional ``mask`` column holds 0/1 flags."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file, header row required")
    header = [h.strip() for h in rows[0]]
    seen = {}
    for col, name in enumerate(header):
        if not name:
            raise DataError(f"{path}: row 1, column {col + 1}: empty variable name")
        if name in seen:
            raise DataError(
                f"{path}: row 1, column {col + 1}: duplicate variable name {name!r} "
                f"(first seen in column {seen[name] + 1})"
            )
        seen[name] = col
    mask_col = seen.get("mask")
    parsed = []
    for r, row in enumerate(rows[1:], start=2):
        if not any(cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise DataError(f"{path}: row {r}: expected {len(header)} fields, got {len(row)}")
        line = []
        for col, cell in enumerate(row):
            try:
                line.append(float(cell))
            except ValueError:
                raise DataError(
                    f"{path}: row {r}, column {col + 1} ({header[col]}): "
                    f"non-numeric value {cell.strip()!r}"
                ) from None
        parsed.append(line)
    if not parsed:
        raise DataError(f"{path}: no data rows")
    values = np.array(parsed, dtype=float)
    mask = None
    if mask_col is not None:
        flags = values[:, mask_col]
        if not np.all(np.isin(flags, (0.0, 1.0))):
            bad = int(np.flatnonzero(~np.isin(flags, (0.0, 1.0)))[0])
            raise DataError(f"{path}: mask column must be 0/1 (first bad data row {bad + 1})")
        mask = flags.astype(bool)
        keep = [c for c in range(len(header)) if c != mask_col]
        values = values[:, keep]
        header = [header[c] for c in keep]
    return TimeSeriesDataset(values, tuple(header), mask, time_step)


def save_csv(ds: TimeSeriesDataset, path) -> None:
    from .fileio import atomic_write

    lines = [",".join(ds.names + (("mask",) if ds.mask is not None else ()))]
    for t in range(ds.T):
        fields = [repr(float(v)) for v in ds.values[t]]
        if ds.mask is not None:
            fields.append("1" if ds.mask[t] else "0")
        lines.append(",".join(fields))
    atomic_write(path, "\n".join(lines) + "\n")


def standardize(ds: TimeSeriesDataset) -> TimeSeriesDataset:
    """Z-score every column over the unmasked rows (population variance)."""
    rows = ds.usable_rows()
    if not rows.any():
        raise DataError("no unmasked rows to standardize")
    used = ds.values[rows]
    mean = used.mean(axis=0)
    std = used.std(axis=0)
    for j, s in enumerate(std):
        if not s > 0:
            raise DataError(f"column {ds.names[j]!r} has zero variance")
    return ds.with_values((ds.values - mean) / std)


def _node_parts(node) -> tuple[int, int]:
    if hasattr(node, "variable"):
        return int(node.variable), int(node.lag)
    var, lag = node
    return int(var), int(lag)


def lagged_matrix(ds: TimeSeriesDataset, nodes: Sequence) -> np.ndarray:
    """Stack the columns of ``nodes`` aligned at a common reference time.

    Row ``s`` corresponds to time ``t = L + s`` with ``L`` the largest lag;
    column ``j`` holds variable ``nodes[j].variable`` at ``t - nodes[j].lag``.
    Rows touching any masked sample are dropped, so the result has
    ``M <= T - L`` rows.
    """
    parts = [_node_parts(n) for n in nodes]
    if not parts:
        raise DataError("no nodes requested")
    for var, lag in parts:
        if not 0 <= var < ds.N:
            raise DataError(f"variable index {var} out of range for N={ds.N}")
        if lag < 0:
            raise DataError(f"negative lag {lag}")
    L = max(lag for _, lag in parts)
    if L > ds.T - 1:
        raise DataError(f"lag {L} exceeds T - 1 = {ds.T - 1}")
    M = ds.T - L
    out = np.empty((M, len(parts)))
    keep = np.ones(M, dtype=bool)
    for j, (var, lag) in enumerate(parts):
        out[:, j] = ds.values[L - lag: ds.T - lag, var]
        if ds.mask is not None:
            keep &= ds.mask[L - lag: ds.T - lag]
    if ds.mask is not None:
        out = out[keep]
    if out.shape[0] == 0:
        raise DataError("no usable samples left after lag alignment and masking")
    return out


def effective_sample_count(ds: TimeSeriesDataset, max_lag: int) -> int:
    if ds.mask is None:
        return max(ds.T - max_lag, 0)
    keep = np.ones(ds.T - max_lag, dtype=bool)
    for lag in range(max_lag + 1):
        keep &= ds.mask[max_lag - lag: ds.T - lag]
    return int(keep.sum())
