"""CSV-backed datasets with a header-to-variable binding.

Files are RFC-4180 with a mandatory header row and '.' as the decimal
separator. Original cell text is retained so unchanged values can be
echoed byte-for-byte on output; changed values are written with
``repr(float)``, which round-trips exactly.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, DrlError
from .lang import VariableBinding


@dataclass
class Dataset:
    header: tuple[str, ...]
    values: np.ndarray            # (n_rows, n_cols) float64
    raw_cells: list[list[str]]    # original text, row-major

    @property
    def n_rows(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_cols(self) -> int:
        return int(self.values.shape[1])

    def binding(self) -> VariableBinding:
        return VariableBinding(self.header, source="csv")

    def column_permutation(self, names: tuple[str, ...]) -> list[int]:
        """Column index of each requested name; raises if one is missing."""
        lookup = {name: i for i, name in enumerate(self.header)}
        missing = [n for n in names if n not in lookup]
        if missing:
            raise DimensionMismatchError(
                f"data file lacks columns required by the constraints: {missing}")
        return [lookup[n] for n in names]


def read_csv(path: str | Path) -> Dataset:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return _read(fh, str(path))


def read_csv_text(text: str, origin: str = "<string>") -> Dataset:
    return _read(io.StringIO(text), origin)


def _read(fh, origin: str) -> Dataset:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise DrlError(f"{origin}: empty CSV (header row is mandatory)") from None
    header = tuple(h.strip() for h in header)
    raw: list[list[str]] = []
    rows: list[list[float]] = []
    for line_no, cells in enumerate(reader, start=2):
        if not cells:
            continue
        if len(cells) != len(header):
            raise DrlError(
                f"{origin}:{line_no}: expected {len(header)} fields, got {len(cells)}")
        parsed: list[float] = []
        for col, cell in enumerate(cells):
            try:
                parsed.append(float(cell))
            except ValueError:
                raise DrlError(
                    f"{origin}:{line_no}: column {header[col]!r}: "
                    f"not a number: {cell!r}") from None
        raw.append(list(cells))
        rows.append(parsed)
    values = np.array(rows, dtype=np.float64) if rows else np.empty((0, len(header)))
    return Dataset(header, values, raw)


def reject_nonfinite(ds: Dataset) -> None:
    bad = np.argwhere(~np.isfinite(ds.values))
    if bad.size:
        r, c = bad[0]
        raise DrlError(
            f"non-finite value in row {int(r) + 1}, column {ds.header[int(c)]!r} "
            f"(NaN/inf rows cannot be refined)")


def format_value(v: float) -> str:
    if math.isnan(v) or math.isinf(v):
        raise DrlError(f"cannot serialize non-finite value {v!r}")
    return repr(v)


def write_csv(path: str | Path, ds: Dataset, values: np.ndarray | None = None,
              changed: np.ndarray | None = None) -> None:
    """Write ``values`` (default: the dataset's own) under the dataset header.

    Cells whose value is unchanged keep their original text so an
    already-valid file survives a round trip byte-identically, modulo
    line-ending normalization.
    """
    out = ds.values if values is None else values
    if out.shape != (ds.n_rows, ds.n_cols):
        raise DimensionMismatchError(
            f"value matrix {out.shape} does not match dataset "
            f"({ds.n_rows}, {ds.n_cols})")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ds.header)
        for r in range(ds.n_rows):
            row_out: list[str] = []
            for c in range(ds.n_cols):
                keep = changed is not None and not changed[r, c]
                if values is None or keep:
                    row_out.append(ds.raw_cells[r][c])
                else:
                    row_out.append(format_value(float(out[r, c])))
            writer.writerow(row_out)
