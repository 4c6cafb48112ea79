"""CSV ingestion and output for tabular data sets."""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np


class CsvError(ValueError):
    """Malformed CSV content; ``row`` is the 1-based line number in the file."""

    def __init__(self, message: str, row: Optional[int] = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


@dataclass
class TabularDataset:
    """Named numeric columns plus an optional string-valued block column."""

    columns: List[str]
    values: Dict[str, np.ndarray]
    response: Optional[str] = None
    block: Optional[str] = None
    block_values: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        if self.values:
            return len(next(iter(self.values.values())))
        return 0 if self.block_values is None else len(self.block_values)

    def numeric_columns(self) -> List[str]:
        return [c for c in self.columns if c != self.block]

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        missing = [c for c in names if c not in self.values]
        if missing:
            raise KeyError(f"unknown column(s): {', '.join(missing)}")
        return np.column_stack([self.values[c] for c in names]) if names else np.empty((self.n, 0))

    def column(self, name: str) -> np.ndarray:
        if name == self.block and self.block_values is not None:
            return self.block_values
        if name not in self.values:
            raise KeyError(f"unknown column: {name}")
        return self.values[name]


def load_csv(path, response: Optional[str] = None, block: Optional[str] = None) -> TabularDataset:
    """Read a comma-separated UTF-8 file with a header row.

    Every column except ``block`` must parse as a float.
    """
    path = os.fspath(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvError("file is empty", 1) from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise CsvError("duplicate column names in header", 1)
        for name in (response, block):
            if name is not None and name not in header:
                raise KeyError(f"column {name!r} not found; available: {', '.join(header)}")
        bi = header.index(block) if block is not None else None
        cols: List[List[float]] = [[] for _ in header]
        blocks: List[str] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise CsvError(f"expected {len(header)} fields, found {len(row)}", lineno)
            for j, cell in enumerate(row):
                if j == bi:
                    blocks.append(cell.strip())
                    continue
                try:
                    cols[j].append(float(cell))
                except ValueError:
                    raise CsvError(f"non-numeric value {cell!r} in column {header[j]!r}", lineno) from None
    values = {h: np.asarray(c, dtype=float) for j, (h, c) in enumerate(zip(header, cols)) if j != bi}
    return TabularDataset(
        columns=header,
        values=values,
        response=response,
        block=block,
        block_values=np.asarray(blocks, dtype=object) if bi is not None else None,
    )


def write_csv(dataset: TabularDataset, path) -> None:
    """Write ``dataset``; floats use the shortest repr that round-trips."""
    with open(os.fspath(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(dataset.columns)
        for i in range(dataset.n):
            w.writerow([
                dataset.block_values[i] if c == dataset.block else repr(float(dataset.values[c][i]))
                for c in dataset.columns
            ])


def write_table(rows: Sequence[Sequence], header: Sequence[str], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
