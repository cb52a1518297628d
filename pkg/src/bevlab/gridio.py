"""Serialization of BEV grids: dense CSV (row-major) and compact binary.

Binary layout, little-endian: magic ``BEVG``, u32 rows, u32 cols, four f64
extent values (x_min, x_max, z_min, z_max), then rows*cols f32 cells in
row-major order.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .geometry import BevGrid

__all__ = ["read_grid", "write_grid", "read_grid_csv", "write_grid_csv", "read_grid_binary", "write_grid_binary"]

_MAGIC = b"BEVG"
_HEADER = struct.Struct("<4sII4d")


def write_grid_binary(grid: BevGrid, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, grid.rows, grid.cols, *grid.extent))
        fh.write(grid.cells.astype("<f4").tobytes())


def read_grid_binary(path) -> BevGrid:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise ValueError(f"{path}: truncated grid header")
        magic, rows, cols, x0, x1, z0, z1 = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        data = np.frombuffer(fh.read(rows * cols * 4), dtype="<f4")
        if data.size != rows * cols:
            raise ValueError(f"{path}: truncated grid payload")
    return BevGrid(rows, cols, (x0, x1, z0, z1), data.astype(np.float64).reshape(rows, cols))


def write_grid_csv(grid: BevGrid, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["# extent", *(repr(v) for v in grid.extent)])
        for row in grid.cells:
            writer.writerow(f"{v:.9g}" for v in row)


def read_grid_csv(path) -> BevGrid:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or first[0] != "# extent" or len(first) != 5:
            raise ValueError(f"{path}: missing extent header")
        extent = tuple(float(v) for v in first[1:])
        rows = [[float(v) for v in row] for row in reader if row]
    cells = np.array(rows, dtype=np.float64)
    return BevGrid(cells.shape[0], cells.shape[1], extent, cells)


def write_grid(grid: BevGrid, path) -> None:
    """Dispatch on extension: ``.bevg`` binary, anything else CSV."""
    if Path(path).suffix == ".bevg":
        write_grid_binary(grid, path)
    else:
        write_grid_csv(grid, path)


def read_grid(path) -> BevGrid:
    if Path(path).suffix == ".bevg":
        return read_grid_binary(path)
    return read_grid_csv(path)
