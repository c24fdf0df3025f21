"""ESRI-style ASCII grid terrain parsing and bilinear sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import NoElevation, ParseError

_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize")
_DEFAULT_NODATA = -9999.0


@dataclass
class TerrainGrid:
    """Row-major elevation grid; row 0 is the northernmost row.

    `geographic` is True when the lower-left corner reads as lon/lat
    degrees rather than projected meters (decided from header magnitudes).
    """

    ncols: int
    nrows: int
    xllcorner: float
    yllcorner: float
    cellsize: float
    nodata: float
    values: np.ndarray  # shape (nrows, ncols), float64
    geographic: bool = False

    def node_x(self, col: int) -> float:
        return self.xllcorner + col * self.cellsize

    def node_y(self, row: int) -> float:
        # row index counts from the northern edge
        return self.yllcorner + (self.nrows - 1 - row) * self.cellsize

    def is_nodata(self, row: int, col: int) -> bool:
        return self.values[row, col] == self.nodata


def parse_terrain(text: str) -> TerrainGrid:
    """Parse the ncols/nrows/xllcorner/yllcorner/cellsize/NODATA_value header
    followed by nrows rows of elevations (first row = northernmost)."""
    header: dict[str, float] = {}
    lines = text.splitlines()
    data_start = 0
    for i, line in enumerate(lines):
        parts = line.split()
        if len(parts) == 2 and parts[0].lower() in (*_HEADER_KEYS, "nodata_value"):
            try:
                header[parts[0].lower()] = float(parts[1])
            except ValueError as exc:
                raise ParseError(f"bad header value {parts[1]!r}", path=f"line {i + 1}") from exc
        else:
            data_start = i
            break
    else:
        data_start = len(lines)

    for key in _HEADER_KEYS:
        if key not in header:
            raise ParseError(f"missing header field {key!r}", path="header")
    ncols = int(header["ncols"])
    nrows = int(header["nrows"])
    cellsize = header["cellsize"]
    if ncols <= 0 or nrows <= 0:
        raise ParseError(f"grid size {ncols}x{nrows} not positive", path="header")
    if cellsize <= 0:
        raise ParseError(f"cellsize {cellsize} not positive", path="header")
    nodata = header.get("nodata_value", _DEFAULT_NODATA)

    flat: list[float] = []
    for i in range(data_start, len(lines)):
        parts = lines[i].split()
        if not parts:
            continue
        try:
            flat.extend(float(p) for p in parts)
        except ValueError as exc:
            raise ParseError(f"bad elevation value: {exc}", path=f"line {i + 1}") from exc

    expected = ncols * nrows
    if len(flat) != expected:
        raise ParseError(
            f"value count mismatch: expected {expected} ({nrows} rows x {ncols} cols), found {len(flat)}",
            path="data",
        )

    values = np.asarray(flat, dtype=np.float64).reshape(nrows, ncols)
    xll, yll = header["xllcorner"], header["yllcorner"]
    geographic = abs(xll) <= 180 and abs(yll) <= 90 and cellsize <= 0.5
    return TerrainGrid(
        ncols=ncols,
        nrows=nrows,
        xllcorner=xll,
        yllcorner=yll,
        cellsize=cellsize,
        nodata=nodata,
        values=values,
        geographic=geographic,
    )


def sample_elevation(grid: TerrainGrid, x: float, y: float) -> float:
    """Bilinear elevation at (x, y) in the grid's native coordinates.

    Raises NoElevation outside the node extent or when any of the four
    surrounding nodes is NODATA.
    """
    if grid.ncols < 2 or grid.nrows < 2:
        raise NoElevation("grid too small for bilinear sampling")
    gx = (x - grid.xllcorner) / grid.cellsize
    gy = (y - grid.yllcorner) / grid.cellsize
    if not (0 <= gx <= grid.ncols - 1 and 0 <= gy <= grid.nrows - 1):
        raise NoElevation(f"({x}, {y}) outside grid extent")

    c0 = min(int(math.floor(gx)), grid.ncols - 2)
    ry = (grid.nrows - 1) - gy  # row coordinate measured from the north edge
    r0 = min(int(math.floor(ry)), grid.nrows - 2)
    fx = gx - c0
    fy = ry - r0

    q = grid.values[r0:r0 + 2, c0:c0 + 2]
    if np.any(q == grid.nodata):
        raise NoElevation(f"({x}, {y}) touches a NODATA node")

    top = q[0, 0] * (1 - fx) + q[0, 1] * fx
    bottom = q[1, 0] * (1 - fx) + q[1, 1] * fx
    return top * (1 - fy) + bottom * fy
