"""Point clouds, distance matrices and grouping-scale grids.

Vertex ``j`` is the ``j``-th point (or row) of the input everywhere downstream.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

ASYMMETRY_RTOL = 1e-12


class IngestError(ValueError):
    """Raised for malformed or invalid input data."""


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray  # shape (n, d)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise IngestError(f"point cloud must be a non-empty n x d array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise IngestError("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class DistanceMatrix:
    dist: np.ndarray  # shape (n, n)

    def __post_init__(self):
        dm = np.asarray(self.dist, dtype=float)
        if dm.ndim != 2 or dm.shape[0] != dm.shape[1] or dm.shape[0] < 1:
            raise IngestError(f"distance matrix must be square and non-empty, got shape {dm.shape}")
        if not np.all(np.isfinite(dm)):
            raise IngestError("distances must be finite")
        if np.any(dm < 0):
            i, j = np.argwhere(dm < 0)[0]
            raise IngestError(f"negative distance {dm[i, j]} at ({i}, {j})")
        if np.any(np.diag(dm) != 0):
            raise IngestError("distance matrix diagonal must be zero")
        if not np.array_equal(dm, dm.T):
            raise IngestError("distance matrix must be exactly symmetric")
        dm.setflags(write=False)
        object.__setattr__(self, "dist", dm)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    def pair_distances(self) -> np.ndarray:
        """Distances over unordered pairs i < j (empty for n = 1)."""
        iu = np.triu_indices(self.n, k=1)
        return self.dist[iu]


@dataclass(frozen=True)
class ScaleGrid:
    scales: tuple[float, ...]

    def __post_init__(self):
        sc = tuple(float(s) for s in self.scales)
        if not sc:
            raise IngestError("scale grid needs at least one scale")
        if any(not math.isfinite(s) or s < 0 for s in sc):
            raise IngestError("scales must be finite and non-negative")
        if any(b <= a for a, b in zip(sc, sc[1:])):
            raise IngestError("scales must be strictly increasing")
        object.__setattr__(self, "scales", sc)

    def __len__(self) -> int:
        return len(self.scales)

    def __iter__(self):
        return iter(self.scales)


def _read_rows(path: Path) -> list[list[str]]:
    path = Path(path)
    if not path.exists():
        raise IngestError(f"{path}: no such file")
    with path.open(newline="") as fh:
        rows = [[c.strip() for c in row] for row in csv.reader(fh)]
    # trailing blank lines are tolerated, interior ones are not
    while rows and not any(rows[-1]):
        rows.pop()
    return rows


def _parse_float(text: str, row: int, path: Path) -> float:
    try:
        value = float(text)
    except ValueError:
        raise IngestError(f"{path}: row {row}: cannot parse {text!r} as a number") from None
    if not math.isfinite(value):
        raise IngestError(f"{path}: row {row}: non-finite value {text!r}")
    return value


def load_points(path: str | Path) -> PointCloud:
    """Read a header-less CSV with one point per line."""
    path = Path(path)
    rows = _read_rows(path)
    if not rows:
        raise IngestError(f"{path}: empty point file")
    d = len(rows[0])
    points = []
    for i, row in enumerate(rows, start=1):
        if len(row) != d or not all(row):
            raise IngestError(f"{path}: row {i}: expected {d} columns, got {len(row)}")
        points.append([_parse_float(c, i, path) for c in row])
    return PointCloud(np.array(points, dtype=float))


def pairwise_distances(pc: PointCloud) -> DistanceMatrix:
    n = pc.n
    dist = np.zeros((n, n))
    for i in range(n):
        diff = pc.points[i + 1:] - pc.points[i]
        row = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        dist[i, i + 1:] = row
        dist[i + 1:, i] = row
    return DistanceMatrix(dist)


def load_distance_matrix(path: str | Path) -> DistanceMatrix:
    """Read a full symmetric matrix or a strict lower triangle.

    A file whose line ``i`` holds ``i`` entries (``i = 1..n-1``) is a lower
    triangle; a file of ``n`` lines with ``n`` entries each is a full matrix.
    A single line holding a single value is read as the triangle of two points.
    """
    path = Path(path)
    rows = _read_rows(path)
    if not rows:
        raise IngestError(f"{path}: empty distance file")
    values = [[_parse_float(c, i, path) for c in row] for i, row in enumerate(rows, start=1)]
    lengths = [len(r) for r in values]

    if lengths == list(range(1, len(values) + 1)):
        n = len(values) + 1
        dist = np.zeros((n, n))
        for i, row in enumerate(values, start=1):
            for j, v in enumerate(row):
                if v < 0:
                    raise IngestError(f"{path}: row {i}: negative distance {v}")
                dist[i, j] = dist[j, i] = v
        return DistanceMatrix(dist)

    n = len(values)
    for i, length in enumerate(lengths, start=1):
        if length != n:
            raise IngestError(
                f"{path}: row {i}: expected {n} entries for a full matrix "
                f"or {i} for a lower triangle, got {length}"
            )
    full = np.array(values)
    if np.any(full < 0):
        i, j = np.argwhere(full < 0)[0]
        raise IngestError(f"{path}: row {i + 1}: negative distance {full[i, j]}")
    if np.any(np.diag(full) != 0):
        i = int(np.flatnonzero(np.diag(full))[0])
        raise IngestError(f"{path}: row {i + 1}: nonzero diagonal entry {full[i, i]}")
    scale = max(float(np.abs(full).max()), np.finfo(float).tiny)
    gap = float(np.abs(full - full.T).max())
    if gap > ASYMMETRY_RTOL * scale:
        i, j = np.unravel_index(np.argmax(np.abs(full - full.T)), full.shape)
        raise IngestError(
            f"{path}: asymmetric matrix, entries ({i}, {j}) and ({j}, {i}) differ by {gap:g}"
        )
    lower = np.tril(full)
    return DistanceMatrix(lower + np.tril(full, -1).T)


def write_distance_matrix(dm: DistanceMatrix, path: str | Path) -> None:
    """Write the full symmetric CSV form; values round-trip exactly."""
    with Path(path).open("w") as fh:
        for row in dm.dist:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def scale_grid(
    dm: DistanceMatrix,
    m: int = 8,
    strategy: str = "uniform",
    scales: Sequence[float] | None = None,
) -> ScaleGrid:
    """Build the grouping-scale grid.

    ``uniform`` spaces ``m`` values over [min positive distance, max distance]
    inclusive. ``explicit`` validates and sorts ``scales``.
    """
    if strategy == "explicit":
        if scales is None or len(scales) == 0:
            raise IngestError("explicit scale strategy needs a non-empty list")
        vals = [float(s) for s in scales]
        if len(set(vals)) != len(vals):
            raise IngestError(f"duplicate scales in {vals}")
        return ScaleGrid(tuple(sorted(vals)))
    if strategy != "uniform":
        raise IngestError(f"unknown scale strategy {strategy!r}")
    if m < 1:
        raise IngestError("scale count m must be >= 1")
    pairs = dm.pair_distances()
    positive = pairs[pairs > 0]
    if positive.size == 0:
        raise IngestError("uniform scale grid needs at least one positive distance")
    lo, hi = float(positive.min()), float(positive.max())
    if lo == hi:
        return ScaleGrid((lo,))
    grid = np.linspace(lo, hi, m)
    grid[0], grid[-1] = lo, hi
    return ScaleGrid(tuple(float(v) for v in grid))
