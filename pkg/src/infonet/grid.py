"""Square search field geometry, cell/heading discretization, angle helpers.

Conventions used across the package:

* positions are ``(north, east)`` in meters, origin at the field's corner;
* cell ``(i, j)`` has north index ``i`` and east index ``j``; flattened
  target/sensor index is ``i * n + j``;
* SE(2) sensor states flatten as ``(i * n + j) * H + h``;
* angles are degrees, bearings measured east of north in ``[0, 360)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

BELIEF_TOL = 1e-9


@dataclass(frozen=True)
class GridSpec:
    side_length: float = 200.0
    n: int = 28
    heading_bins: int = 36

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if self.heading_bins < 1:
            raise ValueError(f"heading_bins must be >= 1, got {self.heading_bins}")
        if not self.side_length > 0:
            raise ValueError(f"side_length must be positive, got {self.side_length}")

    @property
    def width(self) -> float:
        return self.side_length / self.n

    @property
    def num_cells(self) -> int:
        return self.n * self.n

    @property
    def heading_step(self) -> float:
        return 360.0 / self.heading_bins

    def heading(self, h: int) -> float:
        """Angle in degrees of heading bin ``h``."""
        if not 0 <= h < self.heading_bins:
            raise IndexError(f"heading bin {h} out of range")
        return h * self.heading_step

    def headings(self) -> np.ndarray:
        return np.arange(self.heading_bins) * self.heading_step

    def centers(self) -> np.ndarray:
        """1-D cell-center coordinates along either axis."""
        return (np.arange(self.n) + 0.5) * self.width

    def flat_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """North and east coordinates of all cells in flattened order."""
        c = self.centers()
        return np.repeat(c, self.n), np.tile(c, self.n)

    def to_dict(self) -> dict:
        return {"side_length": self.side_length, "n": self.n,
                "heading_bins": self.heading_bins}


class TargetCell(NamedTuple):
    i: int
    j: int


class PoseR2(NamedTuple):
    north: float
    east: float


class PoseSE2(NamedTuple):
    north: float
    east: float
    heading: float


def cell_center(grid: GridSpec, cell) -> tuple[float, float]:
    i, j = cell
    if not (0 <= i < grid.n and 0 <= j < grid.n):
        raise IndexError(f"cell {(i, j)} outside {grid.n}x{grid.n} grid")
    w = grid.width
    return ((i + 0.5) * w, (j + 0.5) * w)


def pose_at(grid: GridSpec, cell, heading_bin: int | None = None):
    """Sensor pose at a cell center, optionally with a heading bin."""
    north, east = cell_center(grid, cell)
    if heading_bin is None:
        return PoseR2(north, east)
    return PoseSE2(north, east, grid.heading(heading_bin))


def in_field(grid: GridSpec, north: float, east: float) -> bool:
    return 0.0 <= north <= grid.side_length and 0.0 <= east <= grid.side_length


def normalize_heading(deg: float) -> float:
    h = math.fmod(deg, 360.0)
    if h < 0.0:
        h += 360.0
    return 0.0 if h >= 360.0 else h


def true_bearing(x, target, *, with_flag: bool = False):
    """Bearing from ``x`` to ``target`` in degrees east of north.

    A coincident pair has no bearing; 0.0 is returned and, when
    ``with_flag`` is set, the second element of the result is True.
    """
    dn = target[0] - x[0]
    de = target[1] - x[1]
    coincident = dn == 0.0 and de == 0.0
    beta = 0.0 if coincident else normalize_heading(math.degrees(math.atan2(de, dn)))
    if with_flag:
        return beta, coincident
    return beta


def wrap_angle_diff(a: float, b: float) -> float:
    """Signed smallest rotation from ``b`` to ``a``, in ``(-180, 180]``."""
    d = math.fmod(a - b, 360.0)
    if d > 180.0:
        d -= 360.0
    elif d <= -180.0:
        d += 360.0
    return d


def uniform_belief(grid: GridSpec) -> np.ndarray:
    return np.full((grid.n, grid.n), 1.0 / grid.num_cells)


def point_belief(grid: GridSpec, cell) -> np.ndarray:
    b = np.zeros((grid.n, grid.n))
    b[cell[0], cell[1]] = 1.0
    return b


def check_belief(b, grid: GridSpec | None = None, tol: float = BELIEF_TOL) -> np.ndarray:
    """Validate a belief array and return it as float64."""
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValueError(f"belief must be a square 2-D array, got shape {b.shape}")
    if grid is not None and b.shape != (grid.n, grid.n):
        raise ValueError(f"belief shape {b.shape} does not match grid n={grid.n}")
    if not np.all(np.isfinite(b)) or np.any(b < 0):
        raise ValueError("belief has negative or non-finite entries")
    total = b.sum()
    if abs(total - 1.0) > tol:
        raise ValueError(f"belief sums to {total!r}, expected 1")
    return b
