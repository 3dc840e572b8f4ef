"""Exact information maps over the sensor state lattice.

Mutual information is evaluated as H(z) - H(z | b): the predictive
measurement entropy minus the belief-weighted measurement entropy per target
cell.  Fisher maps use the bearing-only gradient and take the determinant of
the belief-weighted Fisher matrix.

Per-state evaluation is independent, so values computed for a subset of
states (e.g. greedy successors) are bit-identical to the full map's.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .grid import GridSpec, check_belief
from .sensors import LikelihoodTable, likelihood_rows

NEGATIVE_TOL = 1e-9


@dataclass
class InfoMap:
    """Scalar field over the sensor lattice: ``(n, n)`` or ``(n, n, H)``."""

    values: np.ndarray
    kind: str = "mutual"
    normalized: bool = False
    degenerate: bool = False
    elapsed: float | None = None

    @property
    def modality(self) -> str:
        return "fov" if self.values.ndim == 3 else "bearing"

    @property
    def shape(self):
        return self.values.shape


def _check_table(table: LikelihoodTable, grid: GridSpec, modality: str):
    if table.grid != grid:
        raise ValueError("likelihood table was built for a different grid")
    if table.modality != modality:
        raise ValueError(f"expected a {modality} table, got {table.modality}")


def mutual_info_at(b, sensor, x, grid: GridSpec, table: LikelihoodTable | None = None,
                   state: int | None = None) -> float:
    """Mutual information between the next measurement at ``x`` and the target."""
    b = check_belief(b, grid)
    if table is not None and state is not None:
        rows = table.values[state:state + 1]
    else:
        rows = likelihood_rows(sensor, grid, x)[None]
    return float(_kernels.mi_rows(np.ascontiguousarray(rows), b.ravel())[0])


def mi_states(b, table: LikelihoodTable, states) -> np.ndarray:
    """Mutual information at selected lattice states of ``table``."""
    rows = np.ascontiguousarray(table.values[np.asarray(states, dtype=np.intp)])
    return _kernels.mi_rows(rows, np.ascontiguousarray(b, dtype=np.float64).ravel())


def mi_map_r2(b, sensor, grid: GridSpec, table: LikelihoodTable) -> InfoMap:
    b = check_belief(b, grid)
    _check_table(table, grid, "bearing")
    if not table.matches(sensor, grid):
        raise ValueError("likelihood table does not match the sensor")
    t0 = time.perf_counter()
    vals = _kernels.mi_rows(table.values, b.ravel())
    elapsed = time.perf_counter() - t0
    return InfoMap(vals.reshape(grid.n, grid.n), "mutual", elapsed=elapsed)


def mi_map_se2(b, sensor, grid: GridSpec, table: LikelihoodTable) -> InfoMap:
    b = check_belief(b, grid)
    _check_table(table, grid, "fov")
    if not table.matches(sensor, grid):
        raise ValueError("likelihood table does not match the sensor")
    t0 = time.perf_counter()
    vals = _kernels.mi_rows(table.values, b.ravel())
    elapsed = time.perf_counter() - t0
    return InfoMap(vals.reshape(grid.n, grid.n, grid.heading_bins), "mutual", elapsed=elapsed)


def mi_map(b, table: LikelihoodTable) -> InfoMap:
    if table.modality == "bearing":
        return mi_map_r2(b, table.sensor, table.grid, table)
    return mi_map_se2(b, table.sensor, table.grid, table)


def fisher_matrix(x, target, sigma_rad: float, min_range: float = 0.0) -> np.ndarray:
    """Bearing-only Fisher information for one sensor/target pair.

    ``sigma_rad`` is the bearing noise standard deviation in radians.  Pairs
    closer than ``min_range`` (and exactly coincident pairs) give zeros.
    """
    dn = target[0] - x[0]
    de = target[1] - x[1]
    r2 = dn * dn + de * de
    if r2 == 0.0 or math.sqrt(r2) < min_range:
        return np.zeros((2, 2))
    g = np.array([de, -dn]) / r2
    return np.outer(g, g) / (sigma_rad * sigma_rad)


def fisher_map(b, grid: GridSpec, sigma: float = 10.0) -> InfoMap:
    """Determinant of the belief-averaged Fisher matrix at every cell center.

    ``sigma`` is in degrees; it is converted to radians to match the
    bearing function's units.  Target cells within half a cell width of the
    sensor contribute nothing.
    """
    b = check_belief(b, grid)
    t0 = time.perf_counter()
    sig = math.radians(sigma)
    n_, e_ = grid.flat_centers()
    dn = n_[None, :] - n_[:, None]  # [x, theta]
    de = e_[None, :] - e_[:, None]
    r2 = dn * dn + de * de
    far = np.sqrt(r2) >= 0.5 * grid.width
    inv = np.zeros_like(r2)
    np.divide(1.0, r2 * r2, out=inv, where=far)
    w = inv * b.ravel()[None, :]
    a = (w * de * de).sum(axis=1)
    c = (w * dn * dn).sum(axis=1)
    off = -(w * de * dn).sum(axis=1)
    det = (a * c - off * off) / sig**4
    vals = np.maximum(det, 0.0).reshape(grid.n, grid.n)
    return InfoMap(vals, "fisher", elapsed=time.perf_counter() - t0)


def normalize_map(m) -> InfoMap:
    """Scale a nonnegative map to sum to one.

    An all-zero map (e.g. from a point-mass belief) becomes uniform with
    ``degenerate`` set.
    """
    if isinstance(m, InfoMap):
        base, vals = m, np.asarray(m.values, dtype=np.float64)
    else:
        vals = np.asarray(m, dtype=np.float64)
        base = InfoMap(vals)
    if not np.all(np.isfinite(vals)):
        raise ValueError("map has non-finite entries")
    if vals.size and vals.min() < -NEGATIVE_TOL:
        raise ValueError(f"map has negative entries (min {vals.min():.3g})")
    vals = np.maximum(vals, 0.0)
    total = vals.sum()
    if total > 0.0:
        return replace(base, values=vals / total, normalized=True, degenerate=False)
    return replace(base, values=np.full(vals.shape, 1.0 / vals.size),
                   normalized=True, degenerate=True)
