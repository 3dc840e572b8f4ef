"""Measurement models P(z | x, theta) and dense likelihood tables.

Two modalities:

``BearingSensor``
    Gaussian bearing noise, discretized onto 36 bearings and renormalized
    so each row is a probability mass function.  Heading is ignored.
``FovSensor``
    Binary front/rear antenna comparison; P(z=1) depends on which cone
    (front, rear, side) the target bearing falls into relative to heading.

Every likelihood, pointwise or tabulated, goes through the active kernel
backend, so ``build_table`` entries equal pointwise calls bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grid import GridSpec, cell_center

DEFAULT_TABLE_BUDGET = 1 << 30  # bytes


class TableTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class BearingSensor:
    sigma: float = 10.0
    num_bearings: int = 36

    modality = "bearing"
    uses_heading = False

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.num_bearings < 2:
            raise ValueError("need at least two discrete bearings")

    @property
    def z_domain(self) -> np.ndarray:
        return np.arange(self.num_bearings) * (360.0 / self.num_bearings)

    @property
    def num_outcomes(self) -> int:
        return self.num_bearings

    def z_index(self, z) -> int:
        step = 360.0 / self.num_bearings
        k = round(float(z) / step)
        if abs(k * step - float(z)) > 1e-9 or not 0 <= k < self.num_bearings:
            raise ValueError(f"bearing {z!r} is not in the discrete measurement set")
        return k

    def rows(self, dn, de, heading=None) -> np.ndarray:
        """Likelihood rows for arrays of target-minus-sensor offsets."""
        dn = np.ascontiguousarray(dn, dtype=np.float64)
        de = np.ascontiguousarray(de, dtype=np.float64)
        return _kernels.bearing_rows(dn, de, float(self.sigma), self.num_bearings)

    def to_dict(self) -> dict:
        return {"modality": self.modality, "sigma": self.sigma,
                "num_bearings": self.num_bearings}


@dataclass(frozen=True)
class FovSensor:
    p_front: float = 0.9
    p_rear: float = 0.1
    p_side: float = 0.5

    modality = "fov"
    uses_heading = True

    def __post_init__(self):
        for name in ("p_front", "p_rear", "p_side"):
            p = getattr(self, name)
            if not 0.0 < p < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {p}")

    @property
    def z_domain(self) -> np.ndarray:
        return np.array([0, 1])

    @property
    def num_outcomes(self) -> int:
        return 2

    def z_index(self, z) -> int:
        if z not in (0, 1):
            raise ValueError(f"FOV measurement must be 0 or 1, got {z!r}")
        return int(z)

    def rows(self, dn, de, heading=None) -> np.ndarray:
        dn = np.ascontiguousarray(dn, dtype=np.float64)
        de = np.ascontiguousarray(de, dtype=np.float64)
        if heading is None:
            raise ValueError("the FOV sensor needs a heading")
        hd = np.ascontiguousarray(np.broadcast_to(heading, dn.shape), dtype=np.float64)
        p1 = _kernels.fov_p1(dn, de, hd, self.p_front, self.p_rear, self.p_side)
        return np.stack([1.0 - p1, p1], axis=-1)

    def to_dict(self) -> dict:
        return {"modality": self.modality, "p_front": self.p_front,
                "p_rear": self.p_rear, "p_side": self.p_side}


def make_sensor(modality: str, sigma: float = 10.0):
    if modality == "bearing":
        return BearingSensor(sigma=sigma)
    if modality == "fov":
        return FovSensor()
    raise ValueError(f"unknown modality {modality!r}")


def sensor_from_dict(d: dict):
    d = dict(d)
    modality = d.pop("modality")
    if modality == "bearing":
        return BearingSensor(**d)
    if modality == "fov":
        return FovSensor(**d)
    raise ValueError(f"unknown modality {modality!r}")


def _heading_of(sensor, x):
    if not sensor.uses_heading:
        return None
    if len(x) < 3:
        raise ValueError("the FOV sensor needs an SE(2) pose (north, east, heading)")
    return float(x[2])


def likelihood(sensor, z, x, cell, grid: GridSpec) -> float:
    """P(z | x, theta) for a single sensor pose and target cell."""
    k = sensor.z_index(z)
    tn, te = cell_center(grid, cell)
    row = sensor.rows(np.array([tn - x[0]]), np.array([te - x[1]]),
                      _heading_of(sensor, x))
    return float(row[0, k])


def bearing_likelihood(sensor: BearingSensor, z, x, cell, grid: GridSpec) -> float:
    return likelihood(sensor, z, x, cell, grid)


def fov_likelihood(sensor: FovSensor, z, x, cell, grid: GridSpec) -> float:
    return likelihood(sensor, z, x, cell, grid)


def likelihood_rows(sensor, grid: GridSpec, x) -> np.ndarray:
    """P(z | x, theta_i) for every target cell, shape ``(n*n, |Z|)``."""
    tn, te = grid.flat_centers()
    return sensor.rows(tn - x[0], te - x[1], _heading_of(sensor, x))


def sample(sensor, x, cell, grid: GridSpec, rng: np.random.Generator):
    """Draw a measurement from the sensor model with the target in ``cell``."""
    tn, te = cell_center(grid, cell)
    row = sensor.rows(np.array([tn - x[0]]), np.array([te - x[1]]),
                      _heading_of(sensor, x))[0]
    k = int(np.searchsorted(np.cumsum(row), rng.random() * row.sum(), side="right"))
    k = min(k, len(row) - 1)
    return sensor.z_domain[k].item()


@dataclass(frozen=True, eq=False)
class LikelihoodTable:
    """Dense likelihoods over (sensor state, target cell, measurement).

    ``values[x, t, z]`` with the measurement axis contiguous, so the inner
    loop of map generation walks memory with stride 1.  Sensor states are
    cell centers (bearing) or cell centers times heading bins (FOV).
    """

    modality: str
    grid: GridSpec
    sensor: object
    values: np.ndarray

    @property
    def num_states(self) -> int:
        return self.values.shape[0]

    def state_index(self, cell, heading_bin: int | None = None) -> int:
        i, j = cell
        pos = i * self.grid.n + j
        if self.modality == "fov":
            if heading_bin is None:
                raise ValueError("FOV table lookups need a heading bin")
            return pos * self.grid.heading_bins + heading_bin
        return pos

    def matches(self, sensor, grid: GridSpec) -> bool:
        return self.sensor == sensor and self.grid == grid


def table_nbytes(sensor, grid: GridSpec) -> int:
    states = grid.num_cells * (grid.heading_bins if sensor.uses_heading else 1)
    return states * grid.num_cells * sensor.num_outcomes * 8


def build_table(sensor, grid: GridSpec, memory_budget: int = DEFAULT_TABLE_BUDGET) -> LikelihoodTable:
    nbytes = table_nbytes(sensor, grid)
    if nbytes > memory_budget:
        raise TableTooLarge(
            f"likelihood table needs {nbytes / 2**20:.1f} MiB, budget is "
            f"{memory_budget / 2**20:.1f} MiB (n={grid.n}, H={grid.heading_bins})")
    sn, se = grid.flat_centers()
    if sensor.modality == "bearing":
        values = _kernels.bearing_table(sn, se, sn, se, float(sensor.sigma), sensor.num_bearings)
    else:
        values = _kernels.fov_table(sn, se, grid.headings(), sn, se,
                                    sensor.p_front, sensor.p_rear, sensor.p_side)
    values.flags.writeable = False
    return LikelihoodTable(sensor.modality, grid, sensor, values)
