"""Cosine-series decomposition of information maps and trajectories.

The basis is separable.  Along each spatial axis the functions are
``cos(k * pi * x / L)`` sampled at cell centers.  Over SE(2) a heading factor
is appended: ``cos(k3 * psi)`` for k3 >= 0 and ``sin(k3 * psi)`` for k3 >= 1.
Each factor is normalized numerically on the actual lattice so that

    sum_x F_k(x)**2 * cell_measure == 1,

with cell measure ``w**2`` over R^2 and ``w**2 * (2*pi/H)`` over SE(2).

Maps are handled as probability masses per lattice point, so
``phi_k = sum_x m(x) F_k(x)`` and reconstruction returns masses.

Coefficient order is k1-major, then k2, then the heading function
(k3 ascending, cos before sin).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .grid import GridSpec
from .io import FormatError, read_container, write_container

ORDERING_VERSION = 1
CLAMP_FLOOR = 1e-12
DEFAULT_K = {"bearing": 5, "fov": 17}


def _axis_factors(grid: GridSpec, K: int) -> tuple[np.ndarray, np.ndarray]:
    c = grid.centers()
    ks = np.arange(K + 1)
    raw = np.cos(np.outer(ks, c) * (math.pi / grid.side_length))
    norms = np.sqrt((raw * raw).sum(axis=1) * grid.width)
    return raw, norms


def _heading_functions(K: int) -> list[tuple[int, str]]:
    out = [(0, "cos")]
    for k in range(1, K + 1):
        out += [(k, "cos"), (k, "sin")]
    return out


def index_set(modality: str, K: int) -> list[tuple]:
    """Multi-indices in coefficient order."""
    ks = range(K + 1)
    if modality == "bearing":
        return [(k1, k2) for k1 in ks for k2 in ks]
    return [(k1, k2, k3, kind) for k1 in ks for k2 in ks for k3, kind in _heading_functions(K)]


def ergodic_weights(modality: str, K: int) -> np.ndarray:
    """(1 + |k|^2) ** (-(d + 1) / 2) in coefficient order; d is 2 or 3."""
    d = 2 if modality == "bearing" else 3
    sq = np.array([k[0] ** 2 + k[1] ** 2 + (k[2] ** 2 if d == 3 else 0)
                   for k in index_set(modality, K)], dtype=np.float64)
    return (1.0 + sq) ** (-(d + 1) / 2.0)


def _trig(kind: str, x):
    return np.cos(x) if kind == "cos" else np.sin(x)


@dataclass(frozen=True)
class SpectralBasis:
    grid: GridSpec
    K: int
    modality: str = "bearing"

    def __post_init__(self):
        if self.modality not in ("bearing", "fov"):
            raise ValueError(f"unknown modality {self.modality!r}")
        if self.K < 0:
            raise ValueError("K must be nonnegative")
        if self.K > self.grid.n - 1:
            raise ValueError(f"K={self.K} aliases on an n={self.grid.n} lattice (max {self.grid.n - 1})")
        if self.modality == "fov" and 2 * self.K + 1 > self.grid.heading_bins:
            raise ValueError(f"K={self.K} needs at least {2 * self.K + 1} heading bins")

    @property
    def dim(self) -> int:
        return 2 if self.modality == "bearing" else 3

    @property
    def cell_measure(self) -> float:
        m = self.grid.width ** 2
        if self.modality == "fov":
            m *= 2.0 * math.pi / self.grid.heading_bins
        return m

    @cached_property
    def _axis(self):
        raw, norms = _axis_factors(self.grid, self.K)
        if np.any(norms < 1e-12):
            raise ValueError("degenerate spatial basis function on this lattice")
        return raw / norms[:, None], norms

    @cached_property
    def _head(self):
        H = self.grid.heading_bins
        psi = np.arange(H) * (2.0 * math.pi / H)
        funcs = _heading_functions(self.K)
        raw = np.array([_trig(kind, k * psi) for k, kind in funcs])
        norms = np.sqrt((raw * raw).sum(axis=1) * (2.0 * math.pi / H))
        if np.any(norms < 1e-12):
            raise ValueError("degenerate heading basis function on this lattice")
        return raw / norms[:, None], norms, funcs

    @property
    def spatial(self) -> np.ndarray:
        """Normalized axis factors, shape ``(K+1, n)``."""
        return self._axis[0]

    @property
    def heading(self) -> np.ndarray:
        """Normalized heading factors, shape ``(2K+1, H)``."""
        return self._head[0]

    @cached_property
    def indices(self) -> list[tuple]:
        return index_set(self.modality, self.K)

    def __len__(self) -> int:
        if self.modality == "bearing":
            return (self.K + 1) ** 2
        return (self.K + 1) ** 2 * (2 * self.K + 1)

    def position(self, k) -> int:
        """Position of multi-index ``k`` in the coefficient vector."""
        k1, k2 = k[0], k[1]
        for v in (k1, k2):
            if not 0 <= v <= self.K:
                raise IndexError(f"index {k} out of range for K={self.K}")
        if self.modality == "bearing":
            if len(k) != 2:
                raise ValueError("R^2 multi-index has two components")
            return k1 * (self.K + 1) + k2
        k3, kind = k[2], k[3]
        if not 0 <= k3 <= self.K or kind not in ("cos", "sin") or (k3 == 0 and kind == "sin"):
            raise IndexError(f"index {k} out of range")
        m = 0 if k3 == 0 else 2 * k3 - 1 + (kind == "sin")
        return (k1 * (self.K + 1) + k2) * (2 * self.K + 1) + m

    @property
    def dc(self) -> float:
        """The (0, 0[, 0]) coefficient, identical for every normalized map."""
        v = self.spatial[0, 0] ** 2
        if self.modality == "fov":
            v *= self.heading[0, 0]
        return float(v)

    @cached_property
    def weights(self) -> np.ndarray:
        return ergodic_weights(self.modality, self.K)

    def normalizer(self, k) -> float:
        """h_k, the lattice norm of the unnormalized basis function ``k``."""
        norms = self._axis[1]
        h = norms[k[0]] * norms[k[1]]
        if self.modality == "fov":
            m = self.position((0, 0) + tuple(k[2:])) % (2 * self.K + 1)
            h *= self._head[1][m]
        return float(h)

    def evaluate(self, k, x) -> float:
        """F_k at an arbitrary pose ``(north, east[, heading_deg])``."""
        L = self.grid.side_length
        v = math.cos(k[0] * math.pi * x[0] / L) * math.cos(k[1] * math.pi * x[1] / L)
        if self.modality == "fov":
            psi = math.radians(x[2])
            v *= math.cos(k[2] * psi) if k[3] == "cos" else math.sin(k[2] * psi)
        return v / self.normalizer(k)

    def matrix(self) -> np.ndarray:
        """Dense basis matrix, rows in coefficient order, columns in lattice order."""
        a = self.spatial
        F = np.einsum("ai,bj->abij", a, a)
        if self.modality == "fov":
            F = np.einsum("abij,ch->abcijh", F, self.heading)
        return F.reshape(len(self), -1)


@dataclass
class CoeffVector:
    values: np.ndarray
    modality: str
    K: int
    ordering: int = ORDERING_VERSION

    def __len__(self):
        return len(self.values)


def basis_r2(basis: SpectralBasis, k, x) -> float:
    if basis.modality != "bearing":
        raise ValueError("basis_r2 needs an R^2 basis")
    return basis.evaluate(k, x)


def basis_se2(basis: SpectralBasis, k, x) -> float:
    if basis.modality != "fov":
        raise ValueError("basis_se2 needs an SE(2) basis")
    return basis.evaluate(k, x)


def _expected_shape(basis: SpectralBasis):
    g = basis.grid
    return (g.n, g.n) if basis.modality == "bearing" else (g.n, g.n, g.heading_bins)


def decompose(m, basis: SpectralBasis) -> CoeffVector:
    """Project a map (masses per lattice point) onto the basis."""
    vals = np.asarray(getattr(m, "values", m), dtype=np.float64)
    if vals.shape != _expected_shape(basis):
        raise ValueError(f"map shape {vals.shape} does not match basis lattice {_expected_shape(basis)}")
    a = basis.spatial
    t = np.tensordot(a, vals, axes=([1], [0]))       # (k1, j[, h])
    t = np.tensordot(t, a, axes=([1], [1]))          # (k1[, h], k2) or (k1, k2)
    if basis.modality == "fov":
        t = np.tensordot(t, basis.heading, axes=([1], [1]))  # (k1, k2, m)
    return CoeffVector(t.ravel(), basis.modality, basis.K)


def _coeff_array(coeffs, basis: SpectralBasis) -> np.ndarray:
    if isinstance(coeffs, CoeffVector):
        if coeffs.modality != basis.modality or coeffs.K != basis.K:
            raise ValueError("coefficient vector does not match the basis")
        coeffs = coeffs.values
    c = np.asarray(coeffs, dtype=np.float64)
    if c.shape != (len(basis),):
        raise ValueError(f"expected {len(basis)} coefficients, got shape {c.shape}")
    return c


def synthesize(coeffs, basis: SpectralBasis) -> np.ndarray:
    """Raw series sum_k c_k F_k(x) on the lattice (a density, unclamped)."""
    c = _coeff_array(coeffs, basis)
    a = basis.spatial
    K1 = basis.K + 1
    if basis.modality == "bearing":
        return a.T @ c.reshape(K1, K1) @ a
    C = c.reshape(K1, K1, 2 * basis.K + 1)
    t = np.tensordot(C, basis.heading, axes=([2], [0]))  # (k1, k2, h)
    t = np.tensordot(a, t, axes=([0], [0]))               # (i, k2, h)
    return np.tensordot(t, a, axes=([1], [0])).transpose(0, 2, 1)  # (i, j, h)


def reconstruct(coeffs, basis: SpectralBasis, clamp: bool = True) -> np.ndarray:
    """Map (as masses) regenerated from coefficients.

    With ``clamp`` the result is floored at ``CLAMP_FLOOR`` and renormalized
    into a distribution; truncated series can go negative.
    """
    mass = synthesize(coeffs, basis) * basis.cell_measure
    if not clamp:
        return mass
    mass = np.maximum(mass, CLAMP_FLOOR)
    return mass / mass.sum()


@dataclass
class Trajectory:
    """Sensor states sampled every ``dt``; rows are (north, east[, heading_deg])."""

    states: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=np.float64))

    @property
    def duration(self) -> float:
        return len(self.states) * self.dt


def trajectory_coeffs(traj: Trajectory, basis: SpectralBasis) -> CoeffVector:
    """Coefficients of the time-averaged spatial distribution of ``traj``."""
    q = traj.states
    if len(q) == 0 or q.size == 0:
        raise ValueError("trajectory is empty")
    if q.shape[1] < basis.dim:
        raise ValueError(f"trajectory states need {basis.dim} components")
    L = basis.grid.side_length
    ks = np.arange(basis.K + 1)
    norms = basis._axis[1]
    fn = np.cos(np.outer(q[:, 0], ks) * (math.pi / L)) / norms
    fe = np.cos(np.outer(q[:, 1], ks) * (math.pi / L)) / norms
    if basis.modality == "bearing":
        c = np.einsum("ta,tb->ab", fn, fe) * traj.dt
    else:
        _, hnorms, funcs = basis._head
        psi = np.radians(q[:, 2])
        fh = np.stack([_trig(kind, k * psi) for k, kind in funcs], axis=1) / hnorms
        c = np.einsum("ta,tb,tc->abc", fn, fe, fh) * traj.dt
    return CoeffVector(c.ravel() / traj.duration, basis.modality, basis.K)


def ergodic_metric(c: CoeffVector, phi: CoeffVector) -> float:
    """Weighted squared distance between trajectory and map coefficients."""
    if c.modality != phi.modality or c.K != phi.K or len(c) != len(phi):
        raise ValueError("coefficient vectors use different index sets")
    w = ergodic_weights(c.modality, c.K)
    if len(w) != len(c):
        raise ValueError("coefficient vector length does not match its index set")
    d = np.asarray(c.values, dtype=np.float64) - np.asarray(phi.values, dtype=np.float64)
    return float((w * d * d).sum())


def save_coeffs(path, cv: CoeffVector) -> None:
    manifest = {"kind": "coefficients", "modality": cv.modality, "K": cv.K,
                "ordering": cv.ordering, "format_version": 1}
    write_container(path, manifest, {"coefficients": np.asarray(cv.values, dtype=np.float32)})


def load_coeffs(path) -> CoeffVector:
    manifest, arrays = read_container(path)
    if manifest.get("kind") != "coefficients":
        raise FormatError(f"{path}: not a coefficient file")
    if manifest.get("ordering") != ORDERING_VERSION:
        raise FormatError(f"{path}: unsupported coefficient ordering {manifest.get('ordering')}")
    return CoeffVector(arrays["coefficients"].astype(np.float64), manifest["modality"], manifest["K"])
