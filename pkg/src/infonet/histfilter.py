"""Histogram (grid) Bayes filter for a stationary target.

There is no prediction step: the target does not move, so each step is a
pure measurement update followed by renormalization.
"""
from __future__ import annotations

import numpy as np

from .grid import GridSpec, check_belief
from .sensors import likelihood_rows


class ModelViolation(RuntimeError):
    """Posterior mass vanished; the measurement model assigned zero likelihood everywhere."""


def update_with_likelihood(b, lik) -> np.ndarray:
    """Posterior proportional to ``b * lik`` (arrays of the belief's shape)."""
    post = np.asarray(b, dtype=np.float64) * np.asarray(lik, dtype=np.float64).reshape(np.shape(b))
    total = post.sum()
    if not total > 0.0:
        raise ModelViolation("posterior has zero total mass")
    return post / total


def update(b, sensor, x, z, grid: GridSpec, table=None, state: int | None = None) -> np.ndarray:
    """Bayes update of belief ``b`` after observing ``z`` from pose ``x``.

    When a likelihood table and the lattice index of ``x`` are given the
    table row is used; otherwise the row is computed for ``x`` directly.
    Both give identical numbers.
    """
    b = check_belief(b, grid)
    k = sensor.z_index(z)
    if table is not None and state is not None:
        lik = table.values[state, :, k]
    else:
        lik = likelihood_rows(sensor, grid, x)[:, k]
    return update_with_likelihood(b, lik)


def entropy(b) -> float:
    """Shannon entropy in nats, with 0 log 0 taken as 0."""
    p = np.asarray(b, dtype=np.float64).ravel()
    p = p[p > 0.0]
    return float(-(p * np.log(p)).sum())
