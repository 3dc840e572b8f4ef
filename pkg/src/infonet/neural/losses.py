"""Training losses.  Each returns the batch-mean loss and its gradient."""
from __future__ import annotations

import numpy as np

TARGET_FLOOR = 1e-12


def _check_dist(a, name, tol):
    s = a.reshape(a.shape[0], -1).sum(axis=1)
    if np.any(np.abs(s - 1.0) > tol) or np.any(a < 0):
        raise ValueError(f"{name} is not a normalized distribution (sums {s.min():.6g}..{s.max():.6g})")


def kl_loss(pred, target, tol: float = 1e-4) -> float:
    """Mean over samples of sum target * log(target / pred).

    Targets are floored at ``TARGET_FLOOR``; predictions must be positive
    (softmax output).  Works on a single distribution or a batch.
    """
    p = np.atleast_2d(np.asarray(pred))
    t = np.atleast_2d(np.asarray(target))
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {t.shape}")
    _check_dist(p, "prediction", tol)
    _check_dist(t, "target", tol)
    if np.any(p <= 0):
        raise ValueError("KL loss needs strictly positive predictions")
    t = np.maximum(t, TARGET_FLOOR).reshape(t.shape[0], -1)
    p = p.reshape(p.shape[0], -1)
    return float((t * (np.log(t) - np.log(p))).sum(axis=1).mean())


def kl_logit_grad(pred, target):
    """Gradient of the batch-mean KL loss with respect to softmax logits."""
    t = np.maximum(target, TARGET_FLOOR).astype(pred.dtype, copy=False)
    return (pred * t.sum(axis=1, keepdims=True) - t) / pred.shape[0]


def mae_loss(pred, target) -> float:
    p, t = np.asarray(pred), np.asarray(target)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch {p.shape} vs {t.shape}")
    return float(np.abs(p - t).mean())


def mae_grad(pred, target):
    """Gradient of the mean absolute error: sign(pred - target) / N."""
    return (np.sign(pred - target) / pred.size).astype(pred.dtype, copy=False)
