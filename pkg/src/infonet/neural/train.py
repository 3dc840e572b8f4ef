from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .losses import kl_loss, mae_loss
from .nets import Network, loss_and_grads, loss_name
from .optim import Adam

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    lr: float = 1e-3
    val_fraction: float = 0.10
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    # "dihedral": each training sample gets a random symmetry of the square per epoch
    augment: str | None = None
    # "cosine": lr * (1 + cos(pi * (epoch - 1) / epochs)) / 2, else constant
    schedule: str | None = None

    def __post_init__(self):
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.lr < 0:
            raise ValueError("learning rate must be nonnegative")
        if self.augment not in (None, "dihedral"):
            raise ValueError(f"unknown augmentation {self.augment!r}")
        if self.schedule not in (None, "cosine"):
            raise ValueError(f"unknown learning-rate schedule {self.schedule!r}")

    def lr_at(self, epoch: int) -> float:
        if self.schedule == "cosine":
            return self.lr * 0.5 * (1.0 + math.cos(math.pi * (epoch - 1) / self.epochs))
        return self.lr

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    net: Network
    history: list[tuple[int, float, float]] = field(default_factory=list)
    best_epoch: int = 0
    train_idx: np.ndarray | None = None
    val_idx: np.ndarray | None = None


def _dihedral(a: np.ndarray, g: int) -> np.ndarray:
    """Element ``g`` (0..7) of the square's symmetry group acting on the last two axes."""
    if g & 1:
        a = np.swapaxes(a, -1, -2)
    if g & 2:
        a = a[..., ::-1, :]
    if g & 4:
        a = a[..., :, ::-1]
    return a


def dihedral_augmenter(net: Network):
    """Random square symmetries applied jointly to inputs and targets.

    Valid for the bearing modality, whose maps are equivariant under the
    eight symmetries of the square grid.  Map targets are transformed as
    images.  Cosine coefficients ``c[k1, k2]`` pick up ``(-1)**k`` under a
    flip of the matching axis and are transposed under a transpose.
    """
    if net.modality != "bearing":
        raise ValueError("dihedral augmentation needs the bearing modality")
    n = net.grid.n
    if net.arch == "coeff":
        K1 = math.isqrt(net.layers[-1].n_out)
        if K1 * K1 != net.layers[-1].n_out:
            raise ValueError("coefficient count is not a square")
        sign = (-1.0) ** np.arange(K1)

    def apply(xb, yb, rng):
        xb, yb = xb.copy(), yb.copy()
        for r, g in enumerate(rng.integers(8, size=len(xb))):
            xb[r, 0] = _dihedral(xb[r, 0], g)
            if net.arch == "map":
                yb[r] = _dihedral(yb[r].reshape(n, n), g).ravel()
            else:
                c = yb[r].reshape(K1, K1)
                if g & 1:
                    c = c.T
                if g & 2:
                    c = c * sign[:, None]
                if g & 4:
                    c = c * sign[None, :]
                yb[r] = c.ravel()
        return xb, yb

    return apply


def split_indices(n: int, val_fraction: float, rng: np.random.Generator):
    perm = rng.permutation(n)
    n_val = math.floor(val_fraction * n)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def evaluate_loss(net: Network, x, y, batch_size: int, loss: str) -> float:
    total = 0.0
    for lo in range(0, len(x), batch_size):
        xb, yb = x[lo:lo + batch_size], y[lo:lo + batch_size]
        out = net.forward(xb)
        value = kl_loss(out, yb) if loss == "kl" else mae_loss(out, yb)
        total += value * len(xb)
    return total / len(x)


def train(net: Network, inputs, targets, config: TrainConfig, loss: str | None = None) -> TrainResult:
    """Mini-batch Adam training with best-validation checkpointing.

    ``inputs``/``targets`` are already encoded (see ``Network.encode_*``).
    ``floor(val_fraction * N)`` samples are held out and never used for
    updates.  If that is zero, the checkpoint is chosen by training loss.
    """
    x = np.asarray(inputs)
    y = np.asarray(targets)
    if len(x) == 0:
        raise TrainingError("empty dataset")
    if len(x) != len(y):
        raise ValueError("inputs and targets differ in length")
    loss = loss or loss_name(net)
    rng = np.random.default_rng(config.seed)
    train_idx, val_idx = split_indices(len(x), config.val_fraction, rng)

    augment = dihedral_augmenter(net) if config.augment == "dihedral" else None
    params = [p for _, _, p in net.parameters()]
    opt = Adam(params, lr=config.lr, beta1=config.beta1, beta2=config.beta2)
    history: list[tuple[int, float, float]] = []
    best, best_epoch, best_params = math.inf, 0, [p.copy() for p in params]

    for epoch in range(1, config.epochs + 1):
        opt.lr = config.lr_at(epoch)
        order = rng.permutation(train_idx)
        running = 0.0
        for lo in range(0, len(order), config.batch_size):
            idx = order[lo:lo + config.batch_size]
            xb, yb = x[idx], y[idx]
            if augment is not None:
                xb, yb = augment(xb, yb, rng)
            value, grads = loss_and_grads(net, xb, yb, loss)
            if not math.isfinite(value):
                raise TrainingError(f"loss became {value} at epoch {epoch}, batch starting {lo}")
            running += value * len(idx)
            opt.step(grads)
        train_loss = running / len(order)
        val_loss = evaluate_loss(net, x[val_idx], y[val_idx], config.batch_size, loss) if len(val_idx) else math.nan
        if len(val_idx) and not math.isfinite(val_loss):
            raise TrainingError(f"validation loss became {val_loss} at epoch {epoch}")
        history.append((epoch, train_loss, val_loss))
        log.info("epoch %d train %.6g val %.6g", epoch, train_loss, val_loss)
        score = val_loss if len(val_idx) else train_loss
        if score < best:
            best, best_epoch = score, epoch
            best_params = [p.copy() for p in params]

    for p, b in zip(params, best_params):
        p[...] = b
    return TrainResult(net, history, best_epoch, train_idx, val_idx)


def diverging(history, window: int = 5) -> bool:
    """True when validation loss rose over the last ``window`` epochs while training loss fell."""
    if len(history) <= window:
        return False
    (_, t0, v0), (_, t1, v1) = history[-window - 1], history[-1]
    return v1 > v0 and t1 < t0


def write_history_csv(path, history) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss"])
        for epoch, tr, va in history:
            w.writerow([epoch, repr(float(tr)), repr(float(va))])
