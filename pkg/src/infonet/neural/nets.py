"""The two network architectures, their I/O encoding, and weight files.

``map`` networks take an n x n belief and emit a full information map
through a softmax over every output cell.  ``coeff`` networks emit the
map's cosine coefficients (scaled, see ``coeff_scale``).

Beliefs are multiplied by ``n * n`` before entering the network so a
uniform belief is all ones.  Coefficient targets are multiplied by
``coeff_scale``, the inverse of the constant DC coefficient, so the
targets are order one.
"""
from __future__ import annotations

import copy

import numpy as np

from ..grid import GridSpec
from ..io import FormatError, read_container, write_container
from . import layers as L
from .losses import kl_logit_grad, kl_loss, mae_grad, mae_loss

WEIGHTS_VERSION = 1
ARCH_IDS = ("map-r2", "map-se2", "coeff-r2", "coeff-se2")


LOG_FLOOR = 1e-45


class Network:
    def __init__(self, arch: str, modality: str, grid: GridSpec, layers: list[L.Layer], meta: dict | None = None):
        if arch not in ("map", "coeff"):
            raise ValueError(f"unknown architecture {arch!r}")
        if modality not in ("bearing", "fov"):
            raise ValueError(f"unknown modality {modality!r}")
        self.arch, self.modality, self.grid = arch, modality, grid
        self.layers = layers
        self.meta = dict(meta or {})
        self.meta.setdefault("input_scale", float(grid.num_cells))
        # "log" spreads residual masses of nearly collapsed beliefs (down to
        # float32's smallest subnormal) over [0, 1]; those residuals decide
        # where the normalized map of a localized target puts its mass
        self.meta.setdefault("input_transform", "log")
        self.meta.setdefault("coeff_scale", 1.0)

    @property
    def arch_id(self) -> str:
        return f"{self.arch}-{'r2' if self.modality == 'bearing' else 'se2'}"

    @property
    def dtype(self):
        for layer in self.layers:
            for p in layer.params.values():
                return p.dtype
        return np.dtype(np.float32)

    def parameters(self) -> list[tuple[int, str, np.ndarray]]:
        return [(i, k, v) for i, layer in enumerate(self.layers) for k, v in layer.params.items()]

    def num_parameters(self) -> int:
        return sum(v.size for _, _, v in self.parameters())

    def grads(self) -> list[np.ndarray]:
        return [self.layers[i].grads[k] for i, k, _ in self.parameters()]

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dy: np.ndarray, skip_last: bool = False) -> np.ndarray:
        stack = self.layers[:-1] if skip_last else self.layers
        for layer in reversed(stack):
            dy = layer.backward(dy)
        return dy

    def astype(self, dtype) -> "Network":
        net = copy.deepcopy(self)
        for layer in net.layers:
            layer.astype(dtype)
        return net

    def copy(self) -> "Network":
        return copy.deepcopy(self)

    # encoding between domain arrays and network tensors

    def encode_inputs(self, beliefs) -> np.ndarray:
        b = np.asarray(beliefs)
        n = self.grid.n
        if b.shape[-2:] != (n, n):
            raise ValueError(f"belief shape {b.shape[-2:]} does not match network grid n={n}")
        b = b.reshape(-1, 1, n, n)
        transform = self.meta["input_transform"]
        if transform == "log":
            b = 1.0 - np.log(np.maximum(b, LOG_FLOOR)) / np.log(LOG_FLOOR)
        elif transform == "sqrt":
            b = np.sqrt(np.maximum(b * self.meta["input_scale"], 0.0))
        elif transform == "linear":
            b = b * self.meta["input_scale"]
        else:
            raise ValueError(f"unknown input transform {transform!r}")
        return b.astype(self.dtype)

    def encode_targets(self, targets) -> np.ndarray:
        t = np.asarray(targets)
        if self.arch == "coeff":
            return (t.reshape(t.shape[0], -1) * self.meta["coeff_scale"]).astype(self.dtype)
        if self.modality == "fov":
            t = np.moveaxis(t, -1, 1)  # (N, n, n, H) -> (N, H, n, n)
        return t.reshape(t.shape[0], -1).astype(self.dtype)

    def decode(self, out: np.ndarray) -> np.ndarray:
        out = np.asarray(out, dtype=np.float64)
        if self.arch == "coeff":
            return out / self.meta["coeff_scale"]
        n, H = self.grid.n, self.grid.heading_bins
        if self.modality == "bearing":
            return out.reshape(-1, n, n)
        return np.moveaxis(out.reshape(-1, H, n, n), 1, -1)

    def predict(self, belief) -> np.ndarray:
        """Map (``(n, n)`` or ``(n, n, H)``) or coefficient vector for one belief."""
        return self.decode(self.forward(self.encode_inputs(belief)))[0]

    def predict_batch(self, beliefs) -> np.ndarray:
        return self.decode(self.forward(self.encode_inputs(beliefs)))


def _same_pad(n: int) -> tuple[int, int]:
    """Padding/output padding for the stride-2 transposed conv back to n."""
    return (1, 0) if n % 2 == 0 else (2, 1)


def build_map_net(grid: GridSpec, modality: str = "bearing", seed: int = 0, meta: dict | None = None) -> Network:
    """Map network.  The output layer starts at zero, so the initial map is uniform.

    A random output layer gives a sharply peaked initial softmax; the first
    Adam steps then drive the wide dense layer's pre-activations negative
    and its ReLUs never recover.  The dense bias starts at one for the same
    reason, keeping every unit active while the output layer grows.
    """
    rng = np.random.default_rng(seed)
    n = grid.n
    if modality == "bearing":
        layers = [
            L.Conv2D(1, 16, rng=rng), L.ReLU(),
            L.Conv2D(16, 16, rng=rng), L.ReLU(),
            L.Flatten(), L.Dense(16 * n * n, n * n, rng=rng, bias=1.0), L.ReLU(),
            L.Reshape((1, n, n)),
            L.ConvTranspose2D(1, 1, k=3, stride=1, pad=1, rng=rng, scale=0.0),
            L.Flatten(), L.Softmax(),
        ]
    else:
        m = (n - 1) // 2 + 1
        pad, op = _same_pad(n)
        H = grid.heading_bins
        layers = [
            L.Conv2D(1, 16, rng=rng), L.ReLU(),
            L.Conv2D(16, 32, stride=2, rng=rng), L.ReLU(),
            L.Flatten(), L.Dense(32 * m * m, 8 * m * m, rng=rng, bias=1.0), L.ReLU(),
            L.Reshape((8, m, m)),
            L.ConvTranspose2D(8, H, k=4, stride=2, pad=pad, out_pad=op, rng=rng, scale=0.0),
            L.Flatten(), L.Softmax(),
        ]
    return Network("map", modality, grid, layers, meta)


def build_coeff_net(grid: GridSpec, num_coeffs: int, modality: str = "bearing", seed: int = 0,
                    meta: dict | None = None) -> Network:
    rng = np.random.default_rng(seed)
    n = grid.n
    layers = [
        L.Conv2D(1, 8, rng=rng), L.ReLU(),
        L.Conv2D(8, 16, rng=rng), L.ReLU(),
        L.Flatten(), L.Dense(16 * n * n, 256, rng=rng), L.ReLU(),
        L.Dense(256, num_coeffs, rng=rng, scale=0.01),
    ]
    return Network("coeff", modality, grid, layers, meta)


def coeff_net_for(basis, seed: int = 0, metric: str = "mutual") -> Network:
    """Coefficient net sized for ``basis`` with targets scaled so the DC term is 1."""
    meta = {"K": basis.K, "metric": metric, "coeff_scale": 1.0 / basis.dc}
    return build_coeff_net(basis.grid, len(basis), basis.modality, seed, meta)


def loss_name(net: Network) -> str:
    return "kl" if net.arch == "map" else "mae"


def loss_and_grads(net: Network, x, target, loss: str | None = None):
    """Forward, loss, and backward pass; returns ``(loss, grads)``.

    ``grads`` is aligned with ``net.parameters()``.
    """
    loss = loss or loss_name(net)
    if loss == "kl":
        if net.arch != "map" or not isinstance(net.layers[-1], L.Softmax):
            raise ValueError("KL loss needs a network with a softmax (distribution) output")
        out = net.forward(x)
        value = kl_loss(out, target)
        net.backward(kl_logit_grad(out, target), skip_last=True)
    elif loss == "mae":
        out = net.forward(x)
        value = mae_loss(out, target)
        net.backward(mae_grad(out, target))
    else:
        raise ValueError(f"unknown loss {loss!r}")
    return value, net.grads()


def backward(net: Network, x, target, loss: str | None = None) -> list[np.ndarray]:
    return loss_and_grads(net, x, target, loss)[1]


def save_weights(net: Network, path, training: dict | None = None) -> None:
    manifest = {
        "kind": "weights",
        "format_version": WEIGHTS_VERSION,
        "arch_id": net.arch_id,
        "modality": net.modality,
        "grid": net.grid.to_dict(),
        "meta": net.meta,
        "layers": [{"type": type(layer).__name__, "config": layer.config()} for layer in net.layers],
        "training": training or {},
    }
    arrays = {f"{i}.{k}": v for i, k, v in net.parameters()}
    write_container(path, manifest, arrays)


def read_weights_manifest(path) -> dict:
    manifest, _ = read_container(path)
    return manifest


def load_weights(path) -> Network:
    manifest, arrays = read_container(path)
    if manifest.get("kind") != "weights":
        raise FormatError(f"{path}: not a weights file")
    version = manifest.get("format_version")
    if version != WEIGHTS_VERSION:
        raise FormatError(f"{path}: weights format version {version} is not supported "
                          f"(this build reads version {WEIGHTS_VERSION})")
    arch_id = manifest.get("arch_id")
    if arch_id not in ARCH_IDS:
        raise FormatError(f"{path}: unknown architecture id {arch_id!r}")
    layers = [L.layer_from_config(e["type"], e["config"]) for e in manifest["layers"]]
    net = Network(arch_id.split("-")[0], manifest["modality"], GridSpec(**manifest["grid"]),
                  layers, manifest.get("meta"))
    expected = {f"{i}.{k}": v.shape for i, k, v in net.parameters()}
    if set(expected) != set(arrays):
        raise FormatError(f"{path}: parameter blobs do not match the declared layers")
    for i, k, v in net.parameters():
        a = arrays[f"{i}.{k}"]
        if a.shape != v.shape:
            raise FormatError(f"{path}: blob {i}.{k} has shape {a.shape}, expected {v.shape}")
        net.layers[i].params[k] = a.astype(np.float32)
    net.training = manifest.get("training", {})
    return net
