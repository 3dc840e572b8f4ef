"""Layers with explicit forward/backward passes on NCHW numpy arrays.

Layers are dtype-agnostic: they compute in whatever float dtype their
parameters and inputs carry.  Training runs in float32; gradient checks cast
everything to float64.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class Layer:
    """Base class.  ``params`` and ``grads`` map names to arrays of equal shape."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def config(self) -> dict:
        return {}

    def astype(self, dtype):
        for k, v in self.params.items():
            self.params[k] = v.astype(dtype)
        self.grads = {}
        return self


def _im2col(x, k, stride, pad):
    """(B, C, H, W) -> (B, C*k*k, Ho*Wo) patches, plus output size."""
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    B, C, Ho, Wo = win.shape[:4]
    cols = win.transpose(0, 1, 4, 5, 2, 3).reshape(B, C * k * k, Ho * Wo)
    return cols, Ho, Wo


def _scatter_add(dst, cols, k, stride, Ho, Wo):
    """Accumulate (B, C, k, k, Ho, Wo) patch values into ``dst`` (B, C, Hp, Wp)."""
    for ki in range(k):
        for kj in range(k):
            dst[:, :, ki:ki + stride * Ho:stride, kj:kj + stride * Wo:stride] += cols[:, :, ki, kj]


def _gather(src, k, stride, Ho, Wo):
    B, C = src.shape[:2]
    out = np.empty((B, C, k, k, Ho, Wo), dtype=src.dtype)
    for ki in range(k):
        for kj in range(k):
            out[:, :, ki, kj] = src[:, :, ki:ki + stride * Ho:stride, kj:kj + stride * Wo:stride]
    return out


class Conv2D(Layer):
    def __init__(self, in_ch, out_ch, k=3, stride=1, pad=1, rng=None, dtype=np.float32):
        super().__init__()
        self.in_ch, self.out_ch, self.k, self.stride, self.pad = in_ch, out_ch, k, stride, pad
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = in_ch * k * k
        self.params["W"] = (rng.standard_normal((out_ch, in_ch, k, k)) * np.sqrt(2.0 / fan_in)).astype(dtype)
        self.params["b"] = np.zeros(out_ch, dtype=dtype)

    def config(self):
        return {"in_ch": self.in_ch, "out_ch": self.out_ch, "k": self.k,
                "stride": self.stride, "pad": self.pad}

    def forward(self, x):
        self._xshape = x.shape
        cols, Ho, Wo = _im2col(x, self.k, self.stride, self.pad)
        self._cols, self._out = cols, (Ho, Wo)
        W = self.params["W"].reshape(self.out_ch, -1)
        y = np.matmul(W, cols) + self.params["b"][None, :, None]
        return y.reshape(x.shape[0], self.out_ch, Ho, Wo)

    def backward(self, dy):
        B = dy.shape[0]
        Ho, Wo = self._out
        dy = dy.reshape(B, self.out_ch, Ho * Wo)
        W = self.params["W"]
        self.grads["W"] = np.tensordot(dy, self._cols, axes=([0, 2], [0, 2])).reshape(W.shape)
        self.grads["b"] = dy.sum(axis=(0, 2))
        dcols = np.matmul(W.reshape(self.out_ch, -1).T, dy)
        _, C, H, Wd = self._xshape
        p = self.pad
        dxp = np.zeros((B, C, H + 2 * p, Wd + 2 * p), dtype=dy.dtype)
        _scatter_add(dxp, dcols.reshape(B, C, self.k, self.k, Ho, Wo), self.k, self.stride, Ho, Wo)
        return dxp[:, :, p:p + H, p:p + Wd]


class ConvTranspose2D(Layer):
    """Transposed convolution (the adjoint of Conv2D's input map)."""

    def __init__(self, in_ch, out_ch, k=3, stride=1, pad=1, out_pad=0, rng=None, dtype=np.float32, scale=None):
        super().__init__()
        if out_pad < 0 or (out_pad and out_pad >= stride):
            raise ValueError("out_pad must be smaller than stride")
        self.in_ch, self.out_ch, self.k = in_ch, out_ch, k
        self.stride, self.pad, self.out_pad = stride, pad, out_pad
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = in_ch * k * k / (stride * stride)
        std = np.sqrt(2.0 / fan_in) if scale is None else scale
        self.params["W"] = (rng.standard_normal((in_ch, out_ch, k, k)) * std).astype(dtype)
        self.params["b"] = np.zeros(out_ch, dtype=dtype)

    def config(self):
        return {"in_ch": self.in_ch, "out_ch": self.out_ch, "k": self.k, "stride": self.stride,
                "pad": self.pad, "out_pad": self.out_pad}

    def output_size(self, h):
        return (h - 1) * self.stride - 2 * self.pad + self.k + self.out_pad

    def forward(self, x):
        B, C, H, W = x.shape
        self._x = x
        k, s, p = self.k, self.stride, self.pad
        Wm = self.params["W"].reshape(self.in_ch, -1)
        cols = np.matmul(Wm.T, x.reshape(B, C, H * W)).reshape(B, self.out_ch, k, k, H, W)
        Hf, Wf = (H - 1) * s + k + self.out_pad, (W - 1) * s + k + self.out_pad
        full = np.zeros((B, self.out_ch, Hf, Wf), dtype=x.dtype)
        _scatter_add(full, cols, k, s, H, W)
        Ho, Wo = self.output_size(H), self.output_size(W)
        return full[:, :, p:p + Ho, p:p + Wo] + self.params["b"][None, :, None, None]

    def backward(self, dy):
        x = self._x
        B, C, H, W = x.shape
        k, s, p = self.k, self.stride, self.pad
        Ho, Wo = dy.shape[2:]
        Hf, Wf = (H - 1) * s + k + self.out_pad, (W - 1) * s + k + self.out_pad
        full = np.zeros((B, self.out_ch, Hf, Wf), dtype=dy.dtype)
        full[:, :, p:p + Ho, p:p + Wo] = dy
        dcols = _gather(full, k, s, H, W).reshape(B, self.out_ch * k * k, H * W)
        Wm = self.params["W"].reshape(self.in_ch, -1)
        self.grads["W"] = np.tensordot(x.reshape(B, C, H * W), dcols,
                                       axes=([0, 2], [0, 2])).reshape(self.params["W"].shape)
        self.grads["b"] = dy.sum(axis=(0, 2, 3))
        return np.matmul(Wm, dcols).reshape(B, C, H, W)


class Dense(Layer):
    def __init__(self, n_in, n_out, rng=None, dtype=np.float32, scale=None, bias=0.0):
        super().__init__()
        self.n_in, self.n_out = n_in, n_out
        rng = rng if rng is not None else np.random.default_rng(0)
        std = np.sqrt(2.0 / n_in) if scale is None else scale
        self.params["W"] = (rng.standard_normal((n_in, n_out)) * std).astype(dtype)
        self.params["b"] = np.full(n_out, bias, dtype=dtype)

    def config(self):
        return {"n_in": self.n_in, "n_out": self.n_out}

    def forward(self, x):
        self._x = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, dy):
        self.grads["W"] = self._x.T @ dy
        self.grads["b"] = dy.sum(axis=0)
        return dy @ self.params["W"].T


class ReLU(Layer):
    def forward(self, x):
        self._mask = x > 0
        return np.where(self._mask, x, 0).astype(x.dtype, copy=False)

    def backward(self, dy):
        return np.where(self._mask, dy, 0).astype(dy.dtype, copy=False)


class Flatten(Layer):
    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._shape)


class Reshape(Layer):
    def __init__(self, shape):
        super().__init__()
        self.shape = tuple(shape)

    def config(self):
        return {"shape": list(self.shape)}

    def forward(self, x):
        self._shape = x.shape
        return x.reshape((x.shape[0],) + self.shape)

    def backward(self, dy):
        return dy.reshape(self._shape)


class Softmax(Layer):
    """Softmax over all features of each sample (input shape ``(B, D)``)."""

    def forward(self, x):
        z = x - x.max(axis=1, keepdims=True)
        e = np.exp(z)
        self._p = e / e.sum(axis=1, keepdims=True)
        return self._p

    def backward(self, dy):
        p = self._p
        return p * (dy - (dy * p).sum(axis=1, keepdims=True))


LAYER_TYPES = {cls.__name__: cls for cls in (Conv2D, ConvTranspose2D, Dense, ReLU, Flatten, Reshape, Softmax)}


def layer_from_config(kind: str, cfg: dict) -> Layer:
    cls = LAYER_TYPES.get(kind)
    if cls is None:
        raise ValueError(f"unknown layer type {kind!r}")
    if cls is Reshape:
        return Reshape(cfg["shape"])
    return cls(**cfg)
