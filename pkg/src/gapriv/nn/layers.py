"""Layer vocabulary with hand-written forward and backward passes.

Tensors are NHWC ``(batch, height, width, channels)`` for spatial layers
and ``(batch, features)`` after ``Flatten``. Layers are immutable specs;
parameters live in plain dicts owned by the caller.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _same_padding(size, kernel, stride):
    out = math.ceil(size / stride)
    total = max((out - 1) * stride + kernel - size, 0)
    return total // 2, total - total // 2


@dataclass(frozen=True)
class Conv2D:
    filters: int
    kernel: int
    stride: int = 1
    padding: str = "same"

    def _pads(self, in_shape):
        h, w, _ = in_shape
        if self.padding == "same":
            return _same_padding(h, self.kernel, self.stride), _same_padding(w, self.kernel, self.stride)
        if self.padding == "valid":
            return (0, 0), (0, 0)
        raise ValueError(f"unknown padding {self.padding!r}")

    def output_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ValueError(f"conv2d needs a (h, w, c) input, got {in_shape}")
        h, w, _ = in_shape
        (pt, pb), (pl, pr) = self._pads(in_shape)
        hp, wp = h + pt + pb, w + pl + pr
        if self.kernel > hp or self.kernel > wp:
            raise ValueError(f"kernel {self.kernel} larger than padded input {hp}x{wp}")
        return ((hp - self.kernel) // self.stride + 1, (wp - self.kernel) // self.stride + 1, self.filters)

    def param_shapes(self, in_shape):
        return {"W": (self.kernel, self.kernel, in_shape[2], self.filters), "b": (self.filters,)}

    def fans(self, in_shape):
        k2 = self.kernel * self.kernel
        return k2 * in_shape[2], k2 * self.filters

    def _windows(self, x):
        (pt, pb), (pl, pr) = self._pads(x.shape[1:])
        xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
        k, s = self.kernel, self.stride
        # (N, Ho, Wo, C, k, k)
        win = sliding_window_view(xp, (k, k), axis=(1, 2))[:, ::s, ::s]
        return xp.shape, win

    def forward(self, p, x):
        xp_shape, win = self._windows(x)
        N, Ho, Wo, C = win.shape[:4]
        k = self.kernel
        cols = win.reshape(N * Ho * Wo, C * k * k)
        Wm = p["W"].transpose(2, 0, 1, 3).reshape(C * k * k, self.filters)
        out = (cols @ Wm + p["b"]).reshape(N, Ho, Wo, self.filters)
        return out, (x.shape, xp_shape, cols, (N, Ho, Wo, C))

    def backward(self, p, cache, dout):
        x_shape, xp_shape, cols, (N, Ho, Wo, C) = cache
        k, s = self.kernel, self.stride
        d2 = dout.reshape(N * Ho * Wo, self.filters)
        Wm = p["W"].transpose(2, 0, 1, 3).reshape(C * k * k, self.filters)
        dW = (cols.T @ d2).reshape(C, k, k, self.filters).transpose(1, 2, 0, 3)
        db = d2.sum(axis=0)
        dcols = (d2 @ Wm.T).reshape(N, Ho, Wo, C, k, k)
        dxp = np.zeros(xp_shape)
        for i in range(k):
            for j in range(k):
                dxp[:, i : i + s * (Ho - 1) + 1 : s, j : j + s * (Wo - 1) + 1 : s, :] += dcols[..., i, j]
        (pt, _), (pl, _) = self._pads(x_shape[1:])
        dx = dxp[:, pt : pt + x_shape[1], pl : pl + x_shape[2], :]
        return {"W": dW, "b": db}, dx


@dataclass(frozen=True)
class ReLU:
    def output_shape(self, in_shape):
        return tuple(in_shape)

    def param_shapes(self, in_shape):
        return {}

    def forward(self, p, x):
        mask = x > 0
        return x * mask, mask

    def backward(self, p, mask, dout):
        return {}, dout * mask


@dataclass(frozen=True)
class MaxPool:
    """Max pooling without padding. Ties send the gradient to the first
    maximal element in row-major window order."""

    window: int = 2
    stride: int = 2

    def output_shape(self, in_shape):
        h, w, c = in_shape
        if self.window > h or self.window > w:
            raise ValueError(f"pool window {self.window} larger than input {h}x{w}")
        return ((h - self.window) // self.stride + 1, (w - self.window) // self.stride + 1, c)

    def param_shapes(self, in_shape):
        return {}

    def forward(self, p, x):
        k, s = self.window, self.stride
        win = sliding_window_view(x, (k, k), axis=(1, 2))[:, ::s, ::s]
        flat = win.reshape(win.shape[:4] + (k * k,))
        idx = np.argmax(flat, axis=-1)
        out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
        return out, (x.shape, idx)

    def backward(self, p, cache, dout):
        x_shape, idx = cache
        k, s = self.window, self.stride
        _, Ho, Wo, _ = idx.shape
        dx = np.zeros(x_shape)
        for off in range(k * k):
            i, j = divmod(off, k)
            dx[:, i : i + s * (Ho - 1) + 1 : s, j : j + s * (Wo - 1) + 1 : s, :] += dout * (idx == off)
        return {}, dx


@dataclass(frozen=True)
class Flatten:
    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def param_shapes(self, in_shape):
        return {}

    def forward(self, p, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, p, shape, dout):
        return {}, dout.reshape(shape)


@dataclass(frozen=True)
class Reshape:
    """Reshape per-example features, e.g. a dense decoder output to pixels."""

    shape: tuple

    def output_shape(self, in_shape):
        if int(np.prod(in_shape)) != int(np.prod(self.shape)):
            raise ValueError(f"cannot reshape {in_shape} to {self.shape}")
        return tuple(self.shape)

    def param_shapes(self, in_shape):
        return {}

    def forward(self, p, x):
        return x.reshape((x.shape[0],) + tuple(self.shape)), x.shape

    def backward(self, p, shape, dout):
        return {}, dout.reshape(shape)


@dataclass(frozen=True)
class Dense:
    units: int

    def output_shape(self, in_shape):
        if len(in_shape) != 1:
            raise ValueError(f"dense needs a flat input, got {in_shape}; add Flatten first")
        return (self.units,)

    def param_shapes(self, in_shape):
        return {"W": (in_shape[0], self.units), "b": (self.units,)}

    def fans(self, in_shape):
        return in_shape[0], self.units

    def forward(self, p, x):
        return x @ p["W"] + p["b"], x

    def backward(self, p, x, dout):
        return {"W": x.T @ dout, "b": dout.sum(axis=0)}, dout @ p["W"].T


LAYER_KINDS = {
    "conv2d": Conv2D,
    "relu": ReLU,
    "maxpool": MaxPool,
    "flatten": Flatten,
    "reshape": Reshape,
    "dense": Dense,
}


def layer_to_dict(layer):
    kind = {v: k for k, v in LAYER_KINDS.items()}[type(layer)]
    d = {"kind": kind}
    d.update({k: (list(v) if isinstance(v, tuple) else v) for k, v in layer.__dict__.items()})
    return d


def layer_from_dict(d):
    d = dict(d)
    cls = LAYER_KINDS[d.pop("kind")]
    if "shape" in d:
        d["shape"] = tuple(d["shape"])
    return cls(**d)
