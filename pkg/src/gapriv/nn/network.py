"""Layer stacks, parameter containers, Xavier initialization, and the
forward/backward/cross-entropy functions used by every model."""

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .layers import MaxPool, ReLU, layer_from_dict, layer_to_dict


class StaleCacheError(RuntimeError):
    """backward() was handed a cache produced with different parameters."""


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple
    input_shape: tuple

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        self.shapes  # validates composition

    @property
    def shapes(self):
        """Per-layer input shapes followed by the output shape."""
        shapes = [self.input_shape]
        for layer in self.layers:
            shapes.append(tuple(layer.output_shape(shapes[-1])))
        return shapes

    @property
    def output_shape(self):
        return self.shapes[-1]

    def param_shapes(self):
        return [layer.param_shapes(s) for layer, s in zip(self.layers, self.shapes)]

    def n_params(self):
        return sum(int(np.prod(s)) for ps in self.param_shapes() for s in ps.values())

    def to_dict(self):
        return {"input_shape": list(self.input_shape), "layers": [layer_to_dict(l) for l in self.layers]}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(layer_from_dict(l) for l in d["layers"]), tuple(d["input_shape"]))

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).digest()


class ModelParams:
    """Per-layer parameter dicts (``{}`` for parameter-free layers)."""

    def __init__(self, layers):
        self.layers = [dict(p) for p in layers]

    def __iter__(self):
        return iter(self.layers)

    def __len__(self):
        return len(self.layers)

    def __getitem__(self, i):
        return self.layers[i]

    def arrays(self):
        return [p[k] for p in self.layers for k in sorted(p)]

    def flat(self):
        arrs = self.arrays()
        return np.concatenate([a.ravel() for a in arrs]) if arrs else np.zeros(0)

    def copy(self):
        return ModelParams([{k: v.copy() for k, v in p.items()} for p in self.layers])

    def map(self, fn, *others):
        return ModelParams(
            [{k: fn(p[k], *(o[i][k] for o in others)) for k in p} for i, p in enumerate(self.layers)]
        )

    def zeros_like(self):
        return self.map(np.zeros_like)

    def equal(self, other):
        """Bitwise equality of every array."""
        return len(self) == len(other) and all(
            p.keys() == q.keys() and all(np.array_equal(p[k], q[k]) for k in p)
            for p, q in zip(self.layers, other.layers)
        )


def xavier_init(spec, seed):
    """Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)); zero biases."""
    rng = np.random.default_rng(seed)
    layers = []
    for layer, in_shape, shapes in zip(spec.layers, spec.shapes, spec.param_shapes()):
        p = {}
        if shapes:
            fan_in, fan_out = layer.fans(in_shape)
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            p["W"] = rng.uniform(-bound, bound, size=shapes["W"])
            p["b"] = np.zeros(shapes["b"])
        layers.append(p)
    return ModelParams(layers)


def zero_params(spec):
    return ModelParams([{k: np.zeros(s) for k, s in shapes.items()} for shapes in spec.param_shapes()])


@dataclass
class ForwardCache:
    params: ModelParams
    layer_caches: list


def forward(spec, params, batch):
    """Run the stack. Returns ``(output, cache)``."""
    x = np.asarray(batch, dtype=np.float64)
    if x.shape[1:] != spec.input_shape:
        raise ValueError(f"batch has per-example shape {x.shape[1:]}, network expects {spec.input_shape}")
    caches = []
    for layer, p in zip(spec.layers, params):
        x, c = layer.forward(p, x)
        caches.append(c)
    return x, ForwardCache(params, caches)


def backward(spec, params, cache, dout):
    """Gradients for every parameter and for the input batch."""
    if cache.params is not params:
        raise StaleCacheError("cache was produced by a forward pass with different parameters")
    grads = [None] * len(spec.layers)
    d = np.asarray(dout, dtype=np.float64)
    for i in range(len(spec.layers) - 1, -1, -1):
        grads[i], d = spec.layers[i].backward(params[i], cache.layer_caches[i], d)
    return ModelParams(grads), d


def activation_pattern(spec, cache):
    """Bytes identifying which side of every ReLU / max-pool kink each unit is on."""
    parts = []
    for layer, c in zip(spec.layers, cache.layer_caches):
        if isinstance(layer, ReLU):
            parts.append(np.packbits(c).tobytes())
        elif isinstance(layer, MaxPool):
            parts.append(c[1].astype(np.int16).tobytes())
    return b"".join(parts)


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_ce(logits, labels):
    """Mean softmax cross-entropy and its gradient with respect to the logits."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n, k = logits.shape
    if labels.shape != (n,) or (n and (labels.min() < 0 or labels.max() >= k)):
        raise ValueError("labels must be class indices in [0, k) with one per row")
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.mean(log_norm - z[rows, labels]))
    d = np.exp(z - log_norm[:, None])
    d[rows, labels] -= 1.0
    return loss, d / n
