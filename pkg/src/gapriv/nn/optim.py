"""SGD with momentum (default) and Adam, both with global-norm gradient clipping."""

from dataclasses import dataclass, field

import numpy as np

DEFAULT_MOMENTUM = 0.9
DEFAULT_CLIP = 5.0


@dataclass
class OptimState:
    lr: float
    kind: str = "sgd"
    momentum: float = DEFAULT_MOMENTUM
    clip: float = DEFAULT_CLIP
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    slots: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.kind!r}")


def init_state(params, lr, kind="sgd", **kw):
    state = OptimState(lr=lr, kind=kind, **kw)
    if kind == "sgd":
        state.slots["velocity"] = params.zeros_like()
    else:
        state.slots["m"] = params.zeros_like()
        state.slots["v"] = params.zeros_like()
    return state


def global_norm(grads):
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.arrays())))


def clip_by_global_norm(grads, max_norm):
    if max_norm is None:
        return grads
    norm = global_norm(grads)
    if norm <= max_norm or norm == 0.0:
        return grads
    scale = max_norm / norm
    return grads.map(lambda g: g * scale)


def opt_step(params, grads, state, direction="descend"):
    """Return new params moved one step against (descend) or along (ascend)
    the clipped gradient. ``state`` accumulators are updated in place."""
    if direction == "ascend":
        grads = grads.map(np.negative)
    elif direction != "descend":
        raise ValueError(f"direction must be 'descend' or 'ascend', got {direction!r}")
    grads = clip_by_global_norm(grads, state.clip)
    state.step += 1
    lr = state.lr
    if state.kind == "sgd":
        vel = state.slots["velocity"].map(lambda v, g: state.momentum * v + g, grads)
        state.slots["velocity"] = vel
        return params.map(lambda p, v: p - lr * v, vel)
    b1, b2 = state.beta1, state.beta2
    m = state.slots["m"].map(lambda a, g: b1 * a + (1 - b1) * g, grads)
    v = state.slots["v"].map(lambda a, g: b2 * a + (1 - b2) * g * g, grads)
    state.slots["m"], state.slots["v"] = m, v
    c1 = 1 - b1**state.step
    c2 = 1 - b2**state.step
    return params.map(lambda p, mm, vv: p - lr * (mm / c1) / (np.sqrt(vv / c2) + state.eps), m, v)
