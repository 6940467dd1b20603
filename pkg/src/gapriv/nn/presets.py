"""Named architectures.

``genki``/``hands``/``hands-protected`` follow the published layer shapes
(filter counts and sizes, pooling after every conv, one hidden dense layer);
``adversary``/``encoder`` are the scaled-down defaults used on 16x16 synthetic
images; the rest are small nets for gradient checks.
"""

from .layers import Conv2D, Dense, Flatten, MaxPool, ReLU
from .network import NetworkSpec


def conv_stack(convs, hidden, n_out=None):
    """``[(filters, kernel), ...]`` -> conv/relu/pool blocks, flatten, dense+relu, optional head."""
    layers = []
    for filters, kernel in convs:
        layers += [Conv2D(filters, kernel), ReLU(), MaxPool(2, 2)]
    layers += [Flatten(), Dense(hidden), ReLU()]
    if n_out is not None:
        layers.append(Dense(n_out))
    return layers


ARCHITECTURES = {
    "adversary": ([(8, 3), (8, 3)], 32),
    "encoder": ([(8, 3), (8, 3)], 32),
    "genki": ([(16, 7), (16, 7)], 128),
    "hands": ([(2, 3), (4, 4), (8, 3)], 32),
    "hands-protected": ([(4, 3), (8, 4), (16, 3)], 64),
}


def classifier_spec(name, input_shape, n_classes):
    convs, hidden = ARCHITECTURES[name]
    return NetworkSpec(conv_stack(convs, hidden, n_classes), input_shape)


def encoder_spec(name, input_shape):
    convs, hidden = ARCHITECTURES[name]
    return NetworkSpec(conv_stack(convs, hidden), input_shape)


GRAD_CHECK_PRESETS = {
    "linear": lambda: NetworkSpec([Dense(3), Dense(2)], (5,)),
    "dense-relu": lambda: NetworkSpec([Dense(6), ReLU(), Dense(3)], (5,)),
    "conv-small": lambda: NetworkSpec(
        [Conv2D(3, 3), ReLU(), MaxPool(2, 2), Conv2D(2, 2, padding="valid"), Flatten(), Dense(2)], (6, 6, 1)
    ),
    "conv-strided": lambda: NetworkSpec(
        [Conv2D(2, 4, stride=2), ReLU(), MaxPool(3, 1), Flatten(), Dense(3)], (8, 8, 2)
    ),
    "adversary": lambda: classifier_spec("adversary", (8, 8, 1), 2),
}
