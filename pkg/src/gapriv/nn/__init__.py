from .classifier import ConvClassifier, accuracy, predict_logits, train_epochs
from .gradcheck import check_arrays, grad_check
from .layers import Conv2D, Dense, Flatten, MaxPool, ReLU, Reshape
from .network import (
    ModelParams,
    NetworkSpec,
    StaleCacheError,
    activation_pattern,
    backward,
    forward,
    loss_ce,
    softmax,
    xavier_init,
    zero_params,
)
from .optim import OptimState, init_state, opt_step

__all__ = [
    "Conv2D",
    "ConvClassifier",
    "Dense",
    "Flatten",
    "MaxPool",
    "ModelParams",
    "NetworkSpec",
    "OptimState",
    "ReLU",
    "Reshape",
    "StaleCacheError",
    "accuracy",
    "activation_pattern",
    "backward",
    "check_arrays",
    "forward",
    "grad_check",
    "init_state",
    "loss_ce",
    "opt_step",
    "predict_logits",
    "softmax",
    "train_epochs",
    "xavier_init",
    "zero_params",
]
