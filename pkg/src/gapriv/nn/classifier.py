"""Minibatch training loop and a scikit-learn style CNN classifier."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .network import backward, forward, loss_ce, softmax, xavier_init
from .optim import init_state, opt_step
from .presets import classifier_spec


def minibatches(rng, n, batch_size):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def predict_logits(spec, params, X, batch_size=500):
    return np.concatenate(
        [forward(spec, params, X[i : i + batch_size])[0] for i in range(0, len(X), batch_size)]
    ) if len(X) else np.zeros((0,) + spec.output_shape)


def accuracy(spec, params, X, y):
    return float(np.mean(np.argmax(predict_logits(spec, params, X), axis=1) == y))


def train_epochs(spec, params, X, y, epochs, rng, batch_size=64, state=None, lr=0.05,
                 target_accuracy=None, **optim):
    """Plain supervised training. Returns ``(params, state, history)``.

    Stops early once train accuracy after an epoch reaches ``target_accuracy``.
    """
    if state is None:
        state = init_state(params, lr, **optim)
    history = []
    for _ in range(epochs):
        losses = []
        for idx in minibatches(rng, len(X), batch_size):
            logits, cache = forward(spec, params, X[idx])
            loss, d = loss_ce(logits, y[idx])
            grads, _ = backward(spec, params, cache, d)
            params = opt_step(params, grads, state)
            losses.append(loss)
        acc = accuracy(spec, params, X, y)
        history.append({"loss": float(np.mean(losses)), "accuracy": acc})
        if target_accuracy is not None and acc >= target_accuracy:
            break
    return params, state, history


class ConvClassifier(ClassifierMixin, BaseEstimator):
    """Small CNN trained with SGD+momentum on NHWC image batches.

    ``arch`` names an entry of ``presets.ARCHITECTURES``. Labels must be
    integer class indices.
    """

    def __init__(self, arch="adversary", n_classes=2, epochs=10, batch_size=64, lr=0.05,
                 momentum=0.9, clip=5.0, optimizer="sgd", target_accuracy=None, random_state=0):
        self.arch = arch
        self.n_classes = n_classes
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.momentum = momentum
        self.clip = clip
        self.optimizer = optimizer
        self.target_accuracy = target_accuracy
        self.random_state = random_state

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        self.spec_ = classifier_spec(self.arch, X.shape[1:], self.n_classes)
        self.classes_ = np.arange(self.n_classes)
        rng = np.random.default_rng(self.random_state)
        params = xavier_init(self.spec_, int(rng.integers(2**32)))
        kw = {"kind": self.optimizer, "clip": self.clip}
        if self.optimizer == "sgd":
            kw["momentum"] = self.momentum
        self.params_, _, self.history_ = train_epochs(
            self.spec_, params, X, y, self.epochs, rng, batch_size=self.batch_size, lr=self.lr,
            target_accuracy=self.target_accuracy, **kw,
        )
        return self

    def decision_function(self, X):
        check_is_fitted(self, "params_")
        return predict_logits(self.spec_, self.params_, np.asarray(X, dtype=np.float64))

    def predict_proba(self, X):
        return softmax(self.decision_function(X))

    def predict(self, X):
        return np.argmax(self.decision_function(X), axis=1)
