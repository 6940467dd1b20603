"""Alternating maximin training of a noise-adding privatizer against a CNN adversary.

Each outer iteration runs three phases on privatized minibatches:

1. the adversary descends on private-label cross-entropy (privatizer frozen);
2. the privatizer ascends on that same loss through the frozen adversary;
3. the privatizer descends on the protected-label loss of a frozen,
   pre-trained protected model.

The privatizer is an encoder (conv stack) followed by a dense decoder whose
output is reshaped to image shape and used as additive noise. Each image's
noise is projected onto the ball ``||dX_i||^2 <= D / m`` and the result is
clamped to [0, 1].
"""

import csv
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._random import substream
from .datasets import ImageDataset
from .nn.classifier import accuracy, train_epochs
from .nn.gradcheck import check_arrays
from .nn.layers import Dense, Reshape
from .nn.network import (
    ModelParams,
    NetworkSpec,
    activation_pattern,
    backward,
    forward,
    loss_ce,
    softmax,
    xavier_init,
)
from .nn.optim import init_state, opt_step
from .nn.presets import classifier_spec, encoder_spec


class TrainingFailure(RuntimeError):
    """A model could not learn a label that the data is known to encode."""


@dataclass(frozen=True)
class NoiseBudget:
    D_total: float
    m: int

    def __post_init__(self):
        if not self.D_total >= 0:
            raise ValueError("D_total must be non-negative")
        if self.m < 1:
            raise ValueError("m must be positive")

    @classmethod
    def per_image(cls, d, m):
        return cls(d * m, m)

    @property
    def d_per_image(self):
        return self.D_total / self.m


@dataclass
class AlternationConfig:
    noise_budget: float = 4.0  # per-image squared L2 norm
    max_outer: int = 60
    k_adv: int = 10
    k_priv: int = 20
    k_pro: int = 5
    eps: float = 1e-4
    lr_adv: float = 0.01
    lr_priv: float = 0.5
    lr_pro: float = 0.05
    batch_size: int = 64
    optimizer: str = "sgd"
    momentum: float = 0.9
    clip: float = 5.0
    max_loss: str = "ce"  # or "uniform": push adversary outputs toward uniform
    adversary_arch: str = "adversary"
    protected_arch: str = "adversary"
    encoder_arch: str = "encoder"
    pretrain_epochs: int = 20
    pretrain_target: float = 0.95
    pretrain_lr: float = 0.05
    eval_epochs: int = 10
    seed: int = 0

    def __post_init__(self):
        for name in ("k_adv", "k_priv", "k_pro", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.max_outer < 0:
            raise ValueError("max_outer must be non-negative")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.max_loss not in ("ce", "uniform"):
            raise ValueError(f"unknown max_loss {self.max_loss!r}")

    @classmethod
    def from_mapping(cls, mapping):
        names = {f.name: f.type for f in fields(cls)}
        unknown = set(mapping) - set(names)
        if unknown:
            raise ValueError(f"unknown training options: {sorted(unknown)}")
        defaults = cls()
        kw = {}
        for k, v in mapping.items():
            kw[k] = type(getattr(defaults, k))(v)
        return cls(**kw)

    def clean_optim_kwargs(self):
        """Supervised training on clean or fixed data always uses SGD+momentum."""
        return {"kind": "sgd", "clip": self.clip, "momentum": self.momentum}

    def optim_kwargs(self):
        kw = {"kind": self.optimizer, "clip": self.clip}
        if self.optimizer == "sgd":
            kw["momentum"] = self.momentum
        return kw


@dataclass
class PrivatizerModel:
    encoder: NetworkSpec
    decoder: NetworkSpec
    params: ModelParams

    @classmethod
    def build(cls, image_shape, encoder_arch="encoder"):
        enc = encoder_spec(encoder_arch, image_shape)
        dec = NetworkSpec([Dense(int(np.prod(image_shape))), Reshape(tuple(image_shape))], enc.output_shape)
        return cls(enc, dec, None)

    @property
    def spec(self):
        return NetworkSpec(self.encoder.layers + self.decoder.layers, self.encoder.input_shape)

    def with_params(self, params):
        return PrivatizerModel(self.encoder, self.decoder, params)


@dataclass
class Classifier:
    """A network spec with its (frozen or trainable) parameters."""

    spec: NetworkSpec
    params: ModelParams


# ----------------------------------------------------------------- privatization


def _project(raw, d):
    sq = np.sum(raw * raw, axis=(1, 2, 3))
    over = sq > d
    scale = np.ones_like(sq)
    scale[over] = np.sqrt(d / sq[over])
    return raw * scale[:, None, None, None], scale, sq, over


def _privatize_forward(X, model, d):
    raw, cache = forward(model.spec, model.params, X)
    delta, scale, sq, over = _project(raw, d)
    z = X + delta
    inside = (z >= 0.0) & (z <= 1.0)
    return np.clip(z, 0.0, 1.0), (raw, cache, scale, sq, over, inside)


def _privatize_backward(model, aux, d_out):
    """Gradient of a loss wrt privatizer params given its gradient wrt X_priv."""
    raw, cache, scale, sq, over, inside = aux
    dd = d_out * inside
    draw = dd * scale[:, None, None, None]
    if np.any(over):
        dot = np.sum(raw[over] * dd[over], axis=(1, 2, 3))
        draw[over] -= (scale[over] * dot / sq[over])[:, None, None, None] * raw[over]
    grads, _ = backward(model.spec, model.params, cache, draw)
    return grads


def privatize(X, model, budget, return_noise=False):
    """``clamp(X + project(decoder(encoder(X))), 0, 1)``.

    ``budget`` is a NoiseBudget or a per-image squared-norm bound.
    """
    d = budget.d_per_image if isinstance(budget, NoiseBudget) else float(budget)
    X = np.asarray(X, dtype=np.float64)
    out, aux = _privatize_forward(X, model, d)
    return (out, out - X) if return_noise else out


def _noise_sq(X, X_priv):
    diff = X_priv - X
    return np.sum(diff * diff, axis=(1, 2, 3))


# ------------------------------------------------------------------------ phases


@dataclass
class PhaseStats:
    loss: float
    noise_max: float
    noise_mean: float


def _batches(rng, n, batch_size, steps):
    for _ in range(steps):
        yield rng.choice(n, size=min(batch_size, n), replace=False)


def adversary_phase(adversary, privatizer, X, y, steps, state, rng, budget, batch_size=64):
    """``steps`` descent steps of the adversary on privatized batches."""
    params = adversary.params
    losses, noise = [], []
    for idx in _batches(rng, len(X), batch_size, steps):
        Xb = X[idx]
        Xp = privatize(Xb, privatizer, budget)
        noise.append(_noise_sq(Xb, Xp))
        logits, cache = forward(adversary.spec, params, Xp)
        loss, dlogits = loss_ce(logits, y[idx])
        grads, _ = backward(adversary.spec, params, cache, dlogits)
        params = opt_step(params, grads, state, "descend")
        losses.append(loss)
    noise = np.concatenate(noise)
    return Classifier(adversary.spec, params), PhaseStats(float(np.mean(losses)), float(noise.max()), float(noise.mean()))


def _uniform_loss(logits):
    """Cross-entropy between the uniform distribution and softmax(logits)."""
    n, k = logits.shape
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(log_norm - z.mean(axis=1)))
    d = (softmax(logits) - 1.0 / k) / n
    return loss, d


def _privatizer_step_grads(privatizer, target, X, y, budget_d, objective):
    Xp, aux = _privatize_forward(X, privatizer, budget_d)
    logits, cache = forward(target.spec, target.params, Xp)
    if objective == "uniform":
        loss, dlogits = _uniform_loss(logits)
    else:
        loss, dlogits = loss_ce(logits, y)
    _, dXp = backward(target.spec, target.params, cache, dlogits)
    return loss, _privatize_backward(privatizer, aux, dXp), _noise_sq(X, Xp)


def _privatizer_phase(privatizer, target, X, y, steps, state, rng, budget, batch_size, objective, direction):
    d = budget.d_per_image if isinstance(budget, NoiseBudget) else float(budget)
    model = privatizer
    losses, noise = [], []
    for idx in _batches(rng, len(X), batch_size, steps):
        loss, grads, nsq = _privatizer_step_grads(model, target, X[idx], y[idx], d, objective)
        model = model.with_params(opt_step(model.params, grads, state, direction))
        losses.append(loss)
        noise.append(nsq)
    noise = np.concatenate(noise)
    return model, PhaseStats(float(np.mean(losses)), float(noise.max()), float(noise.mean()))


def privatizer_max_phase(privatizer, adversary, X, y, steps, state, rng, budget, batch_size=64, max_loss="ce"):
    """Push the frozen adversary's private-label loss up.

    ``max_loss="ce"`` ascends on cross-entropy; ``"uniform"`` instead
    descends on the cross-entropy to a uniform prediction.
    """
    if max_loss == "uniform":
        return _privatizer_phase(privatizer, adversary, X, y, steps, state, rng, budget, batch_size, "uniform", "descend")
    return _privatizer_phase(privatizer, adversary, X, y, steps, state, rng, budget, batch_size, "ce", "ascend")


def privatizer_protect_phase(privatizer, protected, X, y, steps, state, rng, budget, batch_size=64):
    """Keep the frozen protected model accurate on privatized images."""
    return _privatizer_phase(privatizer, protected, X, y, steps, state, rng, budget, batch_size, "ce", "descend")


# ---------------------------------------------------------------------- training


def pretrain_protected(train, cfg, epochs=None):
    """Train the protected-label model on clean images; it is frozen afterwards."""
    name = train.label_for("protected")
    X, y = train.images, train.labels[name]
    spec = classifier_spec(cfg.protected_arch, X.shape[1:], train.n_classes[name])
    params = xavier_init(spec, int(substream(cfg.seed, "init-protected").integers(2**32)))
    epochs = cfg.pretrain_epochs if epochs is None else epochs
    if epochs == 0:
        return Classifier(spec, params)
    params, _, hist = train_epochs(
        spec, params, X, y, epochs, substream(cfg.seed, "shuffle-protected"), batch_size=cfg.batch_size,
        lr=cfg.pretrain_lr, target_accuracy=cfg.pretrain_target, **cfg.clean_optim_kwargs(),
    )
    if hist[-1]["accuracy"] < 0.6:
        raise TrainingFailure(f"protected model reached only {hist[-1]['accuracy']:.3f} train accuracy on {name!r}")
    return Classifier(spec, params)


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    converged: bool = False

    COLUMNS = (
        "iteration", "adversary_loss", "privatizer_adversary_loss", "protected_loss",
        "delta_adversary", "delta_privatizer", "noise_sq_mean", "noise_sq_max",
    )

    def __len__(self):
        return len(self.records)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            for r in self.records:
                w.writerow([r["iteration"]] + [repr(float(r[c])) for c in self.COLUMNS[1:]])


@dataclass
class MaximinResult:
    privatizer: PrivatizerModel
    history: TrainHistory
    adversary: Classifier
    protected: Classifier
    budget: NoiseBudget


def solve_maximin(train, cfg):
    """Pretrain the protected model, then alternate the three phases until both
    parameter changes fall below ``cfg.eps`` or ``cfg.max_outer`` is reached.

    Hitting the cap without converging is a normal outcome, reported through
    ``history.converged``.
    """
    private = train.label_for("private")
    protected_name = train.label_for("protected")
    X = train.images
    y_priv, y_pro = train.labels[private], train.labels[protected_name]
    budget = NoiseBudget.per_image(cfg.noise_budget, len(X))

    protected = pretrain_protected(train, cfg)
    adv_spec = classifier_spec(cfg.adversary_arch, X.shape[1:], train.n_classes[private])
    adversary = Classifier(adv_spec, xavier_init(adv_spec, int(substream(cfg.seed, "init-adversary").integers(2**32))))
    privatizer = PrivatizerModel.build(X.shape[1:], cfg.encoder_arch)
    privatizer = privatizer.with_params(
        xavier_init(privatizer.spec, int(substream(cfg.seed, "init-privatizer").integers(2**32)))
    )

    okw = cfg.optim_kwargs()
    adv_state = init_state(adversary.params, cfg.lr_adv, **okw)
    max_state = init_state(privatizer.params, cfg.lr_priv, **okw)
    pro_state = init_state(privatizer.params, cfg.lr_pro, **okw)
    rng_adv = substream(cfg.seed, "shuffle-adversary")
    rng_max = substream(cfg.seed, "shuffle-max")
    rng_pro = substream(cfg.seed, "shuffle-protect")

    history = TrainHistory()
    for it in range(cfg.max_outer):
        adv_before = adversary.params.flat()
        priv_before = privatizer.params.flat()
        adversary, s_adv = adversary_phase(
            adversary, privatizer, X, y_priv, cfg.k_adv, adv_state, rng_adv, budget, cfg.batch_size
        )
        privatizer, s_max = privatizer_max_phase(
            privatizer, adversary, X, y_priv, cfg.k_priv, max_state, rng_max, budget, cfg.batch_size, cfg.max_loss
        )
        privatizer, s_pro = privatizer_protect_phase(
            privatizer, protected, X, y_pro, cfg.k_pro, pro_state, rng_pro, budget, cfg.batch_size
        )
        d_adv = float(np.linalg.norm(adversary.params.flat() - adv_before))
        d_priv = float(np.linalg.norm(privatizer.params.flat() - priv_before))
        history.records.append({
            "iteration": it,
            "adversary_loss": s_adv.loss,
            "privatizer_adversary_loss": s_max.loss,
            "protected_loss": s_pro.loss,
            "delta_adversary": d_adv,
            "delta_privatizer": d_priv,
            "noise_sq_mean": float(np.mean([s_adv.noise_mean, s_max.noise_mean, s_pro.noise_mean])),
            "noise_sq_max": max(s_adv.noise_max, s_max.noise_max, s_pro.noise_max),
        })
        if d_adv <= cfg.eps and d_priv <= cfg.eps:
            history.converged = True
            break
    return MaximinResult(privatizer, history, adversary, protected, budget)


# -------------------------------------------------------------------- evaluation


@dataclass(frozen=True)
class AccuracyRow:
    model: str
    label: str
    role: str
    clean: float
    privatized: float


@dataclass
class AccuracyTable:
    rows: list

    def get(self, model, label=None):
        for r in self.rows:
            if r.model == model and (label is None or r.label == label):
                return r
        raise KeyError((model, label))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["model", "label", "role", "accuracy_clean", "accuracy_privatized"])
            for r in self.rows:
                w.writerow([r.model, r.label, r.role, repr(r.clean), repr(r.privatized)])


def _fit_clean(spec_arch, X, y, k, cfg, stream):
    spec = classifier_spec(spec_arch, X.shape[1:], k)
    params = xavier_init(spec, int(substream(cfg.seed, "init-" + stream).integers(2**32)))
    params, _, _ = train_epochs(
        spec, params, X, y, cfg.eval_epochs, substream(cfg.seed, "shuffle-" + stream),
        batch_size=cfg.batch_size, lr=cfg.pretrain_lr, **cfg.clean_optim_kwargs(),
    )
    return Classifier(spec, params)


def evaluate_privatization(result, train, test, cfg):
    """Accuracy of every model on clean and privatized test images.

    Rows:

    * ``reference`` - adversary trained on clean data (the original accuracy);
    * ``fixed`` - the adversary from the alternation, frozen;
    * ``retrained`` - a fresh adversary trained on privatized training images;
    * ``public`` / ``protected`` - label models trained on clean data;
    * ``chance`` - seeded uniform random guessing.
    """
    budget = result.budget
    Xtr, Xte = train.images, test.images
    Xtr_p = privatize(Xtr, result.privatizer, budget)
    Xte_p = privatize(Xte, result.privatizer, budget)
    rows = []
    private = train.label_for("private")
    k = train.n_classes[private]
    ytr, yte = train.labels[private], test.labels[private]

    ref = _fit_clean(cfg.adversary_arch, Xtr, ytr, k, cfg, "reference")
    rows.append(AccuracyRow("reference", private, "private",
                            accuracy(ref.spec, ref.params, Xte, yte), accuracy(ref.spec, ref.params, Xte_p, yte)))
    adv = result.adversary
    rows.append(AccuracyRow("fixed", private, "private",
                            accuracy(adv.spec, adv.params, Xte, yte), accuracy(adv.spec, adv.params, Xte_p, yte)))
    re = _fit_clean(cfg.adversary_arch, Xtr_p, ytr, k, cfg, "retrained")
    rows.append(AccuracyRow("retrained", private, "private",
                            rows[0].clean, accuracy(re.spec, re.params, Xte_p, yte)))

    for name, role in train.label_roles.items():
        if role == "public":
            model = _fit_clean(cfg.adversary_arch, Xtr, train.labels[name], train.n_classes[name], cfg, "public-" + name)
        elif role == "protected":
            model = result.protected
        else:
            continue
        y = test.labels[name]
        rows.append(AccuracyRow(role, name, role,
                                accuracy(model.spec, model.params, Xte, y), accuracy(model.spec, model.params, Xte_p, y)))

    guess = substream(cfg.seed, "chance").integers(0, k, size=len(yte))
    chance = float(np.mean(guess == yte))
    rows.append(AccuracyRow("chance", private, "private", chance, chance))
    return AccuracyTable(rows)


# ------------------------------------------------------------- gradient checking


def composite_grad_check(seed=0, image_size=8, batch=3, budget=0.05, eps=1e-5, samples=25, max_loss="ce"):
    """Finite-difference check of the privatizer gradient taken through the
    noise projection, pixel clamp and a frozen adversary.

    Images are drawn from [0.25, 0.75] and the budget kept small so that the
    clamp is inactive; the projection is active for every image.
    """
    rng = np.random.default_rng(seed)
    shape = (image_size, image_size, 1)
    model = PrivatizerModel.build(shape, "encoder")
    model = model.with_params(xavier_init(model.spec, seed))
    for p in model.params:
        if "b" in p:
            p["b"] = rng.normal(0.0, 0.1, size=p["b"].shape)
    adv_spec = classifier_spec("adversary", shape, 2)
    adversary = Classifier(adv_spec, xavier_init(adv_spec, seed + 1))
    X = rng.uniform(0.25, 0.75, size=(batch,) + shape)
    y = rng.integers(0, 2, size=batch)
    objective = "uniform" if max_loss == "uniform" else "ce"

    holder = {}

    def evaluate():
        Xp, aux = _privatize_forward(X, model, budget)
        logits, cache = forward(adv_spec, adversary.params, Xp)
        holder["p"] = (
            activation_pattern(model.spec, aux[1]) + aux[4].tobytes() + aux[5].tobytes()
            + activation_pattern(adv_spec, cache)
        )
        return _uniform_loss(logits)[0] if objective == "uniform" else loss_ce(logits, y)[0]

    _, grads, _ = _privatizer_step_grads(model, adversary, X, y, budget, objective)
    return check_arrays(evaluate, model.params.arrays(), grads.arrays(), rng, eps=eps,
                        samples=samples, pattern=lambda: holder["p"])


# --------------------------------------------------------------------- estimator


class MaximinPrivatizer(TransformerMixin, BaseEstimator):
    """Scikit-learn style wrapper: ``fit(X, y, y_protected)`` trains by
    alternating maximin, ``transform(X)`` returns privatized images.

    ``X`` is an NHWC array in [0, 1]; ``y`` holds the private labels and
    ``y_protected`` the labels whose accuracy the frozen protected model keeps.
    """

    def __init__(self, noise_budget=4.0, max_outer=60, k_adv=10, k_priv=20, k_pro=5, eps=1e-4,
                 lr_adv=0.01, lr_priv=0.5, lr_pro=0.05, batch_size=64, max_loss="ce", random_state=0):
        self.noise_budget = noise_budget
        self.max_outer = max_outer
        self.k_adv = k_adv
        self.k_priv = k_priv
        self.k_pro = k_pro
        self.eps = eps
        self.lr_adv = lr_adv
        self.lr_priv = lr_priv
        self.lr_pro = lr_pro
        self.batch_size = batch_size
        self.max_loss = max_loss
        self.random_state = random_state

    def _config(self):
        params = self.get_params()
        params["seed"] = params.pop("random_state")
        return AlternationConfig(**params)

    def fit(self, X, y, y_protected):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        y_protected = np.asarray(y_protected, dtype=np.int64)
        data = ImageDataset(
            images=X,
            labels={"private": y, "protected": y_protected},
            label_roles={"private": "private", "protected": "protected"},
            n_classes={"private": int(y.max()) + 1, "protected": int(y_protected.max()) + 1},
        )
        self.config_ = self._config()
        self.result_ = solve_maximin(data, self.config_)
        self.history_ = self.result_.history
        return self

    def transform(self, X):
        check_is_fitted(self, "result_")
        return privatize(np.asarray(X, dtype=np.float64), self.result_.privatizer, self.result_.budget)


def config_dict(cfg):
    return asdict(cfg)
