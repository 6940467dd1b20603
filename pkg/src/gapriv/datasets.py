"""Dataset containers, CSV ingestion, min-max scaling and synthetic generators."""

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, OneToOneFeatureMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_matrix

ROLES = ("private", "public", "protected")
MISSING = {"", "na", "nan"}


def _check_roles(labels, roles):
    for name, role in roles.items():
        if name not in labels:
            raise ValueError(f"role assigned to unknown label {name!r}")
        if role not in ROLES:
            raise ValueError(f"label {name!r} has unknown role {role!r}; expected one of {ROLES}")


def _only_label_with_role(roles, role):
    names = [k for k, r in roles.items() if r == role]
    if len(names) != 1:
        raise ValueError(f"expected exactly one {role} label, found {names or 'none'}")
    return names[0]


@dataclass(frozen=True)
class LabeledDataset:
    X: np.ndarray
    feature_names: tuple
    labels: dict
    label_roles: dict = field(default_factory=dict)
    n_dropped: int = 0

    def __post_init__(self):
        X = as_matrix(self.X)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if len(self.feature_names) != X.shape[1]:
            raise ValueError("feature_names does not match the number of columns of X")
        labels = {}
        for name, y in self.labels.items():
            y = np.asarray(y, dtype=np.float64)
            if y.shape != (X.shape[0],):
                raise ValueError(f"label {name!r} has shape {y.shape}, expected ({X.shape[0]},)")
            labels[name] = y
        object.__setattr__(self, "labels", labels)
        _check_roles(labels, self.label_roles)

    @property
    def m(self):
        return self.X.shape[0]

    @property
    def n(self):
        return self.X.shape[1]

    def private_label(self):
        return _only_label_with_role(self.label_roles, "private")

    def feature_index(self, name):
        return self.feature_names.index(name)

    def take(self, idx):
        idx = np.asarray(idx)
        return replace(self, X=self.X[idx], labels={k: v[idx] for k, v in self.labels.items()})


@dataclass(frozen=True)
class ImageDataset:
    """Images are ``(count, height, width, channels)`` with values in [0, 1]."""

    images: np.ndarray
    labels: dict
    label_roles: dict
    n_classes: dict

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float64)
        if images.ndim != 4:
            raise ValueError(f"images must be 4-D (count, h, w, c), got shape {images.shape}")
        if images.size and (images.min() < 0.0 or images.max() > 1.0):
            raise ValueError("pixel values must lie in [0, 1]")
        object.__setattr__(self, "images", images)
        labels = {}
        for name, y in self.labels.items():
            y = np.asarray(y, dtype=np.int64)
            if y.shape != (images.shape[0],):
                raise ValueError(f"label {name!r} has shape {y.shape}")
            k = self.n_classes[name]
            if y.size and (y.min() < 0 or y.max() >= k):
                raise ValueError(f"label {name!r} has class indices outside [0, {k})")
            labels[name] = y
        object.__setattr__(self, "labels", labels)
        _check_roles(labels, self.label_roles)

    def __len__(self):
        return self.images.shape[0]

    def label_for(self, role):
        return _only_label_with_role(self.label_roles, role)

    def take(self, idx):
        idx = np.asarray(idx)
        return replace(self, images=self.images[idx], labels={k: v[idx] for k, v in self.labels.items()})


# --------------------------------------------------------------------------- CSV


def _parse_float(text):
    text = text.strip()
    if text.lower() in MISSING:
        return None
    try:
        value = float(text)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def load_csv(path, schema):
    """Load the feature and label columns named by ``schema`` from a CSV file.

    ``schema`` is a mapping with ``features`` and ``labels`` (lists of column
    names), ``roles`` (label name -> role) and an optional ``delimiter``; when
    the delimiter is absent it is sniffed from the header line. Rows with a
    missing or unparseable value in any selected column are dropped and
    counted in ``n_dropped``.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such CSV file: {path}")
    features = list(schema["features"])
    label_names = list(schema["labels"])
    roles = dict(schema.get("roles", {}))

    with path.open(newline="", encoding="utf-8-sig") as fh:
        delimiter = schema.get("delimiter")
        if not delimiter:
            head = fh.readline()
            fh.seek(0)
            try:
                delimiter = csv.Sniffer().sniff(head, delimiters=",;\t|").delimiter
            except csv.Error:
                delimiter = ","
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path} is empty") from None
        missing = [c for c in features + label_names if c not in header]
        if missing:
            raise KeyError(f"columns {missing} not found in header of {path}")
        cols = [header.index(c) for c in features + label_names]

        rows = []
        dropped = 0
        for record in reader:
            if not record or all(not cell.strip() for cell in record):
                continue
            values = [_parse_float(record[c]) if c < len(record) else None for c in cols]
            if any(v is None for v in values):
                dropped += 1
                continue
            rows.append(values)

    if not rows:
        raise ValueError(f"no rows of {path} survived missing-value removal")
    data = np.array(rows, dtype=np.float64)
    nf = len(features)
    return LabeledDataset(
        X=data[:, :nf],
        feature_names=features,
        labels={name: data[:, nf + i] for i, name in enumerate(label_names)},
        label_roles=roles,
        n_dropped=dropped,
    )


# ------------------------------------------------------------------ normalization


class MinMaxNormalizer(OneToOneFeatureMixin, TransformerMixin, BaseEstimator):
    """Column-wise min-max scaling to [0, 1]; constant columns map to 0.

    Unlike sklearn's ``MinMaxScaler`` the constant-column convention is fixed
    to zero, which keeps the removal cost of such a column at exactly zero.
    """

    def fit(self, X, y=None):
        X = as_matrix(X)
        if X.shape[0] < 1:
            raise ValueError("need at least one row to fit")
        self.data_min_ = X.min(axis=0)
        self.data_max_ = X.max(axis=0)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = as_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        span = self.data_max_ - self.data_min_
        scale = np.divide(1.0, span, out=np.zeros_like(span), where=span > 0)
        return (X - self.data_min_) * scale

    def inverse_transform(self, X):
        check_is_fitted(self)
        X = as_matrix(X)
        return X * (self.data_max_ - self.data_min_) + self.data_min_


@dataclass(frozen=True)
class NormalizationSpec:
    """Fitted per-column ranges, keyed by column name."""

    ranges: dict

    def __post_init__(self):
        for name, (lo, hi) in self.ranges.items():
            if hi < lo:
                raise ValueError(f"column {name!r}: max {hi} < min {lo}")


def normalize(ds):
    """Min-max scale every feature and label column of ``ds`` to [0, 1]."""
    if ds.m < 2:
        raise ValueError("normalize needs at least two rows")
    names = list(ds.labels)
    stacked = np.column_stack([ds.X] + [ds.labels[k] for k in names]) if names else ds.X
    scaler = MinMaxNormalizer().fit(stacked)
    scaled = scaler.transform(stacked)
    n = ds.n
    spec = NormalizationSpec(
        {
            col: (float(lo), float(hi))
            for col, lo, hi in zip(list(ds.feature_names) + names, scaler.data_min_, scaler.data_max_)
        }
    )
    out = replace(ds, X=scaled[:, :n], labels={k: scaled[:, n + i] for i, k in enumerate(names)})
    return out, spec


# ----------------------------------------------------------------------- toy data

TOY_NOISE = 0.05


def gen_toy(m, n, seed, noise=TOY_NOISE):
    """Uniform(0, 1) features with one private label ``y = X theta + noise * eps``."""
    if m < 1 or n < 1:
        raise ValueError("gen_toy needs m >= 1 and n >= 1")
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=(m, n))
    theta = rng.uniform(0.0, 1.0, size=n)
    eps = rng.standard_normal(m)
    y = X @ theta + noise * eps
    return LabeledDataset(
        X=X,
        feature_names=[f"x{j}" for j in range(n)],
        labels={"y": y},
        label_roles={"y": "private"},
    )


# --------------------------------------------------------------------- image data

IMAGE_FACTORS = {"stripes": "private", "blob": "public", "border": "protected"}

# template intensities
_BACKGROUND = 0.5
_STRIPE_LO, _STRIPE_HI = 0.3, 0.7
_BLOB = 1.0
_BORDER_OFF, _BORDER_ON = 0.15, 0.85


def _balanced(rng, count):
    return rng.permutation(np.arange(count) % 2)


def gen_images(count, size, seed, noise=0.05):
    """Grayscale ``size x size`` images built from three independent binary factors.

    * ``stripes`` (private): horizontal (0) or vertical (1) stripes with a
      random phase in the upper half of the interior.
    * ``blob`` (public): a bright 3x3 square in the left (0) or right (1)
      quarter of the lower half, with one pixel of positional jitter.
    * ``border`` (protected): dim (0) or bright (1) one-pixel frame.

    Gaussian pixel noise of standard deviation ``noise`` is added and the
    result clipped to [0, 1].
    """
    if size < 8:
        raise ValueError("image size must be at least 8")
    rng = np.random.default_rng(seed)
    stripes = _balanced(rng, count)
    blob = _balanced(rng, count)
    border = _balanced(rng, count)
    phase = rng.integers(0, 2, size=count)
    jitter = rng.integers(-1, 2, size=(count, 2))

    imgs = np.full((count, size, size), _BACKGROUND)
    inner = size - 2
    top = inner // 2  # interior rows 1..top hold the stripes
    rr, cc = np.meshgrid(np.arange(top), np.arange(inner), indexing="ij")
    for i in range(count):
        coord = cc if stripes[i] else rr
        pattern = np.where((coord + phase[i]) % 2 == 0, _STRIPE_HI, _STRIPE_LO)
        imgs[i, 1 : 1 + top, 1 : 1 + inner] = pattern

        band_lo = 1 + top
        band_hi = size - 1
        row_c = (band_lo + band_hi - 1) // 2 + jitter[i, 0]
        row_c = min(max(row_c, band_lo + 1), band_hi - 2)
        col_c = (size // 4 if blob[i] == 0 else size - 1 - size // 4) + jitter[i, 1]
        col_c = min(max(col_c, 2), size - 3)
        imgs[i, row_c - 1 : row_c + 2, col_c - 1 : col_c + 2] = _BLOB

        ring = _BORDER_ON if border[i] else _BORDER_OFF
        imgs[i, 0, :] = ring
        imgs[i, -1, :] = ring
        imgs[i, :, 0] = ring
        imgs[i, :, -1] = ring

    if noise > 0:
        imgs = np.clip(imgs + noise * rng.standard_normal(imgs.shape), 0.0, 1.0)
    return ImageDataset(
        images=imgs[..., None],
        labels={"stripes": stripes, "blob": blob, "border": border},
        label_roles=dict(IMAGE_FACTORS),
        n_classes={k: 2 for k in IMAGE_FACTORS},
    )


# ---------------------------------------------------------------------- splitting


def split(ds, test_fraction, seed):
    """Seeded disjoint train/test split of a LabeledDataset or ImageDataset."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    m = ds.m if isinstance(ds, LabeledDataset) else len(ds)
    order = np.random.default_rng(seed).permutation(m)
    n_test = int(round(m * test_fraction))
    return ds.take(np.sort(order[n_test:])), ds.take(np.sort(order[:n_test]))
