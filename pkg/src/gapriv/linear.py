"""Feature-removal privatizer against a linear adversary.

The privatizer zeroes a set ``R`` of feature columns subject to a squared
Frobenius distortion budget ``D``. Its utility is the residual norm of the
best linear fit of the private label on the surviving columns ``S``::

    u(R) = ||(I - X_S X_S^+) y||_2,    cost(R) = ||X_R||_F^2 <= D

``greedy_approx`` picks, one feature at a time, the candidate maximizing
utility per unit cost; ``brute_force`` enumerates all subsets and serves as
the optimality oracle.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_index_set, as_matrix, as_vector
from .linalg import frob_sq, pinv, residual

BRUTE_FORCE_MAX_FEATURES = 20
# utilities closer than this (relative) count as ties in the exhaustive search
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class RemovalSet:
    removed: tuple
    n: int

    def __post_init__(self):
        object.__setattr__(self, "removed", as_index_set(self.removed, self.n))

    @classmethod
    def empty(cls, n):
        return cls((), n)

    @classmethod
    def full(cls, n):
        return cls(tuple(range(n)), n)

    @property
    def kept(self):
        gone = set(self.removed)
        return tuple(j for j in range(self.n) if j not in gone)

    def add(self, j):
        return RemovalSet(self.removed + (j,), self.n)

    def __len__(self):
        return len(self.removed)

    def names(self, feature_names):
        return [feature_names[j] for j in self.removed]


@dataclass(frozen=True)
class Budget:
    D: float

    def __post_init__(self):
        if not self.D >= 0:
            raise ValueError(f"distortion budget must be non-negative, got {self.D}")

    @classmethod
    def from_fraction(cls, X, alpha):
        """Budget equal to ``alpha`` times the total squared norm of X."""
        if alpha < 0:
            raise ValueError("alpha must be non-negative")
        return cls(alpha * frob_sq(X))


@dataclass(frozen=True)
class GreedyStep:
    index: int
    utility: float
    cost: float
    ratio: float
    candidates: int


@dataclass
class GreedyTrace:
    steps: list = field(default_factory=list)

    @property
    def order(self):
        return [s.index for s in self.steps]

    def __len__(self):
        return len(self.steps)


def _removal(R, n):
    if isinstance(R, RemovalSet):
        if R.n != n:
            raise ValueError(f"removal set is for {R.n} features, X has {n}")
        return R
    return RemovalSet(tuple(R), n)


def _column_costs(X):
    return np.sum(X * X, axis=0)


def _set_cost(col_cost, indices):
    # correctly rounded, so every solver agrees on feasibility at the boundary
    return math.fsum(col_cost[j] for j in indices)


def _budget(D):
    return D if isinstance(D, Budget) else Budget(float(D))


def adversary_loss(X, y, R):
    """Residual norm of the best linear predictor of y from the kept columns."""
    X = as_matrix(X)
    y = as_vector(y, X.shape[0])
    R = _removal(R, X.shape[1])
    return residual(X[:, list(R.kept)], y)[1]


def removal_cost(X, R):
    """Squared Frobenius norm of the removed columns."""
    X = as_matrix(X)
    R = _removal(R, X.shape[1])
    return _set_cost(_column_costs(X), R.removed)


def apply_removal(X, R):
    """Zero the columns in R; shape is preserved."""
    X = as_matrix(X)
    R = _removal(R, X.shape[1])
    out = X.copy()
    out[:, list(R.removed)] = 0.0
    return out


def _find_next(X, y, R, D, col_cost):
    """One Find-Next scan. Returns ``(step or None, feasible count)``.

    Candidates are scanned in ascending index order and replaced only on a
    strictly larger ratio, so ties go to the lowest index. Zero-cost
    candidates have ratio +inf.
    """
    best = None
    best_ratio = -np.inf
    feasible = 0
    gone = set(R.removed)
    for e in range(X.shape[1]):
        if e in gone:
            continue
        c = _set_cost(col_cost, R.removed + (e,))
        if c > D:
            continue
        feasible += 1
        u = adversary_loss(X, y, R.add(e))
        ratio = u / c if c > 0 else np.inf
        if ratio > best_ratio:
            best_ratio = ratio
            best = GreedyStep(index=e, utility=u, cost=c, ratio=ratio, candidates=0)
    if best is not None:
        best = GreedyStep(best.index, best.utility, best.cost, best.ratio, feasible)
    return best, feasible


def greedy_approx(X, y, D):
    """Greedy utility-per-cost feature removal under budget D.

    Features are added while any candidate still fits in the budget, even if
    its marginal utility gain is negligible. Returns ``(RemovalSet, GreedyTrace)``.
    """
    X = as_matrix(X)
    y = as_vector(y, X.shape[0])
    D = _budget(D).D
    col_cost = _column_costs(X)
    R = RemovalSet.empty(X.shape[1])
    trace = GreedyTrace()
    while True:
        step, _ = _find_next(X, y, R, D, col_cost)
        if step is None:
            break
        R = R.add(step.index)
        trace.steps.append(step)
    return R, trace


def removal_budget(X, y, k):
    """Smallest budget under which greedy removes ``k`` features.

    Runs greedy without a budget for ``k`` steps and returns the cumulative
    cost. With that budget every chosen feature stays feasible, so greedy
    repeats the same ``k`` steps (and can only add zero-cost columns after).
    """
    X = as_matrix(X)
    y = as_vector(y, X.shape[0])
    if not 0 <= k <= X.shape[1]:
        raise ValueError(f"k must lie in [0, {X.shape[1]}]")
    col_cost = _column_costs(X)
    R = RemovalSet.empty(X.shape[1])
    for _ in range(k):
        step, _ = _find_next(X, y, R, np.inf, col_cost)
        R = R.add(step.index)
    return _set_cost(col_cost, R.removed)


def brute_force(X, y, D, max_features=BRUTE_FORCE_MAX_FEATURES):
    """Exhaustive search over all 2^n removal sets.

    Returns ``(RemovalSet, utility)`` for the feasible set of largest
    utility; ties go to the smaller cost, then the lexicographically
    smallest sorted index tuple.
    """
    X = as_matrix(X)
    y = as_vector(y, X.shape[0])
    D = _budget(D).D
    n = X.shape[1]
    if n > max_features:
        raise ValueError(f"brute force limited to {max_features} features, got {n}")
    col_cost = _column_costs(X)

    best_key = None
    best_u = -np.inf
    for size in range(n + 1):
        for subset in itertools.combinations(range(n), size):
            c = _set_cost(col_cost, subset)
            if c > D:
                continue
            kept = [j for j in range(n) if j not in subset]
            u = residual(X[:, kept], y)[1]
            tol = TIE_RTOL * max(1.0, abs(u), abs(best_u) if np.isfinite(best_u) else 0.0)
            if best_key is None or u > best_u + tol:
                best_u, best_key = u, (c, subset)
            elif abs(u - best_u) <= tol and (c, subset) < best_key:
                best_u, best_key = u, (c, subset)
    return RemovalSet(best_key[1], n), float(best_u)


def compression_objective(X, y, A):
    """``||y^T (X A A^+)(X A A^+)^+||^2`` for a given compression matrix A.

    Only evaluation is provided; A is not optimized.
    """
    X = as_matrix(X)
    y = as_vector(y, X.shape[0])
    A = as_matrix(A, "A")
    if A.shape[0] != X.shape[1]:
        raise ValueError(f"A has {A.shape[0]} rows, X has {X.shape[1]} columns")
    Z = X @ (A @ pinv(A))
    v = y @ (Z @ pinv(Z))
    return float(v @ v)


def reduced_target(X, theta, R):
    """Closed form ``||(X_R - X_S X_S^+ X_R) theta_R||^2`` of the squared
    adversary loss when the label is exactly ``X theta``."""
    X = as_matrix(X)
    n = X.shape[1]
    theta = as_vector(theta, n, "theta")
    R = _removal(R, n)
    rem, kept = list(R.removed), list(R.kept)
    if not rem:
        return 0.0
    XR, XS = X[:, rem], X[:, kept]
    M = XR - XS @ (pinv(XS) @ XR) if kept else XR
    v = M @ theta[rem]
    return float(v @ v)


class _FeatureRemover(TransformerMixin, BaseEstimator):
    """Common fit/transform plumbing; subclasses supply ``_solve``."""

    def __init__(self, alpha=0.3, budget=None):
        self.alpha = alpha
        self.budget = budget

    def _resolve_budget(self, X):
        if self.budget is not None:
            return Budget(float(self.budget))
        return Budget.from_fraction(X, self.alpha)

    def fit(self, X, y):
        X = as_matrix(X)
        y = as_vector(y, X.shape[0])
        self.n_features_in_ = X.shape[1]
        self.budget_ = self._resolve_budget(X).D
        self._solve(X, y)
        self.cost_ = removal_cost(X, self.removal_)
        return self

    def transform(self, X):
        check_is_fitted(self, "removal_")
        X = as_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        return apply_removal(X, self.removal_)

    def get_support(self):
        """Boolean mask of kept features."""
        check_is_fitted(self, "removal_")
        mask = np.ones(self.n_features_in_, dtype=bool)
        mask[list(self.removal_.removed)] = False
        return mask


class GreedyFeatureRemover(_FeatureRemover):
    """Greedy privatizer. Budget is ``budget`` if given, else ``alpha * ||X||_F^2``.

    Attributes after fit: ``removal_``, ``trace_``, ``utility_``, ``budget_``, ``cost_``.
    """

    def _solve(self, X, y):
        self.removal_, self.trace_ = greedy_approx(X, y, self.budget_)
        self.utility_ = adversary_loss(X, y, self.removal_)


class ExhaustiveFeatureRemover(_FeatureRemover):
    """Optimal privatizer by subset enumeration (n <= 20)."""

    def _solve(self, X, y):
        self.removal_, self.utility_ = brute_force(X, y, self.budget_)
