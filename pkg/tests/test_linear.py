import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gapriv.datasets import gen_toy
from gapriv.linalg import frob_sq
from gapriv.linear import (
    Budget,
    ExhaustiveFeatureRemover,
    GreedyFeatureRemover,
    RemovalSet,
    adversary_loss,
    apply_removal,
    brute_force,
    compression_objective,
    greedy_approx,
    reduced_target,
    removal_budget,
    removal_cost,
)

X3 = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
Y3 = np.array([1.0, 0.0, 1.0])


def lstsq_loss(X, y, removed):
    kept = [j for j in range(X.shape[1]) if j not in removed]
    if not kept:
        return float(np.linalg.norm(y))
    coef = np.linalg.lstsq(X[:, kept], y, rcond=None)[0]
    return float(np.linalg.norm(y - X[:, kept] @ coef))


def toy(seed, m=30, n=5):
    ds = gen_toy(m, n, seed)
    return ds.X, ds.labels["y"]


# examples

def test_adversary_loss_hand_examples():
    # keeping column (1,0,1) which equals y leaves nothing
    assert adversary_loss(X3, Y3, {1}) == pytest.approx(0.0, abs=1e-12)
    # keeping (0,1,1): coefficient 1/2, residual (1,-1/2,1/2)
    assert adversary_loss(X3, Y3, {0}) == pytest.approx(1.224744871391589, rel=1e-12)
    assert adversary_loss(X3, Y3, set()) == pytest.approx(0.0, abs=1e-12)
    assert adversary_loss(X3, Y3, {0, 1}) == pytest.approx(math.sqrt(2.0))


def test_adversary_loss_matches_lstsq(rng):
    X, y = toy(0)
    for removed in [(), (0,), (1, 3), (0, 2, 4)]:
        assert adversary_loss(X, y, removed) == pytest.approx(lstsq_loss(X, y, removed), rel=1e-9)


def test_removal_cost_examples():
    X, _ = toy(1)
    assert removal_cost(X, ()) == 0.0
    assert removal_cost(X, (2,)) == pytest.approx(np.sum(X[:, 2] ** 2), rel=1e-15)


def test_apply_removal_examples():
    X, _ = toy(1)
    np.testing.assert_array_equal(apply_removal(X, ()), X)
    np.testing.assert_array_equal(apply_removal(X, range(X.shape[1])), np.zeros_like(X))
    out = apply_removal(X, (1,))
    assert np.all(out[:, 1] == 0) and np.array_equal(np.delete(out, 1, axis=1), np.delete(X, 1, axis=1))


def test_greedy_zero_budget_removes_nothing():
    X, y = toy(2)
    R, trace = greedy_approx(X, y, 0.0)
    assert R.removed == () and len(trace) == 0


def test_greedy_zero_cost_column_goes_first():
    X, y = toy(3)
    X[:, 3] = 0.0
    X[:, 1] = 0.0
    R, trace = greedy_approx(X, y, 0.0)
    assert trace.order == [1, 3]
    assert trace.steps[0].ratio == np.inf


def test_brute_force_examples():
    X, y = toy(4)
    R, u = brute_force(X, y, frob_sq(X))
    assert R.removed == tuple(range(X.shape[1]))
    assert u == pytest.approx(np.linalg.norm(y))
    R, _ = brute_force(X, y, 0.0)
    assert R.removed == ()
    with pytest.raises(ValueError):
        brute_force(np.ones((3, 21)), np.ones(3), 1.0)


def test_brute_force_100_by_5_dominates_greedy():
    X, y = toy(5, m=100)
    D = Budget.from_fraction(X, 0.3)
    _, ub = brute_force(X, y, D)
    Rg, _ = greedy_approx(X, y, D)
    assert ub >= adversary_loss(X, y, Rg) - 1e-9


def test_brute_force_tie_breaks():
    # removing either orthogonal column leaves residual 1
    y = np.array([1.0, 1.0])
    R, u = brute_force(np.eye(2), y, 1.5)
    assert R.removed == (0,) and u == pytest.approx(1.0)
    # equal utility, the smaller cost wins over the lower index
    R, u = brute_force(np.diag([2.0, 1.0]), y, 4.5)
    assert R.removed == (1,) and u == pytest.approx(1.0)


def test_removal_set_partition():
    R = RemovalSet((3, 0), 5)
    assert R.removed == (3, 0)
    assert set(R.removed) | set(R.kept) == set(range(5))
    with pytest.raises(ValueError):
        RemovalSet((5,), 5)
    with pytest.raises(ValueError):
        Budget(-1.0)


def test_compression_objective_examples(rng):
    X, y = toy(6, m=6, n=3)
    P = X @ np.linalg.pinv(X)
    assert compression_objective(X, y, np.eye(3)) == pytest.approx(float(np.sum((y @ P) ** 2)), rel=1e-10)
    assert compression_objective(X, y, np.zeros((3, 3))) == 0.0


@pytest.mark.parametrize("seed", range(10))
def test_compression_objective_pythagoras_with_selector(seed):
    X, y = toy(seed, m=6, n=3)
    kept = [0, 2]
    A = np.zeros((3, 3))
    A[kept, kept] = 1.0
    obj = compression_objective(X, y, A)
    loss = adversary_loss(X, y, {1})
    assert obj + loss**2 == pytest.approx(float(y @ y), rel=1e-10)


def test_reduced_target_examples(rng):
    X = rng.uniform(size=(8, 4))
    theta = rng.uniform(size=4)
    assert reduced_target(X, theta, ()) == 0.0
    y = X @ theta
    # independent side: lstsq residual of y on kept columns
    assert reduced_target(X, theta, {0, 2}) == pytest.approx(lstsq_loss(X, y, {0, 2}) ** 2, rel=1e-9)


def test_removal_budget_reproduces_k_steps():
    X, y = toy(7, m=50, n=6)
    _, full = greedy_approx(X, y, np.inf)
    for k in range(7):
        R, trace = greedy_approx(X, y, removal_budget(X, y, k))
        assert trace.order == full.order[:k]


# estimators

def test_greedy_estimator():
    X, y = toy(8)
    est = GreedyFeatureRemover(alpha=0.3).fit(X, y)
    assert est.cost_ <= est.budget_
    assert est.budget_ == pytest.approx(0.3 * frob_sq(X))
    Z = est.transform(X)
    np.testing.assert_array_equal(Z[:, ~est.get_support()], 0.0)
    assert est.get_params() == {"alpha": 0.3, "budget": None}
    assert est.utility_ == pytest.approx(adversary_loss(X, y, est.removal_))


def test_exhaustive_estimator_dominates():
    X, y = toy(9)
    g = GreedyFeatureRemover(budget=5.0).fit(X, y)
    b = ExhaustiveFeatureRemover(budget=5.0).fit(X, y)
    assert b.budget_ == 5.0
    assert b.utility_ >= g.utility_ - 1e-9
    with pytest.raises(ValueError):
        b.transform(X[:, :2])


# properties

instance = st.tuples(st.integers(2, 40), st.integers(1, 6), st.integers(0, 2**31))


@settings(max_examples=200, deadline=None)
@given(instance, st.data())
def test_monotone_in_removal_set(params, data):
    m, n, seed = params
    X, y = toy(seed, m, n)
    small = data.draw(st.sets(st.integers(0, n - 1)))
    big = small | data.draw(st.sets(st.integers(0, n - 1)))
    assert adversary_loss(X, y, small) <= adversary_loss(X, y, big) + 1e-9


@settings(max_examples=150, deadline=None)
@given(instance, st.floats(0.0, 1.0))
def test_feasible_and_dominated(params, alpha):
    m, n, seed = params
    X, y = toy(seed, m, n)
    D = Budget.from_fraction(X, alpha)
    Rg, trace = greedy_approx(X, y, D)
    Rb, ub = brute_force(X, y, D)
    assert removal_cost(X, Rg) <= D.D and removal_cost(X, Rb) <= D.D
    assert ub >= adversary_loss(X, y, Rg) - 1e-9
    costs = [s.cost for s in trace.steps]
    assert costs == sorted(costs)


@settings(max_examples=100, deadline=None)
@given(instance, st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_brute_force_monotone_in_budget(params, a, b):
    m, n, seed = params
    X, y = toy(seed, m, n)
    lo, hi = sorted((a, b))
    assert brute_force(X, y, Budget.from_fraction(X, hi))[1] >= brute_force(X, y, Budget.from_fraction(X, lo))[1] - 1e-12


@settings(max_examples=150, deadline=None)
@given(instance, st.data())
def test_closed_form_matches_squared_loss(params, data):
    m, n, seed = params
    r = np.random.default_rng(seed)
    X = r.uniform(size=(m, n))
    theta = r.uniform(size=n)
    R = data.draw(st.sets(st.integers(0, n - 1)))
    lhs = adversary_loss(X, X @ theta, R) ** 2
    assert lhs == pytest.approx(reduced_target(X, theta, R), rel=1e-9, abs=1e-18)
