"""Linear-case measurements: before/after loss reports and the greedy
optimum-ratio experiment on toy data."""

import csv
from dataclasses import dataclass, field

import numpy as np

from ._random import substream
from .datasets import gen_toy
from .linalg import frob_sq, residual
from .linear import RemovalSet, brute_force, greedy_approx, removal_cost

MATCH_RTOL = 1e-9


@dataclass(frozen=True)
class LabelLoss:
    name: str
    role: str
    loss_before: float
    loss_after: float


@dataclass
class LossReport:
    rows: list
    removal_order: list
    budget: float = float("nan")

    def by_name(self, name):
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["label", "role", "loss_before", "loss_after"])
            for r in self.rows:
                w.writerow([r.name, r.role, repr(r.loss_before), repr(r.loss_after)])


def _mse(X, y):
    return residual(X, y)[1] ** 2 / len(y)


def loss_report(ds, R, budget=float("nan")):
    """In-sample mean squared residual of the best linear predictor of every
    label, using all features (before) and the kept features (after)."""
    if not isinstance(R, RemovalSet):
        R = RemovalSet(tuple(R), ds.n)
    kept = list(R.kept)
    # index both sides the same way so R = {} gives bit-identical losses
    X_all = ds.X[:, list(range(ds.n))]
    rows = [
        LabelLoss(
            name=name,
            role=ds.label_roles.get(name, "public"),
            loss_before=_mse(X_all, y),
            loss_after=_mse(ds.X[:, kept], y),
        )
        for name, y in ds.labels.items()
    ]
    return LossReport(rows=rows, removal_order=R.names(ds.feature_names), budget=budget)


@dataclass
class RatioCurve:
    """Per ``(n, m)`` cell: fraction of trials in which greedy reached the
    brute-force optimum (utility match), plus exact set matches for reference."""

    trials: int
    seed: int
    alpha: float
    cells: dict = field(default_factory=dict)  # (n, m) -> (utility_frac, set_frac)

    def fraction(self, n, m):
        return self.cells[(n, m)][0]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "m", "trials", "fraction", "set_match_fraction"])
            for (n, m), (frac, set_frac) in sorted(self.cells.items()):
                w.writerow([n, m, self.trials, repr(frac), repr(set_frac)])


@dataclass(frozen=True)
class TrialResult:
    greedy_utility: float
    brute_utility: float
    greedy_cost: float
    brute_cost: float
    budget: float
    utility_match: bool
    set_match: bool


def run_trial(n, m, alpha, seed, trial):
    """One toy instance, solved both ways. Seeded by ``(seed, n, m, trial)``."""
    sub = int(substream(seed, "ratio-trial", n, m, trial).integers(2**32))
    ds = gen_toy(m, n, sub)
    X, y = ds.X, ds.labels["y"]
    D = alpha * frob_sq(X)
    Rg, _ = greedy_approx(X, y, D)
    Rb, ub = brute_force(X, y, D)
    ug = residual(X[:, list(Rg.kept)], y)[1]
    return TrialResult(
        greedy_utility=ug,
        brute_utility=ub,
        greedy_cost=removal_cost(X, Rg),
        brute_cost=removal_cost(X, Rb),
        budget=D,
        utility_match=abs(ub - ug) <= MATCH_RTOL * max(abs(ub), 1e-300),
        set_match=set(Rg.removed) == set(Rb.removed),
    )


def ratio_experiment(n_range, m_range, trials=100, alpha=0.3, seed=0, executor=None):
    """Fraction of toy instances on which greedy attains the exhaustive optimum.

    ``executor`` (e.g. a ThreadPoolExecutor) may fan trials out; sub-seeding
    per ``(seed, n, m, trial)`` keeps the result schedule-independent.
    """
    jobs = [(n, m, t) for n in n_range for m in m_range for t in range(trials)]
    mapper = executor.map if executor is not None else map
    results = list(mapper(lambda job: run_trial(job[0], job[1], alpha, seed, job[2]), jobs))
    curve = RatioCurve(trials=trials, seed=seed, alpha=alpha)
    for n in n_range:
        for m in m_range:
            cell = [r for (jn, jm, _), r in zip(jobs, results) if (jn, jm) == (n, m)]
            u = np.mean([r.utility_match for r in cell]) if cell else float("nan")
            s = np.mean([r.set_match for r in cell]) if cell else float("nan")
            curve.cells[(n, m)] = (float(u), float(s))
    return curve
