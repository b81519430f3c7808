"""Monte Carlo baseline estimator and empirical convergence-rate regression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DataError
from .stochastic_space import RandomSpace, make_generator

__all__ = ["McStudy", "mc_estimate", "mc_prefix_means", "regression_rate"]


@dataclass(frozen=True)
class McStudy:
    """Sample budgets, repetition count and base seed of a Monte Carlo study."""

    budgets: tuple[int, ...]
    repetitions: int = 10
    seed: int = 0

    def __post_init__(self):
        budgets = tuple(int(b) for b in self.budgets)
        if any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])) or budgets[0] < 1:
            raise ConfigurationError("sample budgets must be positive and strictly increasing")
        if self.repetitions < 1:
            raise ConfigurationError("repetitions must be >= 1")
        object.__setattr__(self, "budgets", budgets)

    def run_seed(self, run: int) -> int:
        return self.seed + run


def mc_estimate(f, space: RandomSpace, eta: int, seed: int) -> float:
    """Sample mean of f over eta i.i.d. draws; deterministic per seed."""
    if eta < 1:
        raise ConfigurationError(f"sample count must be >= 1, got {eta}")
    ys = space.sample_array(make_generator(seed), eta)
    values = np.array([float(f(y)) for y in ys])
    return float(np.mean(values))


def mc_prefix_means(values: np.ndarray, budgets) -> np.ndarray:
    """Means over the first eta samples for each budget eta.

    With values drawn from the seed's stream, entry i equals
    mc_estimate(f, space, budgets[i], seed) bitwise.
    """
    return np.array([float(np.mean(values[:eta])) for eta in budgets])


def regression_rate(points) -> float:
    """Least-squares slope of log(error) vs log(eta), sign-flipped so that
    a rate of 0.5 means error ~ eta^(-0.5)."""
    points = [(float(e), float(err)) for e, err in points]
    if len(points) < 2:
        raise DataError("need at least two (eta, error) points")
    if any(err <= 0.0 for _, err in points):
        raise DataError("errors must be positive for a log-log fit")
    log_eta = np.log([e for e, _ in points])
    log_err = np.log([err for _, err in points])
    slope = np.polyfit(log_eta, log_err, 1)[0]
    return float(-slope)
