"""Numerical minimax-regret rules from the discretized statistical game.

The decision maker mixes over threshold rules ``1{mu_hat > t}`` on a fixed
grid and learns by multiplicative weights; nature stays continuous and plays
an exact best response to the current mixture each round. The time-averaged
mixture is returned together with a lower and an upper bound on the game value.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    WINDOW_SIGMAS,
    DecisionRule,
    MixedThreshold,
    Model,
    NatureState,
    evaluate_rule,
    regret_profile,
)
from .errors import DomainError
from .numerics import maximize_1d, std_normal_cdf

log = logging.getLogger(__name__)

#: required coverage of the threshold grid, in sigmas beyond +-k
GRID_SPAN_SIGMAS = 4.0


@dataclass(frozen=True)
class GameConfig:
    model: Model
    threshold_grid: tuple[float, ...]
    learning_rate: float | None = None
    iterations: int = 2000
    br_grid_n: int = 801
    checkpoint_every: int = 100

    def __post_init__(self):
        grid = np.asarray(self.threshold_grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0:
            raise DomainError("threshold_grid must be a nonempty list")
        if np.any(np.diff(grid) <= 0):
            raise DomainError("threshold_grid must be strictly increasing")
        # a one-point grid is the degenerate single-strategy game; no span needed
        if grid.size > 1:
            need = self.model.k + GRID_SPAN_SIGMAS * self.model.sigma
            if grid[0] > -need or grid[-1] < need:
                raise DomainError(
                    f"threshold_grid [{grid[0]}, {grid[-1]}] must span [{-need}, {need}]"
                )
        if self.learning_rate is not None and not self.learning_rate > 0:
            raise DomainError("learning_rate must be > 0")
        if self.iterations < 1:
            raise DomainError("iterations must be >= 1")
        if self.br_grid_n < 3:
            raise DomainError("br_grid_n must be >= 3")
        if self.checkpoint_every < 1:
            raise DomainError("checkpoint_every must be >= 1")
        object.__setattr__(self, "threshold_grid", tuple(float(t) for t in grid))

    @classmethod
    def uniform(cls, model: Model, n: int = 401, span_sigmas: float = 5.0, **kwargs) -> "GameConfig":
        """Evenly spaced grid on ``[-(k + span_sigmas*sigma), k + span_sigmas*sigma]``."""
        half = model.k + span_sigmas * model.sigma
        return cls(model, tuple(np.linspace(-half, half, n)), **kwargs)

    @property
    def payoff_bound(self) -> float:
        return self.model.k + WINDOW_SIGMAS * self.model.sigma

    def eta(self) -> float:
        """Learning rate; by default ``sqrt(8 ln G / T) / (k + sigma)``.

        ``k + sigma`` is the scale of regret at the states nature actually
        plays. Using the clipping bound ``k + 8 sigma`` instead is valid but
        slows convergence roughly eightfold.
        """
        if self.learning_rate is not None:
            return self.learning_rate
        g = len(self.threshold_grid)
        scale = self.model.k + self.model.sigma
        return math.sqrt(8.0 * math.log(max(g, 2)) / self.iterations) / scale


@dataclass(frozen=True)
class Checkpoint:
    iteration: int
    lower: float
    upper: float
    increased: bool = False

    @property
    def gap(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class GameSolution:
    rule: MixedThreshold
    lower_bound: float
    upper_bound: float
    iterations_run: int
    history: list[Checkpoint] = field(repr=False)
    worst_state: NatureState | None = None

    @property
    def gap(self) -> float:
        return self.upper_bound - self.lower_bound


def payoff(threshold, state: NatureState, sigma: float):
    """Regret of the pure rule ``1{mu_hat > threshold}`` at ``state``.

    ``threshold`` may be an array, giving one payoff per threshold.
    """
    if not sigma > 0:
        raise DomainError("sigma must be > 0")
    treat = std_normal_cdf((state.mu - np.asarray(threshold, dtype=float)) / sigma)
    oracle = 1.0 if state.mu_star > 0 else 0.0
    out = state.mu_star * (oracle - treat)
    return float(out) if np.ndim(out) == 0 else out


class _Nature:
    """Best response of nature to threshold mixtures over a fixed grid."""

    def __init__(self, config: GameConfig):
        m = config.model
        self.k, self.sigma = m.k, m.sigma
        self.thresholds = np.asarray(config.threshold_grid)
        self.half = m.k + WINDOW_SIGMAS * m.sigma
        self.grid_n = config.br_grid_n
        self.mu_grid = np.linspace(-self.half, self.half, self.grid_n)
        self.cdf = std_normal_cdf((self.mu_grid[:, None] - self.thresholds) / self.sigma)

    def _treat(self, mu, weights):
        mu = np.asarray(mu, dtype=float)
        if mu.ndim == 1 and mu.shape == self.mu_grid.shape and np.array_equal(mu, self.mu_grid):
            return self.cdf @ weights
        return std_normal_cdf((mu[..., None] - self.thresholds) / self.sigma) @ weights

    def best_response(self, weights: np.ndarray) -> tuple[NatureState, float]:
        def profile(mu):
            return regret_profile(mu, self._treat(mu, weights), self.k)[0]

        mu, value = maximize_1d(profile, -self.half, self.half, self.grid_n, vectorized=True)
        _, mu_star = regret_profile(mu, self._treat(mu, weights), self.k)
        return NatureState(float(mu), float(mu_star)), float(value)


def solve(config: GameConfig) -> GameSolution:
    """Run multiplicative weights for the decision maker against a
    best-responding nature.

    ``upper_bound`` is the worst-case regret of the averaged mixture.
    ``lower_bound`` is the smallest average payoff any grid threshold earns
    against nature's empirical play, a lower bound on the grid game's value.
    """
    sigma = config.model.sigma
    thresholds = np.asarray(config.threshold_grid)
    g = thresholds.size
    nature = _Nature(config)
    eta = config.eta()
    bound = config.payoff_bound

    weights = np.full(g, 1.0 / g)
    weight_sum = np.zeros(g)
    payoff_sum = np.zeros(g)
    history: list[Checkpoint] = []
    last_upper = math.inf

    for it in range(1, config.iterations + 1):
        state, _ = nature.best_response(weights)
        weight_sum += weights
        p = payoff(thresholds, state, sigma)
        p = np.clip(np.atleast_1d(p), 0.0, bound)
        payoff_sum += p
        # subtract the min before exponentiating; the shift cancels on normalization
        logw = np.log(np.maximum(weights, 1e-300)) - eta * (p - p.min())
        weights = np.exp(logw - logw.max())
        weights /= weights.sum()

        if it % config.checkpoint_every == 0 or it == config.iterations:
            avg = weight_sum / weight_sum.sum()
            _, upper = nature.best_response(avg)
            lower = float(payoff_sum.min() / it)
            increased = upper > last_upper + 1e-6
            if increased:
                log.debug("upper bound rose at iteration %d: %.6g -> %.6g", it, last_upper, upper)
            history.append(Checkpoint(it, lower, upper, increased))
            last_upper = upper

    avg = weight_sum / weight_sum.sum()
    worst_state, upper = nature.best_response(avg)
    lower = min(float(payoff_sum.min() / config.iterations), upper)
    rule = MixedThreshold.from_arrays(thresholds, avg)
    return GameSolution(rule, lower, upper, config.iterations, history, worst_state)


def rule_distance(a: DecisionRule, b: DecisionRule, grid: Sequence[float]) -> float:
    """Sup distance between two rules over ``grid``."""
    x = np.asarray(grid, dtype=float)
    if x.size == 0:
        raise DomainError("grid must be nonempty")
    return float(np.max(np.abs(evaluate_rule(a, x) - evaluate_rule(b, x))))
