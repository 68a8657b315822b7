"""Exact minimax-regret objects for the interval-identified Gaussian model.

The decision maker sees ``mu_hat ~ N(mu, sigma)`` and knows only that the
payoff-relevant effect ``mu_star`` lies in ``[mu - k, mu + k]``. Regret of a
rule ``d`` at a state is ``mu_star * (1{mu_star > 0} - E[d(mu_hat)])``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy import special

from .errors import DomainError, RegimeError
from .numerics import Bracket, Tolerances, find_root, maximize_1d, std_normal_cdf, std_normal_pdf

SQRT_HALF_PI = math.sqrt(math.pi / 2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)

#: half-width of the nature search window, in units of sigma beyond +-k
WINDOW_SIGMAS = 8.0


class Regime(str, enum.Enum):
    THRESHOLD_OPTIMAL = "ThresholdOptimal"
    RANDOMIZED_OPTIMAL = "RandomizedOptimal"


@dataclass(frozen=True)
class Model:
    """Identification half-width ``k`` and signal standard deviation ``sigma``."""

    k: float
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "k", float(self.k))
        object.__setattr__(self, "sigma", float(self.sigma))
        if not (math.isfinite(self.k) and self.k >= 0):
            raise DomainError(f"k must be finite and >= 0, got {self.k}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise DomainError(f"sigma must be finite and > 0, got {self.sigma}")

    def state(self, mu: float, mu_star: float) -> "NatureState":
        """Build a nature state, checking it against this model's ``k``."""
        slack = 1e-12 * max(1.0, self.k, abs(mu))
        if abs(mu_star - mu) > self.k + slack:
            raise DomainError(f"|mu_star - mu| = {abs(mu_star - mu)} exceeds k = {self.k}")
        return NatureState(mu, mu_star)


@dataclass(frozen=True)
class NatureState:
    mu: float
    mu_star: float


# Decision rules. All variants are nondecreasing maps R -> [0, 1]. At an exact
# tie mu_hat == t a threshold reports 1/2, which keeps d(-x) = 1 - d(x).


@dataclass(frozen=True)
class Threshold:
    t: float = 0.0

    def __call__(self, mu_hat):
        return evaluate_rule(self, mu_hat)


@dataclass(frozen=True)
class PiecewiseLinear:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DomainError(f"PiecewiseLinear needs lo < hi, got [{self.lo}, {self.hi}]")

    def __call__(self, mu_hat):
        return evaluate_rule(self, mu_hat)


@dataclass(frozen=True)
class MixedThreshold:
    thresholds: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        t = np.asarray(self.thresholds, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if t.ndim != 1 or t.size == 0 or t.shape != w.shape:
            raise DomainError("thresholds and weights must be nonempty and equally long")
        if np.any(np.diff(t) <= 0):
            raise DomainError("thresholds must be strictly increasing")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise DomainError("weights must be nonnegative and sum to 1")
        object.__setattr__(self, "thresholds", tuple(float(x) for x in t))
        object.__setattr__(self, "weights", tuple(float(x) for x in w))

    @classmethod
    def from_arrays(cls, thresholds: Sequence[float], weights: Sequence[float],
                    drop_below: float = 0.0) -> "MixedThreshold":
        """Build from arrays, dropping weights ``<= drop_below`` and renormalizing."""
        t = np.asarray(thresholds, dtype=float)
        w = np.asarray(weights, dtype=float)
        keep = w > drop_below
        t, w = t[keep], w[keep]
        return cls(tuple(t), tuple(w / w.sum()))

    def __call__(self, mu_hat):
        return evaluate_rule(self, mu_hat)


DecisionRule = Union[Threshold, PiecewiseLinear, MixedThreshold]


@dataclass(frozen=True)
class RegretReport:
    worst_regret: float
    argmax_state: NatureState
    trace: list[tuple[float, float]] = field(repr=False)


def regime(model: Model) -> Regime:
    if model.k <= model.sigma * SQRT_HALF_PI:
        return Regime.THRESHOLD_OPTIMAL
    return Regime.RANDOMIZED_OPTIMAL


def kstar_gap_function(t: float, model: Model) -> float:
    """``t/(2k) - 1/2 + Phi(-t/sigma)``; k* is its unique positive root.

    Written as ``t/(2k) - erf(t/(sigma*sqrt 2))/2`` near the origin, where
    ``1/2 - Phi(-x)`` would cancel.
    """
    x = t / model.sigma
    if abs(x) < 1.0:
        return t / (2.0 * model.k) - 0.5 * float(special.erf(x / math.sqrt(2.0)))
    return t / (2.0 * model.k) - 0.5 + std_normal_cdf(-x)


def kstar(model: Model) -> float:
    """Half-width of the randomization band of the linear MMR rule.

    The defining function is convex on t > 0 with a spurious root at 0, so the
    search is bracketed by its analytic minimizer and ``k``.
    """
    if regime(model) is Regime.THRESHOLD_OPTIMAL:
        raise RegimeError(
            f"k = {model.k} <= sigma*sqrt(pi/2) = {model.sigma * SQRT_HALF_PI}; "
            "the threshold rule is optimal and k* is undefined"
        )
    k, sigma = model.k, model.sigma
    t_min = sigma * math.sqrt(2.0 * math.log(2.0 * k / (sigma * _SQRT_2PI)))
    t_min = min(t_min, k)
    g_min = kstar_gap_function(t_min, model)
    g_k = kstar_gap_function(k, model)
    if g_k <= 0.0:
        # Phi(-k/sigma) underflowed; the root sits at k to working precision
        return k
    if g_min >= 0.0:
        # k is within rounding of the regime boundary and the root merges with t_min
        return t_min
    tol = Tolerances(abs_x=max(1e-14 * k, 1e-300), abs_f=1e-13 * max(1.0, k), max_iter=500)
    return find_root(lambda t: kstar_gap_function(t, model), Bracket(t_min, k), tol)


def randomization_gap(model: Model) -> float:
    """``k - k*`` evaluated without cancellation, as ``2k * Phi(-k*/sigma)``."""
    return 2.0 * model.k * std_normal_cdf(-kstar(model) / model.sigma)


def log_relative_gap(model: Model) -> float:
    """``log((k - k*) / k)``, finite even where ``k - k*`` underflows."""
    return math.log(2.0) + float(special.log_ndtr(-kstar(model) / model.sigma))


def mmr_rule(model: Model) -> DecisionRule:
    if regime(model) is Regime.THRESHOLD_OPTIMAL:
        return Threshold(0.0)
    ks = kstar(model)
    return PiecewiseLinear(-ks, ks)


def evaluate_rule(rule: DecisionRule, mu_hat):
    """Treatment probability of ``rule`` at ``mu_hat`` (float or array)."""
    x = np.asarray(mu_hat, dtype=float)
    if isinstance(rule, Threshold):
        out = _step(x - rule.t)
    elif isinstance(rule, PiecewiseLinear):
        out = np.clip((x - rule.lo) / (rule.hi - rule.lo), 0.0, 1.0)
    elif isinstance(rule, MixedThreshold):
        t = np.asarray(rule.thresholds)
        w = np.asarray(rule.weights)
        out = np.clip(_step(x[..., None] - t) @ w, 0.0, 1.0)
    else:
        raise TypeError(f"not a decision rule: {rule!r}")
    return float(out) if out.ndim == 0 else out


def _step(z):
    return np.where(z > 0, 1.0, np.where(z < 0, 0.0, 0.5))


def expected_treatment(rule: DecisionRule, mu, sigma: float):
    """``E[d(mu_hat)]`` for ``mu_hat ~ N(mu, sigma)``, in closed form.

    For the linear segment on [lo, hi], with a = (lo-mu)/sigma and
    b = (hi-mu)/sigma,

        E = Phi(-b) + [(mu-lo)(Phi(b)-Phi(a)) + sigma(phi(a)-phi(b))] / (hi-lo).
    """
    if not sigma > 0:
        raise DomainError("sigma must be > 0")
    mu = np.asarray(mu, dtype=float)
    if isinstance(rule, Threshold):
        out = std_normal_cdf((mu - rule.t) / sigma)
    elif isinstance(rule, MixedThreshold):
        t = np.asarray(rule.thresholds)
        w = np.asarray(rule.weights)
        out = std_normal_cdf((mu[..., None] - t) / sigma) @ w
    elif isinstance(rule, PiecewiseLinear):
        lo, hi = rule.lo, rule.hi
        a = (lo - mu) / sigma
        b = (hi - mu) / sigma
        # Phi(b) - Phi(a) through the upper tails keeps precision when both are near 1
        mass = std_normal_cdf(-a) - std_normal_cdf(-b)
        inner = (mu - lo) * mass + sigma * (std_normal_pdf(a) - std_normal_pdf(b))
        out = std_normal_cdf(-b) + inner / (hi - lo)
    else:
        raise TypeError(f"not a decision rule: {rule!r}")
    out = np.clip(out, 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def regret(rule: DecisionRule, state: NatureState, sigma: float) -> float:
    treat = expected_treatment(rule, state.mu, sigma)
    oracle = 1.0 if state.mu_star > 0 else 0.0
    return state.mu_star * (oracle - treat)


def regret_profile(mu, treat, k: float):
    """Nature's best ``mu_star`` for each ``mu``, given ``treat = E[d]`` there.

    Regret is linear in ``mu_star`` on each side of 0, so the maximum is at
    ``mu + k`` (when positive), ``mu - k`` (when negative) or 0. Returns the
    maximal regret and the maximizing ``mu_star``.
    """
    mu = np.asarray(mu, dtype=float)
    treat = np.asarray(treat, dtype=float)
    upper = mu + k
    lower = mu - k
    r_up = np.where(upper > 0, upper * (1.0 - treat), -np.inf)
    r_lo = np.where(lower < 0, -lower * treat, -np.inf)
    best = np.maximum(np.maximum(r_up, r_lo), 0.0)
    arg = np.where(r_up >= r_lo, upper, lower)
    arg = np.where(best > 0, arg, np.clip(0.0, lower, upper))
    return best, arg


def worst_case_search(treat_fn, model: Model, grid_n: int = 801,
                      window: float | None = None) -> RegretReport:
    """Maximize the regret profile over ``mu`` for a treatment-probability
    function ``treat_fn(mu)`` that accepts floats and arrays."""
    k, sigma = model.k, model.sigma
    half = window if window is not None else k + WINDOW_SIGMAS * sigma

    def profile(mu):
        return regret_profile(mu, treat_fn(mu), k)[0]

    grid = np.linspace(-half, half, grid_n)
    values = profile(grid)
    mu_best, r_best = maximize_1d(profile, -half, half, grid_n, vectorized=True)
    _, mu_star = regret_profile(mu_best, treat_fn(mu_best), k)
    trace = list(zip(grid.tolist(), np.asarray(values).tolist()))
    return RegretReport(float(r_best), NatureState(float(mu_best), float(mu_star)), trace)


def nature_best_response(rule: DecisionRule, model: Model, grid_n: int = 801,
                         window: float | None = None) -> RegretReport:
    """Worst-case expected regret of ``rule`` and the state attaining it."""
    if grid_n < 801:
        raise DomainError("nature's grid needs at least 801 points")
    return worst_case_search(lambda mu: expected_treatment(rule, mu, model.sigma),
                             model, grid_n, window)


def worst_regret(rule: DecisionRule, model: Model, grid_n: int = 801) -> float:
    return nature_best_response(rule, model, grid_n).worst_regret
