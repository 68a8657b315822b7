"""Minimax-regret treatment rules under interval partial identification."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    MixedThreshold,
    Model,
    NatureState,
    PiecewiseLinear,
    Regime,
    RegretReport,
    Threshold,
    evaluate_rule,
    expected_treatment,
    kstar,
    log_relative_gap,
    mmr_rule,
    randomization_gap,
    nature_best_response,
    regime,
    regret,
)
from .game import GameConfig, GameSolution, payoff, rule_distance, solve  # noqa: E402

__all__ = [
    "GameConfig", "GameSolution", "MixedThreshold", "Model", "NatureState", "PiecewiseLinear",
    "Regime", "RegretReport", "Threshold", "evaluate_rule", "expected_treatment", "kstar",
    "log_relative_gap", "mmr_rule", "nature_best_response", "payoff", "randomization_gap", "regime", "regret", "rule_distance", "solve",
]
