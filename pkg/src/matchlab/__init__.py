"""Matching-market experiment laboratory.

Exact matching LPs with shadow prices, Poisson marketplace simulation, and
estimators of the global treatment effect of a costly demand-side intervention.
"""

from matchlab.costs import CostModel, discounted_duals, discounted_weights, intervention_cost
from matchlab.lp import (
    CeProblem,
    CiProblem,
    MatchingInstance,
    MatchOutcome,
    Violation,
    brute_force_matching,
    solve_ce,
    solve_ci,
    verify_kkt,
)

__all__ = [
    "CeProblem",
    "CiProblem",
    "CostModel",
    "MatchOutcome",
    "MatchingInstance",
    "Violation",
    "brute_force_matching",
    "discounted_duals",
    "discounted_weights",
    "intervention_cost",
    "solve_ce",
    "solve_ci",
    "verify_kkt",
]

__version__ = "0.1.0"
