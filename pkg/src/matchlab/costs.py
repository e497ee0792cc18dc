"""Treatment-cost models: proportional discount and fixed per-match cost."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from matchlab.lp import MatchingInstance, MatchOutcome

PROPORTIONAL = "proportional"
FIXED = "fixed"
_DUAL_TOL = 1e-9


class CostModelError(ValueError):
    """Cost parameters are outside their admissible range."""


class DualPreconditionError(ValueError):
    """The supplied duals cannot be discounted in closed form (not optimal for the stated totals)."""


@dataclass(frozen=True)
class CostModel:
    """A proportional discount ``alpha`` or a fixed per-match cost ``kappa``."""

    kind: str
    alpha: float = 0.0
    kappa: float = 0.0

    def __post_init__(self):
        if self.kind == PROPORTIONAL:
            if not 0.0 <= self.alpha < 1.0:
                raise CostModelError(f"alpha must lie in [0, 1), got {self.alpha}")
        elif self.kind == FIXED:
            if not self.kappa > 0.0:
                raise CostModelError(f"kappa must be positive, got {self.kappa}")
        else:
            raise CostModelError(f"unknown cost model kind {self.kind!r}")

    @classmethod
    def proportional(cls, alpha: float) -> CostModel:
        return cls(PROPORTIONAL, alpha=float(alpha))

    @classmethod
    def fixed(cls, kappa: float) -> CostModel:
        return cls(FIXED, kappa=float(kappa))

    @property
    def param(self) -> float:
        return self.alpha if self.kind == PROPORTIONAL else self.kappa

    @property
    def label(self) -> str:
        return f"{self.kind}({self.param:g})"

    def validate_for(self, instance: MatchingInstance) -> None:
        if self.kind == FIXED and not self.kappa < float(instance.v.min()):
            raise CostModelError(f"kappa={self.kappa} must be below the smallest match value {instance.v.min()}")

    def zeta(self, instance: MatchingInstance) -> float:
        """Relative size of the treatment cost: alpha, or kappa over the smallest match value."""
        if self.kind == PROPORTIONAL:
            return self.alpha
        return self.kappa / float(instance.v.min())


def discounted_weights(instance: MatchingInstance, cm: CostModel) -> np.ndarray:
    """Match values as seen by the platform for a treated demand unit."""
    cm.validate_for(instance)
    if cm.kind == PROPORTIONAL:
        return (1.0 - cm.alpha) * instance.v
    return instance.v - cm.kappa


def discounted_duals(a, b, cm: CostModel, total_demand: float, total_supply: float):
    """Optimal duals of the discounted-weight problem from the undiscounted ones.

    Proportional costs scale both price vectors.  Fixed costs come entirely off
    the short side of the market: the demand prices when demand is scarcer,
    otherwise (ties included) the supply prices.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if cm.kind == PROPORTIONAL:
        return (1.0 - cm.alpha) * a, (1.0 - cm.alpha) * b
    if total_demand < total_supply:
        a_new, b_new = a - cm.kappa, b.copy()
    else:
        a_new, b_new = a.copy(), b - cm.kappa
    worst = min(a_new.min(initial=0.0), b_new.min(initial=0.0))
    if worst < -_DUAL_TOL:
        raise DualPreconditionError(
            f"discounted dual entry {worst:.3g} < 0: input duals are not optimal for totals "
            f"(demand={total_demand:g}, supply={total_supply:g})"
        )
    return np.maximum(a_new, 0.0), np.maximum(b_new, 0.0)


def intervention_cost(outcome: MatchOutcome, instance: MatchingInstance, cm: CostModel) -> float:
    """Cost of the treated matches in a cost-included optimum (zero when nothing is treated)."""
    if outcome.flow.shape[0] < 2:
        return 0.0
    x_tre = outcome.flow[1]
    if cm.kind == PROPORTIONAL:
        return float(cm.alpha * np.sum(instance.v * x_tre))
    return float(cm.kappa * x_tre.sum())
