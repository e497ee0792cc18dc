"""Global treatment effect and its five experimental estimators.

Each estimator has a finite-sample form, evaluated on a Poisson experiment
state, and a fluid-limit form, evaluated exactly at the arrival rates.  The
fluid forms are written in terms of average match values, match rates and
shadow prices rather than by plugging rates into the finite-sample formulas,
so the two code paths check each other.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from matchlab.costs import (
    FIXED,
    CostModel,
    DualPreconditionError,
    discounted_duals,
    discounted_weights,
    intervention_cost,
)
from matchlab.fluid import CE_PATH, CI_PATH, LEFT, duals_at
from matchlab.lp import CeProblem, CiProblem, MatchingInstance, MatchOutcome, solve_ce, solve_ci, solve_weights
from matchlab.market import ExperimentConfig, Rates, SampledState, sample_global_states

REMARK_TOL = 1e-9


class EstimatorKind(str, enum.Enum):
    RCT_CE = "RCT_CE"
    RCT_CI = "RCT_CI"
    SP_CE = "SP_CE"
    SP_CI = "SP_CI"
    SB = "SB"


ALL_KINDS = tuple(EstimatorKind)

FLUID = "fluid"
FINITE = "finite"


@dataclass(frozen=True)
class EstimateRecord:
    kind: EstimatorKind
    value: float
    gte: float
    regime: str = FLUID
    rho: float = float("nan")
    tau: float = float("nan")
    cost_model: str = ""
    gamma_ratio: float = float("nan")
    instance_id: int = -1
    seed: int = -1
    bias: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "bias", self.value - self.gte)


# ---------------------------------------------------------------------------
# value functions


def phi_ce(instance: MatchingInstance, d, s) -> MatchOutcome:
    return solve_ce(CeProblem(instance, d, s))


def phi_ci(instance: MatchingInstance, d_con, d_tre, s, cm: CostModel) -> MatchOutcome:
    return solve_ci(CiProblem(instance, d_con, d_tre, s, cm))


def _global_difference(instance, d_control, d_treated, s, cm) -> float:
    zeros = np.zeros(instance.n_d)
    treated = phi_ci(instance, zeros, d_treated, s, cm)
    control = phi_ci(instance, d_control, zeros, s, cm)
    return treated.objective - control.objective


def gte_fluid(instance: MatchingInstance, rates: Rates, cm: CostModel) -> float:
    """Fluid global treatment effect: everyone treated minus no one treated.

    Also evaluates the equivalent cost-excluded form (value minus intervention
    cost) and raises if the two disagree.
    """
    zeros = np.zeros(instance.n_d)
    treated = phi_ci(instance, zeros, rates.treated, rates.gamma, cm)
    control = phi_ci(instance, rates.lam, zeros, rates.gamma, cm)
    delta = treated.objective - control.objective
    alt = (
        phi_ce(instance, rates.treated, rates.gamma).objective
        - intervention_cost(treated, instance, cm)
        - phi_ce(instance, rates.lam, rates.gamma).objective
    )
    if abs(alt - delta) > REMARK_TOL * max(1.0, abs(delta)):
        raise ArithmeticError(f"treatment-effect forms disagree: {delta!r} vs {alt!r}")
    return delta


def gte_finite_mc(instance: MatchingInstance, rates: Rates, cm: CostModel, tau: float, n_draws: int,
                  seed: int) -> tuple[float, float]:
    """Monte Carlo finite-market treatment effect per unit density, with its standard error.

    Each draw shares its supply sample between the all-treated and
    all-control markets.
    """
    if n_draws < 2:
        raise ValueError("n_draws must be at least 2")
    draws = np.empty(n_draws)
    for k in range(n_draws):
        d_control, d_treated, s = sample_global_states(rates, tau, seed, key=(k,))
        draws[k] = _global_difference(instance, d_control, d_treated, s, cm) / tau
    return float(draws.mean()), float(draws.std(ddof=1) / np.sqrt(n_draws))


def gte_draw(instance: MatchingInstance, rates: Rates, cm: CostModel, tau: float, seed: int, key: tuple) -> float:
    """One finite-market treatment-effect draw coupled with the experiment state of the same key."""
    d_control, d_treated, s = sample_global_states(rates, tau, seed, key=key)
    return _global_difference(instance, d_control, d_treated, s, cm) / tau


# ---------------------------------------------------------------------------
# finite-sample estimators


def _ce_discounted_duals(instance, out: MatchOutcome, d_exp, s, cm: CostModel):
    try:
        return discounted_duals(out.a, out.b, cm, float(np.sum(d_exp)), float(np.sum(s)))
    except DualPreconditionError:
        # the closed form needs a suitable optimal dual; at balanced or
        # degenerate markets fall back to solving the discounted problem
        alt = solve_weights(discounted_weights(instance, cm), d_exp, s)
        return alt.a, alt.b


@dataclass
class _Shared:
    """Solves reused across estimators evaluated on one state."""

    instance: MatchingInstance
    state: SampledState
    cm: CostModel
    cfg: ExperimentConfig
    _ce: MatchOutcome | None = None
    _ci: MatchOutcome | None = None

    @property
    def ce(self) -> MatchOutcome:
        if self._ce is None:
            self._ce = phi_ce(self.instance, self.state.d_exp, self.state.s)
        return self._ce

    @property
    def ci(self) -> MatchOutcome:
        if self._ci is None:
            self._ci = phi_ci(self.instance, self.state.d_con, self.state.d_tre, self.state.s, self.cm)
        return self._ci


def _rct_ce(sh: _Shared) -> float:
    rho, tau = sh.cfg.rho, sh.cfg.tau
    x = sh.ce.x
    d_exp = sh.state.d_exp
    share = np.divide(sh.state.d_con, d_exp, out=np.zeros(len(d_exp)), where=d_exp > 0)
    x_con = share[:, None] * x
    x_tre = x - x_con
    v_tre = discounted_weights(sh.instance, sh.cm)
    return (np.sum(v_tre * x_tre) / rho - np.sum(sh.instance.v * x_con) / (1.0 - rho)) / tau


def _rct_ci(sh: _Shared) -> float:
    rho, tau = sh.cfg.rho, sh.cfg.tau
    v_tre = discounted_weights(sh.instance, sh.cm)
    out = sh.ci
    return (np.sum(v_tre * out.x_tre) / rho - np.sum(sh.instance.v * out.x_con) / (1.0 - rho)) / tau


def _sp_ce(sh: _Shared) -> float:
    rho, tau = sh.cfg.rho, sh.cfg.tau
    st = sh.state
    a, b = sh.ce.a, sh.ce.b
    a_t, b_t = _ce_discounted_duals(sh.instance, sh.ce, st.d_exp, st.s, sh.cm)
    treated = a_t @ st.d_tre / rho + b_t @ st.s
    control = a @ st.d_con / (1.0 - rho) + b @ st.s
    return (treated - control) / tau


def _sp_ci(sh: _Shared) -> float:
    rho, tau = sh.cfg.rho, sh.cfg.tau
    out = sh.ci
    return (out.a_tre @ sh.state.d_tre / rho - out.a_con @ sh.state.d_con / (1.0 - rho)) / tau


def _sb(sh: _Shared) -> float:
    rho, tau = sh.cfg.rho, sh.cfg.tau
    st = sh.state
    s = st.s / tau
    d_tre = st.d_tre / (tau * rho)
    d_con = st.d_con / (tau * (1.0 - rho))
    return _global_difference(sh.instance, d_con, d_tre, s, sh.cm)


_FINITE = {
    EstimatorKind.RCT_CE: _rct_ce,
    EstimatorKind.RCT_CI: _rct_ci,
    EstimatorKind.SP_CE: _sp_ce,
    EstimatorKind.SP_CI: _sp_ci,
    EstimatorKind.SB: _sb,
}


def _finite(kind, state, instance, cm, cfg) -> float:
    cfg.require_interior()
    return float(_FINITE[kind](_Shared(instance, state, cm, cfg)))


def estimate_rct_ce(state: SampledState, instance: MatchingInstance, cm: CostModel, cfg: ExperimentConfig) -> float:
    """Difference in per-unit realised value with pooled (cost-blind) matching, flows split by group size."""
    return _finite(EstimatorKind.RCT_CE, state, instance, cm, cfg)


def estimate_rct_ci(state: SampledState, instance: MatchingInstance, cm: CostModel, cfg: ExperimentConfig) -> float:
    """Difference in per-unit realised value when the matching sees treated units' discounted values."""
    return _finite(EstimatorKind.RCT_CI, state, instance, cm, cfg)


def estimate_sp_ce(state: SampledState, instance: MatchingInstance, cm: CostModel, cfg: ExperimentConfig) -> float:
    """Shadow-price estimator from the pooled match, with treated prices discounted in closed form."""
    return _finite(EstimatorKind.SP_CE, state, instance, cm, cfg)


def estimate_sp_ci(state: SampledState, instance: MatchingInstance, cm: CostModel, cfg: ExperimentConfig) -> float:
    """Shadow-price estimator from the group-wise demand prices of the cost-included match."""
    return _finite(EstimatorKind.SP_CI, state, instance, cm, cfg)


def estimate_sb(state: SampledState, instance: MatchingInstance, cm: CostModel, cfg: ExperimentConfig) -> float:
    """Re-solve the market with each group's demand scaled up to the whole population."""
    return _finite(EstimatorKind.SB, state, instance, cm, cfg)


@dataclass(frozen=True)
class StateEstimates:
    values: dict
    degenerate: bool
    empty_group: bool


def estimate_all(state: SampledState, instance: MatchingInstance, cm: CostModel, cfg: ExperimentConfig,
                 kinds=ALL_KINDS) -> StateEstimates:
    """All requested estimators on one state, sharing the pooled and cost-included solves."""
    cfg.require_interior()
    sh = _Shared(instance, state, cm, cfg)
    values = {k: float(_FINITE[k](sh)) for k in kinds}
    degenerate = any(o is not None and o.degenerate for o in (sh._ce, sh._ci))
    return StateEstimates(values, degenerate, state.empty_group)


# ---------------------------------------------------------------------------
# fluid forms


@dataclass(frozen=True)
class FluidEvaluation:
    """Fluid estimator values for one (instance, rates, cost, rho) point."""

    values: dict
    gte: float
    degenerate_ce: bool
    degenerate_ci: bool

    def bias(self, kind: EstimatorKind) -> float:
        return self.values[kind] - self.gte

    def record(self, kind: EstimatorKind, rho: float, cm: CostModel, **echo) -> EstimateRecord:
        return EstimateRecord(kind, self.values[kind], self.gte, FLUID, rho=rho, cost_model=cm.label, **echo)


def _per_unit(total: np.ndarray, rate: np.ndarray) -> np.ndarray:
    return np.divide(total, rate, out=np.zeros_like(total), where=rate > 0)


def fluid_evaluation(instance: MatchingInstance, rates: Rates, cm: CostModel, rho: float,
                     kinds=ALL_KINDS, gte: float | None = None) -> FluidEvaluation:
    """Fluid-limit estimator values at the experiment point with treatment fraction ``rho``.

    If the experiment-point optimum is degenerate, shadow prices are the
    left-limit ones along the experiment path.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError(f"fluid estimators need 0 < rho < 1, got {rho}")
    kinds = tuple(kinds)
    lam, _beta, gamma = rates.lam, rates.beta, rates.gamma
    treated = rates.treated
    d_con, d_tre = rates.experiment_demand(rho)
    d_exp = d_con + d_tre
    v = instance.v
    v_tre = discounted_weights(instance, cm)
    if gte is None:
        gte = gte_fluid(instance, rates, cm)
    values = {}
    deg_ce = deg_ci = False

    if EstimatorKind.RCT_CE in kinds or EstimatorKind.SP_CE in kinds:
        ce = phi_ce(instance, d_exp, gamma)
        deg_ce = ce.degenerate
        if EstimatorKind.RCT_CE in kinds:
            v_bar = _per_unit(np.sum(v * ce.x, axis=1), d_exp)
            if cm.kind == FIXED:
                x_bar = _per_unit(ce.x.sum(axis=1), d_exp)
                treated_value = (v_bar - cm.kappa * x_bar) @ treated
            else:
                treated_value = (1.0 - cm.alpha) * v_bar @ treated
            values[EstimatorKind.RCT_CE] = float(treated_value - v_bar @ lam)
        if EstimatorKind.SP_CE in kinds:
            duals = duals_at(instance, rates, cm, rho, LEFT, CE_PATH).outcome if deg_ce else ce
            a, b = duals.a, duals.b
            a_t, b_t = _ce_discounted_duals(instance, duals, d_exp, gamma, cm)
            values[EstimatorKind.SP_CE] = float((a_t @ treated + b_t @ gamma) - (a @ lam + b @ gamma))

    if EstimatorKind.RCT_CI in kinds or EstimatorKind.SP_CI in kinds:
        ci = phi_ci(instance, d_con, d_tre, gamma, cm)
        deg_ci = ci.degenerate
        if EstimatorKind.RCT_CI in kinds:
            v_bar_tre = _per_unit(np.sum(v_tre * ci.x_tre, axis=1), d_tre)
            v_bar_con = _per_unit(np.sum(v * ci.x_con, axis=1), d_con)
            values[EstimatorKind.RCT_CI] = float(v_bar_tre @ treated - v_bar_con @ lam)
        if EstimatorKind.SP_CI in kinds:
            duals = duals_at(instance, rates, cm, rho, LEFT, CI_PATH).outcome if deg_ci else ci
            values[EstimatorKind.SP_CI] = float(duals.a_tre @ treated - duals.a_con @ lam)

    if EstimatorKind.SB in kinds:
        values[EstimatorKind.SB] = _global_difference(instance, d_con / (1.0 - rho), d_tre / rho, gamma, cm)

    return FluidEvaluation(values, float(gte), deg_ce, deg_ci)


def estimate_fluid(kind: EstimatorKind, instance: MatchingInstance, rates: Rates, cm: CostModel, rho: float) -> float:
    """Fluid-limit value of one estimator."""
    kind = EstimatorKind(kind)
    return fluid_evaluation(instance, rates, cm, rho, kinds=(kind,), gte=0.0).values[kind]
