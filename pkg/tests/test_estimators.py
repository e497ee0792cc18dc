import numpy as np
import pytest

from matchlab.costs import CostModel
from matchlab.estimators import (
    ALL_KINDS,
    FLUID,
    EstimateRecord,
    EstimatorKind as K,
    estimate_all,
    estimate_fluid,
    estimate_rct_ce,
    estimate_rct_ci,
    estimate_sb,
    estimate_sp_ce,
    estimate_sp_ci,
    fluid_evaluation,
    gte_finite_mc,
    gte_fluid,
    phi_ce,
)
from matchlab.instances import GeometricSpec, default_rates, gen_geometric
from matchlab.lp import solve_weights
from matchlab.market import ExperimentConfig, Rates, SampledState, sample_state
from matchlab.theorems import corollary_sp_ce

EXACT = 1e-9


def test_pedagogical_a_panel(pedagogical):
    inst, presets, cm = pedagogical
    ev = fluid_evaluation(inst, presets["a"], cm, 0.5)
    assert ev.gte == pytest.approx(2.35625, abs=EXACT)
    expected = {K.RCT_CE: 3.84, K.RCT_CI: 3.1, K.SP_CE: 2.175, K.SP_CI: 2.25, K.SB: 2.35625}
    for kind, value in expected.items():
        assert ev.values[kind] == pytest.approx(value, abs=EXACT), kind


def test_pedagogical_b_panel(pedagogical):
    inst, presets, cm = pedagogical
    rates = presets["b"]
    assert gte_fluid(inst, rates, cm) == pytest.approx(0.06875, abs=EXACT)
    assert estimate_fluid(K.RCT_CI, inst, rates, cm, 0.5) == pytest.approx(-2.3875, abs=EXACT)
    assert estimate_fluid(K.SP_CI, inst, rates, cm, 0.5) == pytest.approx(-0.025, abs=EXACT)
    assert fluid_evaluation(inst, rates, cm, 0.5).degenerate_ci


def test_gte_is_scaled_ce_difference_for_proportional_costs(pedagogical):
    inst, presets, cm = pedagogical
    rates = presets["a"]
    manual = 0.85 * phi_ce(inst, [4.0], rates.gamma).objective - phi_ce(inst, [1.0], rates.gamma).objective
    assert gte_fluid(inst, rates, cm) == pytest.approx(manual, abs=EXACT)


def test_null_treatment(geometric_case):
    inst, rates, _ = geometric_case
    null = Rates(rates.lam, np.zeros(inst.n_d), rates.gamma)
    assert gte_fluid(inst, null, CostModel.proportional(0.0)) == pytest.approx(0.0, abs=EXACT)
    cm = CostModel.proportional(0.2)
    out = phi_ce(inst, rates.lam, rates.gamma)
    # null uplift with a cost: lose the cost of the (re-optimised) cost-included matching
    treated = solve_weights(0.8 * inst.v, rates.lam, rates.gamma).objective
    assert gte_fluid(inst, null, cm) == pytest.approx(treated - out.objective, abs=EXACT)


def test_sb_fluid_equals_gte(geometric_case):
    inst, rates, cm = geometric_case
    for rho in (0.1, 0.5, 0.9):
        assert abs(estimate_fluid(K.SB, inst, rates, cm, rho) - gte_fluid(inst, rates, cm)) <= EXACT


def test_sp_ce_zero_cost_reduces_to_undiscounted_prices(geometric_case):
    inst, rates, _ = geometric_case
    cm = CostModel.proportional(0.0)
    rho = 0.3
    d_exp = sum(rates.experiment_demand(rho))
    a = phi_ce(inst, d_exp, rates.gamma).a
    assert estimate_fluid(K.SP_CE, inst, rates, cm, rho) == pytest.approx(a @ rates.beta, abs=EXACT)


@pytest.mark.parametrize("gamma_ratio", [0.5, 1.0, 2.0])
def test_sp_ce_fixed_cost_matches_closed_form(gamma_ratio):
    inst = gen_geometric(GeometricSpec(5, 5, seed=9))
    rates = default_rates(inst, gamma_ratio)
    cm = CostModel.fixed(0.3 * inst.v.min())
    for rho in (0.2, 0.5):
        assert estimate_fluid(K.SP_CE, inst, rates, cm, rho) == pytest.approx(
            corollary_sp_ce(inst, rates, cm, rho), abs=EXACT)


def test_sp_ci_zero_when_all_prices_zero():
    # deep undersupply: every CI demand price is zero
    inst = gen_geometric(GeometricSpec(3, 3, seed=1))
    rates = Rates(np.full(3, 10.0), np.full(3, 2.0), np.full(3, 0.5))
    assert estimate_fluid(K.SP_CI, inst, rates, CostModel.proportional(0.1), 0.5) == pytest.approx(0.0, abs=EXACT)


def test_rct_ce_overestimates_on_random_instances():
    for seed in range(10):
        inst = gen_geometric(GeometricSpec(6, 6, seed=seed))
        rates = default_rates(inst, 0.3 + 0.3 * seed)
        for cm in (CostModel.proportional(0.1), CostModel.fixed(0.3 * inst.v.min())):
            for rho in (0.1, 0.5):
                ev = fluid_evaluation(inst, rates, cm, rho, kinds=(K.RCT_CE,))
                assert ev.bias(K.RCT_CE) >= -EXACT


def test_record_bias_is_exact():
    rec = EstimateRecord(K.SB, 1.25, 0.5, FLUID)
    assert rec.bias == 0.75
    assert EstimateRecord(K.RCT_CE, 0.1, 0.3, FLUID).bias == 0.1 - 0.3


# --- finite-sample estimators ------------------------------------------------


def _state(d_con, d_tre, s):
    return SampledState(np.array(d_con), np.array(d_tre), np.array(s))


def test_finite_estimators_on_fluid_rates_equal_fluid_forms(pedagogical):
    inst, presets, cm = pedagogical
    rates = presets["a"]
    cfg = ExperimentConfig(0.5, tau=1.0)
    d_con, d_tre = rates.experiment_demand(0.5)
    state = _state(d_con, d_tre, rates.gamma)
    ev = fluid_evaluation(inst, rates, cm, 0.5)
    assert estimate_rct_ce(state, inst, cm, cfg) == pytest.approx(ev.values[K.RCT_CE], abs=EXACT)
    assert estimate_rct_ci(state, inst, cm, cfg) == pytest.approx(ev.values[K.RCT_CI], abs=EXACT)
    assert estimate_sp_ce(state, inst, cm, cfg) == pytest.approx(ev.values[K.SP_CE], abs=EXACT)
    assert estimate_sp_ci(state, inst, cm, cfg) == pytest.approx(ev.values[K.SP_CI], abs=EXACT)
    assert estimate_sb(state, inst, cm, cfg) == pytest.approx(ev.gte, abs=EXACT)


def test_finite_estimators_scale_with_density(pedagogical):
    inst, presets, cm = pedagogical
    rates = presets["a"]
    d_con, d_tre = rates.experiment_demand(0.5)
    small = estimate_all(_state(d_con, d_tre, rates.gamma), inst, cm, ExperimentConfig(0.5, 1.0))
    large = estimate_all(_state(10 * d_con, 10 * d_tre, 10 * rates.gamma), inst, cm, ExperimentConfig(0.5, 10.0))
    for kind in ALL_KINDS:
        assert large.values[kind] == pytest.approx(small.values[kind], abs=EXACT)


def test_empty_treated_group(pedagogical):
    inst, _, cm = pedagogical
    rho, tau = 0.5, 1.0
    state = _state([3], [0], [1.5, 2.0, 2.0])
    est = estimate_all(state, inst, cm, ExperimentConfig(rho, tau))
    assert est.empty_group
    control_value = phi_ce(inst, [3], [1.5, 2.0, 2.0]).objective
    assert est.values[K.RCT_CE] == pytest.approx(-control_value / (1 - rho) / tau, abs=EXACT)
    assert est.values[K.RCT_CI] == pytest.approx(-control_value / (1 - rho) / tau, abs=EXACT)


def test_estimators_need_interior_rho(pedagogical):
    inst, _, cm = pedagogical
    with pytest.raises(ValueError):
        estimate_rct_ce(_state([1], [1], [1.5, 2, 2]), inst, cm, ExperimentConfig(0.0))
    with pytest.raises(ValueError):
        fluid_evaluation(inst, Rates([1.0], [1.0], [1.0, 1.0, 1.0]), cm, 1.0)


def test_gte_monte_carlo(pedagogical):
    inst, presets, cm = pedagogical
    mean, se = gte_finite_mc(inst, presets["a"], cm, tau=1e4, n_draws=30, seed=0)
    assert abs(mean - 2.35625) < 3 * se
    null = Rates([1.0], [0.0], presets["a"].gamma)
    mean, se = gte_finite_mc(inst, null, CostModel.proportional(0.0), tau=50.0, n_draws=20, seed=0)
    assert abs(mean) < 3 * se
    mean, se = gte_finite_mc(inst, presets["a"], cm, tau=50.0, n_draws=2, seed=1)
    assert np.isfinite(se) and se > 0


def test_no_op_treatment_concentrates_near_zero(pedagogical):
    inst, presets, _ = pedagogical
    cm = CostModel.proportional(0.0)
    null = Rates([1.0], [0.0], presets["a"].gamma)
    cfg = ExperimentConfig(0.5, tau=1e4)
    vals = [estimate_rct_ce(sample_state(null, cfg, seed=0, key=(k,)), inst, cm, cfg) for k in range(30)]
    assert abs(np.mean(vals)) < 3 * np.std(vals, ddof=1) / np.sqrt(len(vals)) + 1e-12
