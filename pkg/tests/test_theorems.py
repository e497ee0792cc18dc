import numpy as np
import pytest

from matchlab import theorems as thm
from matchlab.costs import CostModel
from matchlab.estimators import EstimatorKind as K, fluid_evaluation
from matchlab.instances import GeometricSpec, default_rates, fixed_kappa_levels, gen_geometric, tightness_instance
from matchlab.lp import MatchingInstance
from matchlab.market import Rates

REL = 1e-9


def test_report_is_pure_function_of_witnesses():
    rep = thm.TheoremReport("t", "x")
    rep.check("a <= b", 1.0, "<=", 2.0)
    assert rep.holds and rep.failures == []
    rep.check("a > b", 1.0, ">", 2.0)
    assert not rep.holds and [c.name for c in rep.failures] == ["a > b"]
    d = rep.as_dict()
    assert d["holds"] is False and d["witnesses"][1]["lhs"] == 1.0


# --- cost-included RCT regimes -------------------------------------------------


def test_low_supply_relative_bias_closed_form(pedagogical):
    inst, presets, _ = pedagogical
    cm = CostModel.proportional(0.15)
    rep = thm.check_thm_rct_ci_regimes(inst, presets["a"], cm, 0.5)
    assert rep.holds, rep.failures
    assert rep.values["relative_bias"] == pytest.approx(1 - 1 / (0.15 * 0.5), rel=REL)
    assert rep.values["relative_bias"] == pytest.approx(-12.333333333333, rel=1e-12)


def test_relative_bias_diverges_as_cost_vanishes(pedagogical):
    inst, presets, _ = pedagogical
    low = thm.low_supply_rates(presets["a"], 0.5)
    ladder = []
    for alpha in (0.1, 0.01, 0.001):
        ev = fluid_evaluation(inst, low, CostModel.proportional(alpha), 0.5, kinds=(K.RCT_CI,))
        ladder.append(ev.bias(K.RCT_CI) / abs(ev.gte))
    assert ladder[0] > ladder[1] > ladder[2]
    assert ladder[2] < -1000


@pytest.mark.parametrize("seed", range(8))
def test_low_supply_bias_negative(seed):
    inst = gen_geometric(GeometricSpec(6, 6, seed=seed))
    rates = default_rates(inst, 1.0)
    for cm in (CostModel.proportional(0.1), CostModel.fixed(fixed_kappa_levels(inst)[1])):
        rep = thm.check_thm_rct_ci_regimes(inst, rates, cm, 0.3)
        assert rep.holds, rep.failures
        assert rep.values["rct_ci_bias_gamma_0"] > 0


def test_saturation_supply_examples(pedagogical):
    one = MatchingInstance(np.array([[1.0]]))
    assert thm.saturation_supply(one, Rates([0.0], [1.0], [0.3]), CostModel.proportional(0.1)) == pytest.approx(1.0, rel=REL)
    inst, presets, cm = pedagogical
    # supply type 0 holds 1.5/5.5 of total supply and must reach lam + beta = 4
    assert thm.saturation_supply(inst, presets["a"], cm) == pytest.approx(4 * 5.5 / 1.5, rel=REL)


def test_gamma_regimes(pedagogical):
    inst, presets, cm = pedagogical
    gamma_min, gamma_0 = thm.find_gamma_regimes(inst, presets["a"], cm, 0.5)
    assert gamma_min == pytest.approx(0.5)
    assert gamma_0 < 4 * 5.5 / 1.5
    ev = fluid_evaluation(inst, presets["a"].scaled_supply(gamma_0), cm, 0.5)
    assert ev.bias(K.RCT_CI) > 0
    assert ev.values[K.SP_CI] == pytest.approx(ev.values[K.RCT_CI], abs=1e-9)


# --- cost-excluded shadow prices ----------------------------------------------


def test_threshold_values(pedagogical):
    inst, _, _ = pedagogical
    assert thm.sp_ce_threshold(inst, CostModel.proportional(0.15)) == pytest.approx(0.85 / 1.85)
    assert thm.sp_ce_threshold(inst, CostModel.proportional(0.0)) == 0.5


def test_tightness_instance_values():
    inst, rates = tightness_instance(0.15)
    assert rates.gamma[0] == pytest.approx(0.459459459459, abs=1e-12)
    assert tightness_instance(0.0)[1].gamma[0] == 0.5
    row = thm.tightness_biases(CostModel.proportional(0.15), 0.6)
    assert row["gte"] == pytest.approx(0.85**2 / 1.85, abs=1e-12)


def test_tightness_report():
    rep = thm.check_sp_ce_tightness(CostModel.proportional(0.15))
    assert rep.holds, rep.failures
    assert len(rep.values["sp_ce_bias"]) == len(rep.values["rct_ce_bias"]) == 5
    assert rep.values["limit"] == pytest.approx(0.85 / 1.85)


def test_sp_ce_reduction_report_applicability(pedagogical):
    inst, presets, cm = pedagogical
    below = thm.check_thm_sp_ce_reduction(inst, presets["a"], cm, 0.3)
    above = thm.check_thm_sp_ce_reduction(inst, presets["a"], cm, 0.5)
    assert below.applicable and below.holds
    assert not above.applicable and above.witnesses == []


def test_bias_ratio_bound_cases(pedagogical):
    inst = gen_geometric(GeometricSpec(10, 10, seed=0))
    rep = thm.check_thm_bias_ratio_bound(inst, default_rates(inst, 0.7), CostModel.proportional(0.1), 0.3)
    assert rep.applicable and rep.holds
    assert "realized_ratio" in rep.values
    ped, presets, cm = pedagogical
    under = presets["a"].scaled_supply(2.0)
    num, den, applicable = thm.bias_ratio_bound(ped, under, cm, 0.3)
    assert applicable and np.isfinite(num / den)
    rep = thm.check_thm_bias_ratio_bound(ped, under, cm, 0.3)
    assert rep.holds


def test_equal_endpoint_prices_give_zero_numerator():
    inst = gen_geometric(GeometricSpec(4, 4, seed=2))
    rates = Rates(np.full(4, 1.0), np.full(4, 0.01), np.full(4, 50.0))  # ample supply
    a0, a1 = thm.endpoint_ce_duals(inst, rates, CostModel.proportional(0.1))
    np.testing.assert_allclose(a0, a1)
    num, _, _ = thm.bias_ratio_bound(inst, rates, CostModel.proportional(0.1), 0.3)
    assert num == pytest.approx(0.0, abs=1e-12)


# --- cost-included shadow prices -----------------------------------------------


def test_sp_ci_low_supply_ratio(pedagogical):
    inst, presets, _ = pedagogical
    rep = thm.check_thm_sp_ci(inst, presets["a"], CostModel.proportional(0.15), 0.5)
    assert rep.holds, rep.failures
    assert rep.values["ratio"] == pytest.approx(0.15 / 1.85, rel=1e-9)
    ladder = thm.check_thm_sp_ci(inst, presets["a"], CostModel.proportional(0.2), 0.5).values["ratio_ladder"]
    assert ladder[0] > ladder[1] > ladder[2]


# --- design unbiasedness -------------------------------------------------------


def test_no_interference_instance():
    inst = MatchingInstance(np.array([[2.0, 0.5], [0.5, 2.0]]))
    rates = Rates([1.0, 1.0], [1.0, 1.0], [5.0, 5.0])
    rep = thm.check_thm_design_unbiasedness(inst, rates, CostModel.proportional(0.1))
    assert rep.conditions["ci_structure"] and rep.conditions["ci_condition"]
    assert rep.holds
    assert max(abs(b) for b in rep.values["sp_ci_bias"]) <= 1e-9


def test_pedagogical_ce_condition_fails(pedagogical):
    inst, presets, cm = pedagogical
    a0, a1 = thm.endpoint_ce_duals(inst, presets["a"], cm)
    assert a0[0] == pytest.approx(2.0) and a1[0] == pytest.approx(0.25)
    rep = thm.check_thm_design_unbiasedness(inst, presets["a"], cm)
    assert not rep.conditions["ce_condition"] and rep.holds
    assert max(abs(b) for b in rep.values["sp_ce_bias"]) > 1e-9


def test_same_linear_piece_makes_sp_ce_unbiased(pedagogical):
    inst, _, cm = pedagogical
    rates = Rates([0.5], [0.5], [1.5, 2.0, 2.0])  # demand 0.5..1 stays on the first piece of the value curve
    rep = thm.check_thm_design_unbiasedness(inst, rates, cm)
    assert rep.conditions["ce_condition"] and rep.holds
    assert max(abs(b) for b in rep.values["sp_ce_bias"]) <= 1e-9


def test_top_supply_ties_are_rejected():
    with pytest.raises(thm.RegimeError):
        thm.top_supply(MatchingInstance(np.array([[1.0, 1.0]])))
