import numpy as np
import pytest
from scipy.stats import poisson

from matchlab.market import (
    ConfigError,
    ExperimentConfig,
    Rates,
    poisson_counts,
    sample_global_states,
    sample_state,
    split_ce_flows,
    uniforms,
)

RATES = Rates(lam=np.full(3, 13.0), beta=np.full(3, 3.0), gamma=np.full(4, 10.0))


def test_rates_validation_and_accessors():
    with pytest.raises(ConfigError):
        Rates([1.0], [-1.0], [1.0])
    with pytest.raises(ConfigError):
        Rates([1.0], [1.0], [0.0])
    assert RATES.total_supply == 40.0
    np.testing.assert_array_equal(RATES.treated, np.full(3, 16.0))
    assert RATES.scaled_supply(20.0).total_supply == pytest.approx(20.0)
    con, tre = RATES.experiment_demand(0.25)
    np.testing.assert_allclose(con, 9.75)
    np.testing.assert_allclose(tre, 4.0)


def test_experiment_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(1.5)
    with pytest.raises(ConfigError):
        ExperimentConfig(0.5, tau=0.0)
    with pytest.raises(ConfigError):
        ExperimentConfig(0.0).require_interior()


def test_extreme_treatment_fractions():
    s0 = sample_state(RATES, ExperimentConfig(0.0), seed=1)
    s1 = sample_state(RATES, ExperimentConfig(1.0), seed=1)
    assert np.all(s0.d_tre == 0) and s0.empty_group
    assert np.all(s1.d_con == 0) and s1.empty_group


def test_control_count_mean():
    rho, n = 0.3, 10_000
    draws = np.array([sample_state(RATES, ExperimentConfig(rho), seed=k).d_con[0] for k in range(n)]) / (1 - rho)
    se = draws.std(ddof=1) / np.sqrt(n)
    assert abs(draws.mean() - 13.0) < 3 * se


def test_poisson_inversion_matches_quantiles():
    u = np.array([0.01, 0.5, 0.99, 0.999999])
    for mean in (0.5, 4.0, 29.0, 150.0, 1e4):
        np.testing.assert_array_equal(poisson_counts(u, np.full(4, mean)), poisson.ppf(u, mean).astype(int))
    assert np.all(poisson_counts(u, np.zeros(4)) == 0)


def test_sampling_is_reproducible_and_keyed():
    cfg = ExperimentConfig(0.4, tau=5.0)
    a = sample_state(RATES, cfg, seed=7, key=(1, 2))
    b = sample_state(RATES, cfg, seed=7, key=(1, 2))
    c = sample_state(RATES, cfg, seed=7, key=(1, 3))
    assert a == b
    assert a != c
    assert not np.array_equal(uniforms(7, (1,), 0, 5), uniforms(7, (1,), 1, 5))


def test_global_states_share_uniforms_with_experiment_state():
    # at rho -> 0 the control stream's rate equals the global-control rate
    d_control, d_treated, s = sample_global_states(RATES, 1.0, seed=3, key=(4,))
    state = sample_state(RATES, ExperimentConfig(0.0), seed=3, key=(4,))
    np.testing.assert_array_equal(d_control, state.d_con)
    np.testing.assert_array_equal(s, state.s)
    assert np.all(d_treated >= d_control)  # same uniforms, larger rate


def test_split_examples():
    x_con, x_tre = split_ce_flows(np.array([[3.0]]), [2], [2])
    np.testing.assert_allclose(x_con, [[1.5]])
    np.testing.assert_allclose(x_tre, [[1.5]])
    flow = np.array([[1.0, 2.0]])
    x_con, x_tre = split_ce_flows(flow, [3], [0])
    np.testing.assert_array_equal(x_con, flow)
    np.testing.assert_array_equal(x_tre, 0.0)
    x_con, x_tre = split_ce_flows(np.array([[2.0]]), [1], [3])
    np.testing.assert_allclose(x_con, [[0.5]])
    np.testing.assert_allclose(x_tre, [[1.5]])


def test_split_conserves_flow_and_handles_empty_rows():
    rng = np.random.default_rng(0)
    flow = rng.uniform(0, 2, (4, 3))
    flow[2] = 0.0
    d_con, d_tre = np.array([1, 0, 0, 5]), np.array([2, 4, 0, 1])
    x_con, x_tre = split_ce_flows(flow, d_con, d_tre)
    np.testing.assert_allclose(x_con + x_tre, flow, rtol=0, atol=1e-15)
    assert np.all(x_con[2] == 0) and np.all(x_tre[2] == 0)
