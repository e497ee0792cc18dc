"""Arrival rates, Poisson marketplace draws and experiment states.

Every draw is keyed by ``(seed, *key, stream)`` through a counter-based
Philox generator, so a replication's random numbers do not depend on which
worker runs it or in what order.  Counts are produced by Poisson quantile
inversion of per-coordinate uniforms; reusing the same uniforms at different
rates gives monotonically coupled draws (common random numbers).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import poisson

# uniform streams per replication
STREAM_CON = 0
STREAM_TRE = 1
STREAM_SUPPLY = 2


class ConfigError(ValueError):
    """Experiment configuration outside its admissible range."""


def _frozen(x, name: str, positive: bool = False) -> np.ndarray:
    arr = np.array(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} must be finite")
    if np.any(arr < 0) or (positive and np.any(arr <= 0)):
        raise ConfigError(f"{name} must be {'positive' if positive else 'non-negative'}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Rates:
    """Fluid arrival rates: control demand ``lam``, treatment uplift ``beta``, supply ``gamma``."""

    lam: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        # zero control demand is admitted: the one-type tightness construction uses it
        object.__setattr__(self, "lam", _frozen(self.lam, "lam"))
        object.__setattr__(self, "beta", _frozen(self.beta, "beta"))
        object.__setattr__(self, "gamma", _frozen(self.gamma, "gamma", positive=True))
        if self.lam.shape != self.beta.shape:
            raise ConfigError("lam and beta must have the same length")

    @property
    def total_supply(self) -> float:
        return float(self.gamma.sum())

    @property
    def treated(self) -> np.ndarray:
        return self.lam + self.beta

    def with_gamma(self, gamma) -> Rates:
        return Rates(self.lam, self.beta, gamma)

    def scaled_supply(self, total: float) -> Rates:
        """Same supply profile rescaled so that the total equals ``total``."""
        return self.with_gamma(self.gamma * (total / self.total_supply))

    def experiment_demand(self, rho: float) -> tuple[np.ndarray, np.ndarray]:
        """Fluid (control, treated) demand when a fraction ``rho`` is treated."""
        return (1.0 - rho) * self.lam, rho * self.treated

    def __eq__(self, other):
        return isinstance(other, Rates) and all(
            np.array_equal(getattr(self, k), getattr(other, k)) for k in ("lam", "beta", "gamma")
        )

    __hash__ = None


@dataclass(frozen=True)
class ExperimentConfig:
    rho: float
    tau: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigError(f"rho must lie in [0, 1], got {self.rho}")
        if not self.tau > 0.0:
            raise ConfigError(f"tau must be positive, got {self.tau}")

    def require_interior(self):
        if not 0.0 < self.rho < 1.0:
            raise ConfigError(f"estimator needs both groups non-empty in expectation: rho={self.rho}")


@dataclass(frozen=True, eq=False)
class SampledState:
    d_con: np.ndarray
    d_tre: np.ndarray
    s: np.ndarray
    seed: int = 0
    key: tuple = field(default=())

    @property
    def d_exp(self) -> np.ndarray:
        return self.d_con + self.d_tre

    @property
    def empty_group(self) -> bool:
        return bool(self.d_con.sum() == 0 or self.d_tre.sum() == 0)

    def __eq__(self, other):
        return isinstance(other, SampledState) and all(
            np.array_equal(getattr(self, k), getattr(other, k)) for k in ("d_con", "d_tre", "s")
        )

    __hash__ = None


def uniforms(seed: int, key: tuple, stream: int, size: int) -> np.ndarray:
    """Deterministic U(0,1) vector for one (seed, key, stream) coordinate."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key) + (int(stream),))
    return np.random.Generator(np.random.Philox(ss)).random(size)


def poisson_counts(u: np.ndarray, mean: np.ndarray) -> np.ndarray:
    """Poisson(mean) counts by exact quantile inversion of the uniforms ``u``."""
    mean = np.asarray(mean, dtype=float)
    counts = poisson.ppf(u, mean)
    counts = np.where(mean > 0, counts, 0.0)
    return counts.astype(np.int64)


def sample_state(rates: Rates, cfg: ExperimentConfig, seed: int, key: tuple = ()) -> SampledState:
    """One experiment draw: treated, control and supply counts at density ``cfg.tau``."""
    n_d, n_s = len(rates.lam), len(rates.gamma)
    mean_con, mean_tre = (cfg.tau * m for m in rates.experiment_demand(cfg.rho))
    d_con = poisson_counts(uniforms(seed, key, STREAM_CON, n_d), mean_con)
    d_tre = poisson_counts(uniforms(seed, key, STREAM_TRE, n_d), mean_tre)
    s = poisson_counts(uniforms(seed, key, STREAM_SUPPLY, n_s), cfg.tau * rates.gamma)
    return SampledState(d_con, d_tre, s, seed=int(seed), key=tuple(key))


def sample_global_states(rates: Rates, tau: float, seed: int, key: tuple = ()):
    """Global-control demand, global-treatment demand and supply sharing the state's uniforms.

    The draws reuse the control, treated and supply streams of
    :func:`sample_state` under the same key, so the ground-truth pair is
    coupled with the experiment state drawn for that replication.
    """
    n_d, n_s = len(rates.lam), len(rates.gamma)
    d_control = poisson_counts(uniforms(seed, key, STREAM_CON, n_d), tau * rates.lam)
    d_treated = poisson_counts(uniforms(seed, key, STREAM_TRE, n_d), tau * rates.treated)
    s = poisson_counts(uniforms(seed, key, STREAM_SUPPLY, n_s), tau * rates.gamma)
    return d_control, d_treated, s


def split_ce_flows(flow: np.ndarray, d_con, d_tre) -> tuple[np.ndarray, np.ndarray]:
    """Attribute pooled flows to control and treated units in proportion to their counts.

    Rows with no demand carry no flow; both shares are zero there.
    """
    flow = np.asarray(flow, dtype=float)
    if flow.ndim == 3:
        flow = flow[0]
    d_con = np.asarray(d_con, dtype=float)
    d_exp = d_con + np.asarray(d_tre, dtype=float)
    share = np.divide(d_con, d_exp, out=np.zeros_like(d_exp), where=d_exp > 0)
    x_con = share[:, None] * flow
    return x_con, flow - x_con
