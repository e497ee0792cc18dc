"""Instance generators: random geometric markets and small hand-built cases."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from matchlab.costs import CostModel
from matchlab.lp import MatchingInstance
from matchlab.market import Rates

LAMBDA_LEVEL = 13.0
BETA_LEVEL = 3.0
KAPPA_FRACTIONS = (0.1, 0.3, 0.5)


@dataclass(frozen=True)
class GeometricSpec:
    n_d: int = 10
    n_s: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.n_d < 1 or self.n_s < 1:
            raise ValueError("n_d and n_s must be at least 1")


def values_from_locations(demand_xy: np.ndarray, supply_xy: np.ndarray) -> np.ndarray:
    """Match value decays exponentially with Euclidean distance."""
    diff = np.asarray(demand_xy, dtype=float)[:, None, :] - np.asarray(supply_xy, dtype=float)[None, :, :]
    return np.exp(-np.sqrt(np.sum(diff**2, axis=-1)))


def gen_geometric(spec: GeometricSpec) -> MatchingInstance:
    """Demand and supply types at uniform random points of the unit square.

    The first ``n_d`` sampled points are demand locations, the remaining
    ``n_s`` supply locations.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(spec.seed))))
    pts = rng.random((spec.n_d + spec.n_s, 2))
    demand_xy, supply_xy = pts[: spec.n_d], pts[spec.n_d :]
    meta = {
        "seed": int(spec.seed),
        "locations": {"demand": demand_xy.tolist(), "supply": supply_xy.tolist()},
    }
    return MatchingInstance(values_from_locations(demand_xy, supply_xy), meta=meta)


def default_rates(instance: MatchingInstance, gamma_ratio: float, lambda_level: float = LAMBDA_LEVEL,
                  beta_level: float = BETA_LEVEL) -> Rates:
    """Equal demand rates per type, equal supply rates at ``gamma_ratio`` times the demand level."""
    if not gamma_ratio > 0:
        raise ValueError(f"gamma_ratio must be positive, got {gamma_ratio}")
    return Rates(
        lam=np.full(instance.n_d, float(lambda_level)),
        beta=np.full(instance.n_d, float(beta_level)),
        gamma=np.full(instance.n_s, gamma_ratio * lambda_level),
    )


PEDAGOGICAL_ALPHA = 0.15
PEDAGOGICAL_RHO = 0.5


def pedagogical_instance() -> tuple[MatchingInstance, dict[str, Rates]]:
    """One demand type facing three supply types worth 2, 1 and 0.25.

    Presets ``"a"`` (lam=1, beta=3) and ``"b"`` (lam=3, beta=2) share the
    supply rates (1.5, 2, 2); both are studied with a 15% proportional discount.
    """
    inst = MatchingInstance(np.array([[2.0, 1.0, 0.25]]), meta={"name": "pedagogical"})
    gamma = [1.5, 2.0, 2.0]
    presets = {
        "a": Rates(lam=[1.0], beta=[3.0], gamma=gamma),
        "b": Rates(lam=[3.0], beta=[2.0], gamma=gamma),
    }
    return inst, presets


def pedagogical_cost() -> CostModel:
    return CostModel.proportional(PEDAGOGICAL_ALPHA)


def fixed_kappa_levels(instance: MatchingInstance, fractions=KAPPA_FRACTIONS) -> list[float]:
    """Fixed costs at 10%, 30% and 50% of the smallest match value."""
    vmin = float(instance.v.min())
    return [f * vmin for f in fractions]


def tightness_instance(alpha: float) -> tuple[MatchingInstance, Rates]:
    """One-by-one market on which the shadow-price threshold in rho is tight.

    No baseline demand, unit uplift, unit value and supply (1-alpha)/(2-alpha).
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    gamma = (1.0 - alpha) / (2.0 - alpha)
    return MatchingInstance(np.array([[1.0]]), meta={"name": "tightness"}), Rates([0.0], [1.0], [gamma])


def instance_to_json(instance: MatchingInstance) -> dict:
    return {
        "n_d": instance.n_d,
        "n_s": instance.n_s,
        "v": instance.v.tolist(),
        "meta": {"seed": instance.meta.get("seed"), "locations": instance.meta.get("locations")},
    }


def instance_from_json(doc: dict) -> MatchingInstance:
    v = np.asarray(doc["v"], dtype=float)
    if v.ndim == 1:
        v = v.reshape(int(doc["n_d"]), int(doc["n_s"]))
    if v.shape != (int(doc["n_d"]), int(doc["n_s"])):
        raise ValueError(f"v has shape {v.shape}, expected ({doc['n_d']}, {doc['n_s']})")
    return MatchingInstance(v, meta=dict(doc.get("meta") or {}))
