"""Fluid-limit value paths and directional shadow prices.

The experiment path interpolates between global control (eta = 0) and global
treatment (eta = 1).  Along the cost-included path control demand is
``(1 - eta) * lam`` and treated demand ``eta * (lam + beta)``; along the
cost-excluded path the pooled demand is ``lam + eta * beta``.  Both optimal
values are concave and piecewise linear in eta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from matchlab.costs import CostModel
from matchlab.lp import CeProblem, CiProblem, MatchingInstance, MatchOutcome, solve_ce, solve_ci
from matchlab.market import Rates

LEFT = "left"
RIGHT = "right"
CI_PATH = "ci"
CE_PATH = "ce"
EPS = 1e-7
KINK_TOL = 1e-6


def solve_on_path(instance: MatchingInstance, rates: Rates, cm: CostModel, eta: float, path: str = CI_PATH) -> MatchOutcome:
    if path == CI_PATH:
        return solve_ci(CiProblem(instance, (1.0 - eta) * rates.lam, eta * rates.treated, rates.gamma, cm))
    if path == CE_PATH:
        return solve_ce(CeProblem(instance, rates.lam + eta * rates.beta, rates.gamma))
    raise ValueError(f"unknown path {path!r}")


def path_slope(outcome: MatchOutcome, rates: Rates, path: str = CI_PATH) -> float:
    """Derivative of the path value implied by the outcome's demand prices."""
    if path == CI_PATH:
        return float(outcome.a_tre @ rates.treated - outcome.a_con @ rates.lam)
    return float(outcome.a @ rates.beta)


@dataclass(frozen=True)
class DirectionalDuals:
    """Shadow prices just to one side of a point on the experiment path."""

    eta: float
    side: str
    outcome: MatchOutcome
    slope: float
    clamped: bool = False  # the requested side fell outside [0, 1]

    @property
    def demand_duals(self) -> np.ndarray:
        return self.outcome.demand_duals

    @property
    def supply_duals(self) -> np.ndarray:
        return self.outcome.supply_duals


def duals_at(instance: MatchingInstance, rates: Rates, cm: CostModel, eta: float, side: str = LEFT,
             path: str = CI_PATH, eps: float = EPS) -> DirectionalDuals:
    """Duals of the path LP solved at ``eta - eps`` (left) or ``eta + eps`` (right).

    At a kink of the path value the two sides give the two one-sided
    derivatives; elsewhere they coincide.  A side that would leave [0, 1]
    is replaced by the other one and the result is marked ``clamped``.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    if side not in (LEFT, RIGHT):
        raise ValueError(f"side must be {LEFT!r} or {RIGHT!r}")
    clamped = False
    if side == LEFT and eta - eps < 0.0:
        side, clamped = RIGHT, True
    elif side == RIGHT and eta + eps > 1.0:
        side, clamped = LEFT, True
    at = eta - eps if side == LEFT else eta + eps
    out = solve_on_path(instance, rates, cm, at, path)
    return DirectionalDuals(eta=eta, side=side, outcome=out, slope=path_slope(out, rates, path), clamped=clamped)


@dataclass(frozen=True)
class PathProfile:
    etas: np.ndarray
    values: np.ndarray
    left_slopes: np.ndarray
    right_slopes: np.ndarray
    breakpoints: np.ndarray

    def integrated_slope(self) -> float:
        """Trapezoid integral of the path derivative (mean of one-sided slopes) over the grid."""
        mid = 0.5 * (self.left_slopes + self.right_slopes)
        return float(np.sum(0.5 * (mid[1:] + mid[:-1]) * np.diff(self.etas)))

    def max_concavity_violation(self) -> float:
        second = self.values[2:] - 2.0 * self.values[1:-1] + self.values[:-2]
        worst = max(float(second.max(initial=0.0)), float(np.max(self.right_slopes - self.left_slopes, initial=0.0)))
        return max(worst, 0.0)


def path_profile(instance: MatchingInstance, rates: Rates, cm: CostModel, grid_size: int = 101,
                 path: str = CI_PATH) -> PathProfile:
    """Path value and one-sided slopes on a uniform grid of ``grid_size`` points in [0, 1]."""
    if grid_size < 3:
        raise ValueError("grid_size must be at least 3")
    etas = np.linspace(0.0, 1.0, grid_size)
    values = np.empty(grid_size)
    left = np.empty(grid_size)
    right = np.empty(grid_size)
    for k, eta in enumerate(etas):
        values[k] = solve_on_path(instance, rates, cm, eta, path).objective
        left[k] = duals_at(instance, rates, cm, eta, LEFT, path).slope
        right[k] = duals_at(instance, rates, cm, eta, RIGHT, path).slope
    kinks = np.abs(left - right) > KINK_TOL * (1.0 + np.maximum(np.abs(left), np.abs(right)))
    return PathProfile(etas, values, left, right, etas[kinks])


def _slopes_differ(s1: float, s2: float) -> bool:
    return abs(s1 - s2) > KINK_TOL * (1.0 + max(abs(s1), abs(s2)))


def integrate_slope(instance: MatchingInstance, rates: Rates, cm: CostModel, profile: PathProfile,
                    path: str = CI_PATH, width_tol: float = 1e-12) -> float:
    """Integral of the path derivative over [0, 1] using only shadow prices.

    Grid intervals whose end slopes agree lie on one linear piece.  Intervals
    that straddle a kink are bisected, with slopes re-evaluated from duals,
    until each piece is located to ``width_tol``.
    """

    def slope(eta, side, width):
        return duals_at(instance, rates, cm, eta, side, path, eps=min(EPS, width * 1e-4)).slope

    def piece(lo, hi, s_lo, s_hi):
        width = hi - lo
        if not _slopes_differ(s_lo, s_hi):
            return width * s_lo
        if width < width_tol:
            return width * 0.5 * (s_lo + s_hi)
        mid = 0.5 * (lo + hi)
        return piece(lo, mid, s_lo, slope(mid, LEFT, width)) + piece(mid, hi, slope(mid, RIGHT, width), s_hi)

    etas = profile.etas
    return float(sum(
        piece(etas[k], etas[k + 1], profile.right_slopes[k], profile.left_slopes[k + 1])
        for k in range(len(etas) - 1)
    ))


def locate_kinks(value, slope, lo: float, hi: float, grid_size: int = 101, max_depth: int = 60) -> list[tuple[float, float]]:
    """Breakpoints of a concave piecewise-linear function of one parameter.

    ``value(t)`` evaluates the function and ``slope(t, side)`` its one-sided
    derivative.  Each grid interval whose end slopes differ is resolved by
    intersecting the two supporting lines; if the intersection does not
    separate the two slopes the interval holds several kinks and is bisected.
    """
    kinks: list[tuple[float, float]] = []

    def scan(a, b, fa, fb, sa, sb, depth):
        if not _slopes_differ(sa, sb):
            return
        t = (fb - fa + sa * a - sb * b) / (sa - sb)
        t = min(max(t, a), b)
        width = b - a
        eps = min(EPS, width * 1e-4)
        left = slope(t, LEFT, eps) if t - eps > a else sa
        right = slope(t, RIGHT, eps) if t + eps < b else sb
        if (not _slopes_differ(left, sa) and not _slopes_differ(right, sb)) or depth >= max_depth:
            kinks.append((t, value(t)))
            return
        m = 0.5 * (a + b)
        fm = value(m)
        scan(a, m, fa, fm, sa, slope(m, LEFT, eps), depth + 1)
        scan(m, b, fm, fb, slope(m, RIGHT, eps), sb, depth + 1)

    ts = np.linspace(lo, hi, grid_size)
    fs = [value(t) for t in ts]
    eps = min(EPS, (ts[1] - ts[0]) * 1e-4)
    lefts = [slope(t, LEFT, eps) if k > 0 else None for k, t in enumerate(ts)]
    rights = [slope(t, RIGHT, eps) if k < grid_size - 1 else None for k, t in enumerate(ts)]
    for k in range(grid_size):
        if 0 < k < grid_size - 1 and _slopes_differ(lefts[k], rights[k]):
            kinks.append((float(ts[k]), fs[k]))
        if k < grid_size - 1:
            scan(ts[k], ts[k + 1], fs[k], fs[k + 1], rights[k], lefts[k + 1], 0)
    return sorted((float(t), float(f)) for t, f in kinks)


def ce_demand_kinks(instance: MatchingInstance, gamma, direction, hi: float, grid_size: int = 101):
    """Breakpoints of the cost-excluded value along demand ``t * direction`` for t in [0, hi]."""
    direction = np.asarray(direction, dtype=float)

    def value(t):
        return solve_ce(CeProblem(instance, t * direction, gamma)).objective

    def slope(t, side, eps):
        at = t - eps if side == LEFT else t + eps
        return float(solve_ce(CeProblem(instance, max(at, 0.0) * direction, gamma)).a @ direction)

    return locate_kinks(value, slope, 0.0, hi, grid_size)


def path_kinks(instance: MatchingInstance, rates: Rates, cm: CostModel, path: str = CI_PATH, grid_size: int = 101):
    """Breakpoints of the experiment-path value on [0, 1]."""

    def value(eta):
        return solve_on_path(instance, rates, cm, eta, path).objective

    def slope(eta, side, eps):
        return duals_at(instance, rates, cm, eta, side, path, eps=eps).slope

    return locate_kinks(value, slope, 0.0, 1.0, grid_size)
