"""Shared fixtures and independent oracles for the test-suite."""

from __future__ import annotations

import sys

import numpy as np
import pytest
from scipy.optimize import linprog

from matchlab.costs import CostModel
from matchlab.instances import GeometricSpec, default_rates, gen_geometric, pedagogical_cost, pedagogical_instance


def highs_transport(weights: np.ndarray, demand: np.ndarray, supply: np.ndarray) -> float:
    """Optimal value of max sum w*x s.t. row sums <= demand, column sums <= supply, by HiGHS.

    ``weights`` has shape (g, n_d, n_s) and ``demand`` shape (g, n_d); all
    groups share the supply columns.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim == 2:
        w = w[None]
    demand = np.asarray(demand, dtype=float).reshape(w.shape[0], w.shape[1])
    g, n_d, n_s = w.shape
    n = g * n_d * n_s
    rows = []
    for k in range(g):
        for i in range(n_d):
            r = np.zeros(n)
            r[(k * n_d + i) * n_s:(k * n_d + i + 1) * n_s] = 1.0
            rows.append(r)
    for j in range(n_s):
        r = np.zeros(n)
        r[j::n_s] = 1.0
        rows.append(r)
    b = np.concatenate([demand.ravel(), np.asarray(supply, dtype=float)])
    res = linprog(-w.ravel(), A_ub=np.array(rows), b_ub=b, bounds=(0, None), method="highs")
    assert res.status == 0, res.message
    return -float(res.fun)


@pytest.fixture
def pedagogical():
    inst, presets = pedagogical_instance()
    return inst, presets, pedagogical_cost()


@pytest.fixture
def geometric_case():
    inst = gen_geometric(GeometricSpec(6, 5, seed=11))
    return inst, default_rates(inst, 1.2), CostModel.proportional(0.1)


def pytest_terminal_summary(terminalreporter):
    """Print one pass/fail line per acceptance criterion that ran."""
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.summary_lines():
        terminalreporter.write_line(line)
