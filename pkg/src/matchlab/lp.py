"""Matching linear programs with exact primal-dual solutions.

Both matching problems are transportation problems: the cost-excluded one has
one demand row per type, the cost-included one stacks a control block and a
treated block (2 * n_d rows) against the same supply columns.  The ``<=``
constraints are turned into a balanced transportation problem by adding one
slack column (unmatched demand) and one slack row (unused supply), both with
zero weight, and the result is solved with a primal transportation simplex.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Union

import numpy as np

from matchlab.costs import CostModel, discounted_weights

if TYPE_CHECKING:
    from collections.abc import Sequence

FEAS_TOL = 1e-9
DUAL_TOL = 1e-9
# reduced costs below this are treated as non-improving
_PIVOT_TOL = 1e-11
_MAX_PIVOTS = 100_000


class InputError(ValueError):
    """Problem data has the wrong shape or sign."""


class OracleScopeError(ValueError):
    """Input outside what the enumeration oracle accepts."""


@dataclass(frozen=True, eq=False)
class MatchingInstance:
    """Match values ``v[i, j] > 0`` between demand type i and supply type j."""

    v: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.array(self.v, dtype=float)
        if v.ndim == 1:
            v = v.reshape(1, -1)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise InputError(f"v must be a non-empty matrix, got shape {v.shape}")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise InputError("all match values must be finite and strictly positive")
        v.setflags(write=False)
        object.__setattr__(self, "v", v)

    @property
    def n_d(self) -> int:
        return self.v.shape[0]

    @property
    def n_s(self) -> int:
        return self.v.shape[1]

    def __eq__(self, other):
        return isinstance(other, MatchingInstance) and np.array_equal(self.v, other.v)

    def __hash__(self):
        return hash(self.v.tobytes())


def _vector(x, n: int, name: str) -> np.ndarray:
    arr = np.array(x, dtype=float).reshape(-1)
    if arr.shape != (n,):
        raise InputError(f"{name} has length {arr.size}, expected {n}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InputError(f"{name} must be finite and non-negative")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CeProblem:
    instance: MatchingInstance
    d: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "d", _vector(self.d, self.instance.n_d, "d"))
        object.__setattr__(self, "s", _vector(self.s, self.instance.n_s, "s"))

    @property
    def weights(self) -> np.ndarray:
        return self.instance.v[None, :, :]

    @property
    def demand(self) -> np.ndarray:
        return self.d[None, :]


@dataclass(frozen=True, eq=False)
class CiProblem:
    instance: MatchingInstance
    d_con: np.ndarray
    d_tre: np.ndarray
    s: np.ndarray
    cost_model: CostModel

    def __post_init__(self):
        n_d = self.instance.n_d
        object.__setattr__(self, "d_con", _vector(self.d_con, n_d, "d_con"))
        object.__setattr__(self, "d_tre", _vector(self.d_tre, n_d, "d_tre"))
        object.__setattr__(self, "s", _vector(self.s, self.instance.n_s, "s"))

    @property
    def weights(self) -> np.ndarray:
        return np.stack([self.instance.v, discounted_weights(self.instance, self.cost_model)])

    @property
    def demand(self) -> np.ndarray:
        return np.stack([self.d_con, self.d_tre])


Problem = Union[CeProblem, CiProblem]


@dataclass(frozen=True, eq=False)
class MatchOutcome:
    """Optimal primal flows and dual prices of one matching LP.

    Arrays carry a leading group axis: one group for cost-excluded problems,
    two (control, treated) for cost-included ones.
    """

    objective: float
    flow: np.ndarray  # (groups, n_d, n_s)
    demand_duals: np.ndarray  # (groups, n_d)
    supply_duals: np.ndarray  # (n_s,)
    degenerate: bool
    pivots: int = 0

    @property
    def x(self) -> np.ndarray:
        return self.flow[0]

    @property
    def a(self) -> np.ndarray:
        return self.demand_duals[0]

    @property
    def b(self) -> np.ndarray:
        return self.supply_duals

    @property
    def x_con(self) -> np.ndarray:
        return self.flow[0]

    @property
    def x_tre(self) -> np.ndarray:
        self._require_ci()
        return self.flow[1]

    @property
    def a_con(self) -> np.ndarray:
        return self.demand_duals[0]

    @property
    def a_tre(self) -> np.ndarray:
        self._require_ci()
        return self.demand_duals[1]

    def _require_ci(self):
        if self.flow.shape[0] != 2:
            raise AttributeError("treated-group fields exist only for cost-included outcomes")


# ---------------------------------------------------------------------------
# transportation simplex


def _initial_basis(c, row_cap, col_cap):
    """Matrix-maximum starting basis; always returns m + n - 1 cells forming a tree."""
    m, n = len(row_cap), len(col_cap)
    ra, cb = list(row_cap), list(col_cap)
    rows_left, cols_left = set(range(m)), set(range(n))
    order = sorted(((i, j) for i in range(m) for j in range(n)), key=lambda ij: (-c[ij[0]][ij[1]], ij))
    flow = {}
    for i, j in order:
        if not rows_left or not cols_left:
            break
        if i not in rows_left or j not in cols_left:
            continue
        q = min(ra[i], cb[j])
        flow[(i, j)] = q
        ra[i] -= q
        cb[j] -= q
        # close exactly one line per cell so the basis ends up a spanning tree;
        # the last open column stays open whatever rounding says about balance
        if len(rows_left) > 1 and (ra[i] <= cb[j] or len(cols_left) == 1):
            rows_left.discard(i)
        else:
            cols_left.discard(j)
    return flow


def _potentials(basis, m, n, c):
    """Solve u_i + w_j = c_ij on the basis tree with u_0 = 0."""
    adj_r = [[] for _ in range(m)]
    adj_c = [[] for _ in range(n)]
    for i, j in basis:
        adj_r[i].append(j)
        adj_c[j].append(i)
    u = [None] * m
    w = [None] * n
    u[0] = 0.0
    stack = [(0, True)]
    while stack:
        k, is_row = stack.pop()
        if is_row:
            for j in adj_r[k]:
                if w[j] is None:
                    w[j] = c[k][j] - u[k]
                    stack.append((j, False))
        else:
            for i in adj_c[k]:
                if u[i] is None:
                    u[i] = c[i][k] - w[k]
                    stack.append((i, True))
    return u, w, adj_r, adj_c


def _tree_path(adj_r, adj_c, m, n, start_row, end_col):
    """Cells on the basis-tree path from column ``end_col`` back to row ``start_row``."""
    # nodes: rows 0..m-1, columns m..m+n-1
    parent = {start_row: None}
    stack = [start_row]
    target = m + end_col
    while stack:
        node = stack.pop()
        if node == target:
            break
        if node < m:
            nbrs = (m + j for j in adj_r[node])
        else:
            nbrs = iter(adj_c[node - m])
        for nb in nbrs:
            if nb not in parent:
                parent[nb] = node
                stack.append(nb)
    cells = []
    node = target
    while parent[node] is not None:
        prev = parent[node]
        if node < m:
            cells.append((node, prev - m))
        else:
            cells.append((prev, node - m))
        node = prev
    return cells


def _transport_max(c, row_cap, col_cap):
    """Maximise sum c_ij x_ij over a balanced transportation polytope.

    Dantzig pricing with lowest-index tie-breaking; after a degenerate pivot
    the entering and leaving choices switch to Bland's rule until the next
    pivot that moves flow, which rules out cycling.
    """
    m, n = len(row_cap), len(col_cap)
    flow = _initial_basis(c, row_cap, col_cap)
    bland = False
    for pivots in range(_MAX_PIVOTS):
        u, w, adj_r, adj_c = _potentials(flow, m, n, c)
        entering = None
        best = _PIVOT_TOL
        for i in range(m):
            ci, ui = c[i], u[i]
            for j in range(n):
                r = ci[j] - ui - w[j]
                if r > best and (i, j) not in flow:
                    entering = (i, j)
                    if bland:
                        break
                    best = r
            if bland and entering is not None:
                break
        if entering is None:
            return flow, u, w, pivots
        i0, j0 = entering
        path = _tree_path(adj_r, adj_c, m, n, i0, j0)
        minus = path[0::2]
        theta = min(flow[cell] for cell in minus)
        leaving = min(cell for cell in minus if flow[cell] == theta)
        for k, cell in enumerate(path):
            if k % 2 == 0:
                flow[cell] -= theta
            else:
                flow[cell] += theta
        del flow[leaving]
        flow[entering] = theta
        bland = theta <= FEAS_TOL
    raise RuntimeError("transportation simplex did not converge")


def _degenerate(x, demand, s, tol=FEAS_TOL) -> bool:
    # a vertex of {x >= 0, row sums <= d, col sums <= s} is nondegenerate iff it
    # has as many strictly positive variables (flows plus slacks) as constraints
    positive = int(np.count_nonzero(x > tol))
    tight_rows = int(np.count_nonzero(x.sum(axis=2) >= demand - tol))
    tight_cols = int(np.count_nonzero(x.sum(axis=(0, 1)) >= s - tol))
    return positive < tight_rows + tight_cols


def _solve(weights: np.ndarray, demand: np.ndarray, s: np.ndarray) -> MatchOutcome:
    g, n_d, n_s = weights.shape
    rows = g * n_d
    w_flat = weights.reshape(rows, n_s)
    d_flat = demand.reshape(rows)
    total_d, total_s = float(d_flat.sum()), float(s.sum())
    # balanced form: slack column n_s absorbs unmatched demand, slack row
    # ``rows`` absorbs unused supply
    c = [list(map(float, w_flat[i])) + [0.0] for i in range(rows)]
    c.append([0.0] * (n_s + 1))
    row_cap = [float(x) for x in d_flat] + [total_s]
    col_cap = [float(x) for x in s] + [total_d]
    basis, u, w, pivots = _transport_max(c, row_cap, col_cap)

    x = np.zeros((rows, n_s))
    for (i, j), q in basis.items():
        if i < rows and j < n_s:
            x[i, j] = q
    a = np.array([u[i] + w[n_s] for i in range(rows)])
    b = np.array([w[j] + u[rows] for j in range(n_s)])
    a[np.abs(a) < 1e-13] = 0.0
    b[np.abs(b) < 1e-13] = 0.0
    x = x.reshape(g, n_d, n_s)
    objective = float(np.sum(weights * x))
    return MatchOutcome(
        objective=objective,
        flow=x,
        demand_duals=a.reshape(g, n_d),
        supply_duals=b,
        degenerate=_degenerate(x, demand, s),
        pivots=pivots,
    )


def solve_ce(p: CeProblem) -> MatchOutcome:
    """Optimal primal-dual pair of the cost-excluded matching LP."""
    return _solve(p.weights, p.demand, p.s)


def solve_ci(p: CiProblem) -> MatchOutcome:
    """Optimal primal-dual pair of the cost-included matching LP.

    Control rows use ``v``; treated rows use the cost model's discounted weights.
    """
    p.cost_model.validate_for(p.instance)
    return _solve(p.weights, p.demand, p.s)


def solve_weights(weights: np.ndarray, d: Sequence[float], s: Sequence[float]) -> MatchOutcome:
    """Transportation LP with an arbitrary positive weight matrix (single group)."""
    weights = np.asarray(weights, dtype=float)
    return _solve(weights[None, :, :], np.asarray(d, dtype=float)[None, :], np.asarray(s, dtype=float))


# ---------------------------------------------------------------------------
# oracle and checker

_ORACLE_CAP = 12


def brute_force_matching(p: Problem) -> float:
    """Exact optimum by enumerating every integer assignment (small inputs only)."""
    weights, demand, s = p.weights, p.demand, p.s
    rows_w = weights.reshape(-1, weights.shape[-1])
    rows_d = demand.reshape(-1)
    for name, arr in (("demand", rows_d), ("supply", s)):
        if not np.all(arr == np.round(arr)):
            raise OracleScopeError(f"{name} quantities must be integers")
    if rows_d.sum() > _ORACLE_CAP or s.sum() > _ORACLE_CAP:
        raise OracleScopeError(f"oracle is capped at {_ORACLE_CAP} units per side")
    rows_d = rows_d.astype(int)
    n_s = len(s)

    def row_options(cap, remaining):
        # every integer vector y <= remaining with sum(y) <= cap
        ranges = [range(min(cap, r) + 1) for r in remaining]
        for y in itertools.product(*ranges):
            if sum(y) <= cap:
                yield y

    best = 0.0

    def search(k, remaining, value):
        nonlocal best
        if k == len(rows_d):
            best = max(best, value)
            return
        wk = rows_w[k]
        for y in row_options(rows_d[k], remaining):
            gained = sum(wk[j] * y[j] for j in range(n_s) if y[j])
            search(k + 1, [remaining[j] - y[j] for j in range(n_s)], value + gained)

    search(0, [int(x) for x in s], 0.0)
    return best


@dataclass(frozen=True)
class Violation:
    constraint: str
    residual: float

    def __str__(self):
        return f"{self.constraint}: residual {self.residual:.3e}"


def verify_kkt(outcome: MatchOutcome, problem: Problem, tol: float = FEAS_TOL) -> list[Violation]:
    """Check primal/dual feasibility, strong duality and complementary slackness."""
    weights, demand, s = problem.weights, problem.demand, problem.s
    x, a, b = outcome.flow, outcome.demand_duals, outcome.supply_duals
    scale = max(1.0, float(demand.sum()), float(s.sum()))
    groups = ("con", "tre") if weights.shape[0] == 2 else ("",)
    out = []

    def label(g, i):
        return f"{groups[g]}[{i}]" if groups[g] else f"[{i}]"

    if np.any(x < -tol):
        g, i, j = np.unravel_index(np.argmin(x), x.shape)
        out.append(Violation(f"nonnegative flow {label(g, i)}[{j}]", float(-x[g, i, j])))
    row_excess = x.sum(axis=2) - demand
    for g, i in zip(*np.nonzero(row_excess > tol * scale)):
        out.append(Violation(f"demand {label(g, i)}", float(row_excess[g, i])))
    col_excess = x.sum(axis=(0, 1)) - s
    for j in np.nonzero(col_excess > tol * scale)[0]:
        out.append(Violation(f"supply [{j}]", float(col_excess[j])))

    for g, i in zip(*np.nonzero(a < -tol)):
        out.append(Violation(f"nonnegative demand dual {label(g, i)}", float(-a[g, i])))
    for j in np.nonzero(b < -tol)[0]:
        out.append(Violation(f"nonnegative supply dual [{j}]", float(-b[j])))
    slack = a[:, :, None] + b[None, None, :] - weights
    for g, i, j in zip(*np.nonzero(slack < -tol)):
        out.append(Violation(f"dual ({label(g, i)},{j})", float(-slack[g, i, j])))

    primal = float(np.sum(weights * x))
    dual = float(np.sum(a * demand) + b @ s)
    gap = abs(primal - dual)
    if gap > DUAL_TOL * max(1.0, abs(primal)):
        out.append(Violation("strong duality", gap))
    if abs(outcome.objective - primal) > DUAL_TOL * max(1.0, abs(primal)):
        out.append(Violation("reported objective", abs(outcome.objective - primal)))

    for g, i, j in zip(*np.nonzero(x > tol)):
        if abs(slack[g, i, j]) > tol:
            out.append(Violation(f"complementary slackness ({label(g, i)},{j})", float(abs(slack[g, i, j]))))
    row_slack = demand - x.sum(axis=2)
    for g, i in zip(*np.nonzero((row_slack > tol * scale) & (a > tol))):
        out.append(Violation(f"complementary slackness demand {label(g, i)}", float(a[g, i] * row_slack[g, i])))
    col_slack = s - x.sum(axis=(0, 1))
    for j in np.nonzero((col_slack > tol * scale) & (b > tol))[0]:
        out.append(Violation(f"complementary slackness supply [{j}]", float(b[j] * col_slack[j])))
    return out
