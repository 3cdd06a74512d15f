"""Small dense linear programming.

A two-phase primal simplex solver (Bland's anti-cycling rule) for the modest
problems this library generates: the per-round optimum of a fixed-context
environment and the empirical-optimum program built from exploration data.
Exact vertex solutions make the surrounding estimates easy to test, which is
why this is hand-rolled rather than delegated to an interior-point code.
"""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import ConfigurationError, InfeasibleError

PIVOT_TOL = 1e-9
MAX_PIVOTS = 10**6


@dataclass(frozen=True)
class LpProblem:
    """maximize c.x  subject to  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0."""

    c: np.ndarray
    a_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        object.__setattr__(self, "c", c)
        for mat_name, rhs_name in (("a_ub", "b_ub"), ("a_eq", "b_eq")):
            mat, rhs = getattr(self, mat_name), getattr(self, rhs_name)
            if (mat is None) != (rhs is None):
                raise ConfigurationError(f"{mat_name} and {rhs_name} must be given together")
            if mat is None:
                continue
            mat = np.atleast_2d(np.asarray(mat, dtype=float))
            rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
            if mat.shape != (rhs.size, c.size):
                raise ConfigurationError(
                    f"{mat_name} has shape {mat.shape}, expected ({rhs.size}, {c.size})"
                )
            object.__setattr__(self, mat_name, mat)
            object.__setattr__(self, rhs_name, rhs)
        parts = [c]
        for arr in (self.a_ub, self.b_ub, self.a_eq, self.b_eq):
            if arr is not None:
                parts.append(arr.ravel())
        if not all(np.isfinite(p).all() for p in parts):
            raise ConfigurationError("LP data must be finite")

    @property
    def n(self) -> int:
        return self.c.size


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded | pivot_limit
    value: float | None = None
    x: np.ndarray | None = None
    iterations: int = 0
    dual_ub: np.ndarray | None = None  # multipliers of the inequality rows
    dual_eq: np.ndarray | None = None


def _pivot(tableau: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    colvals = tableau[:, col].copy()
    colvals[row] = 0.0
    tableau -= np.outer(colvals, tableau[row])
    basis[row] = col


def _run_simplex(tableau, basis, ncols, iterations):
    """Minimize the objective row in place. Bland's rule throughout."""
    while True:
        reduced = tableau[-1, :ncols]
        entering = -1
        for j in range(ncols):
            if reduced[j] < -PIVOT_TOL:
                entering = j
                break
        if entering < 0:
            return "optimal", iterations
        col = tableau[:-1, entering]
        rhs = tableau[:-1, -1]
        best_ratio, leaving = None, -1
        for i in range(col.size):
            if col[i] > PIVOT_TOL:
                ratio = rhs[i] / col[i]
                # Bland: break ratio ties by smallest basis index.
                if (
                    best_ratio is None
                    or ratio < best_ratio - PIVOT_TOL
                    or (abs(ratio - best_ratio) <= PIVOT_TOL and basis[i] < basis[leaving])
                ):
                    best_ratio, leaving = ratio, i
        if leaving < 0:
            return "unbounded", iterations
        _pivot(tableau, basis, leaving, entering)
        iterations += 1
        if iterations > MAX_PIVOTS:
            return "pivot_limit", iterations


def solve_lp(problem: LpProblem) -> LpSolution:
    """Two-phase primal simplex. Returns status, optimum, vertex, and duals."""
    n = problem.n
    a_ub = problem.a_ub if problem.a_ub is not None else np.zeros((0, n))
    b_ub = problem.b_ub if problem.b_ub is not None else np.zeros(0)
    a_eq = problem.a_eq if problem.a_eq is not None else np.zeros((0, n))
    b_eq = problem.b_eq if problem.b_eq is not None else np.zeros(0)
    mi, me = b_ub.size, b_eq.size
    m = mi + me

    # Rows: [A_ub | I_slack | artificials ; A_eq | 0 | artificials], RHS >= 0.
    rows = np.hstack([np.vstack([a_ub, a_eq]), np.vstack([np.eye(mi), np.zeros((me, mi))])])
    rhs = np.concatenate([b_ub, b_eq])
    flip = rhs < 0
    rows[flip] *= -1.0
    rhs = np.abs(rhs)

    # A flipped inequality's slack enters with coefficient -1, so every flipped
    # row and every equality row needs an artificial to seed the basis.
    needs_art = np.ones(m, dtype=bool)
    needs_art[:mi] = flip[:mi]
    art_rows = np.flatnonzero(needs_art)
    n_art = art_rows.size
    art_block = np.zeros((m, n_art))
    for k, i in enumerate(art_rows):
        art_block[i, k] = 1.0

    ncols = n + mi + n_art
    tableau = np.zeros((m + 1, ncols + 1))
    tableau[:m, : n + mi] = rows
    tableau[:m, n + mi : ncols] = art_block
    tableau[:m, -1] = rhs

    basis = np.empty(m, dtype=int)
    basis[:mi] = n + np.arange(mi)
    basis[art_rows] = n + mi + np.arange(n_art)

    iterations = 0
    if n_art:
        # Phase one: minimize the sum of artificials.
        tableau[-1, :] = 0.0
        tableau[-1, n + mi : ncols] = 1.0
        for i in art_rows:
            tableau[-1] -= tableau[i]
        status, iterations = _run_simplex(tableau, basis, ncols, iterations)
        if status == "pivot_limit":
            return LpSolution(status="pivot_limit", iterations=iterations)
        if -tableau[-1, -1] > 1e-7:
            return LpSolution(status="infeasible", iterations=iterations)
        # Drive leftover artificials out of the basis where possible.
        for i in range(m):
            if basis[i] >= n + mi:
                for j in range(n + mi):
                    if abs(tableau[i, j]) > PIVOT_TOL:
                        _pivot(tableau, basis, i, j)
                        break

    # Phase two on the original objective (minimize -c.x).
    ncols2 = n + mi
    tableau2 = np.delete(tableau, np.s_[n + mi : ncols], axis=1)
    degenerate = [i for i in range(m) if basis[i] >= ncols2]  # redundant rows
    if degenerate:
        tableau2 = np.delete(tableau2, degenerate, axis=0)
        basis = np.delete(basis, degenerate)
        m = basis.size
    tableau2[-1, :] = 0.0
    tableau2[-1, :n] = -problem.c
    for i in range(m):
        if basis[i] < n:
            tableau2[-1] -= tableau2[-1, basis[i]] * tableau2[i]
    status, iterations = _run_simplex(tableau2, basis, ncols2, iterations)
    if status != "optimal":
        return LpSolution(status=status, iterations=iterations)

    x = np.zeros(ncols2)
    x[basis] = tableau2[:-1, -1]
    # Reduced costs under the slack columns are the inequality multipliers.
    dual_full = tableau2[-1, n : n + mi].copy()
    dual_ub = np.where(flip[:mi], -dual_full, dual_full)
    return LpSolution(
        status="optimal",
        value=float(problem.c @ x[:n]),
        x=x[:n],
        iterations=iterations,
        dual_ub=dual_ub,
        dual_eq=None,
    )


def exact_opt_fixed_context(rewards, costs, budget_rate: float) -> float:
    """Per-round optimum of the static allocation over one fixed context.

    maximize sum_a p_a * rewards[a]  over the probability simplex, subject to
    sum_a p_a * costs[a, j] <= budget_rate for every resource j.
    """
    rewards = np.asarray(rewards, dtype=float)
    costs = np.atleast_2d(np.asarray(costs, dtype=float))
    K = rewards.size
    if costs.shape[0] != K:
        raise ConfigurationError(f"costs has {costs.shape[0]} rows, expected {K}")
    problem = LpProblem(
        c=rewards,
        a_ub=costs.T,
        b_ub=np.full(costs.shape[1], float(budget_rate)),
        a_eq=np.ones((1, K)),
        b_eq=np.array([1.0]),
    )
    sol = solve_lp(problem)
    if sol.status == "infeasible":
        raise InfeasibleError("no arm mixture satisfies the budget rate")
    if sol.status != "optimal":
        raise RuntimeError(f"LP solver returned status {sol.status}")
    return sol.value


def brute_force_opt(rewards, costs, budget_rate: float, grid: int = 50) -> float:
    """Independent check of exact_opt_fixed_context for tiny instances.

    Enumerates every vertex of the feasible region (all choices of K-1 active
    constraints, solved against the simplex equality) plus a grid over the
    simplex, and returns the best feasible objective.
    """
    rewards = np.asarray(rewards, dtype=float)
    costs = np.atleast_2d(np.asarray(costs, dtype=float))
    K, d = rewards.size, costs.shape[1]
    if K > 3 or d > 2:
        raise ConfigurationError(f"brute force limited to K <= 3, d <= 2 (got K={K}, d={d})")

    # Inequality rows in p-space: -p_a <= 0 and costs.T p <= budget_rate.
    rows = np.vstack([-np.eye(K), costs.T])
    rhs = np.concatenate([np.zeros(K), np.full(d, float(budget_rate))])

    def feasible(p):
        return (rows @ p <= rhs + 1e-9).all()

    candidates = []
    for active in combinations(range(rows.shape[0]), K - 1):
        system = np.vstack([np.ones((1, K)), rows[list(active)]])
        target = np.concatenate([[1.0], rhs[list(active)]])
        try:
            p = np.linalg.solve(system, target)
        except np.linalg.LinAlgError:
            continue
        if feasible(p):
            candidates.append(p)
    if K == 1:
        p = np.ones(1)
        if feasible(p):
            candidates.append(p)

    # Safety-net grid over the simplex.
    ticks = np.linspace(0.0, 1.0, grid + 1)
    if K == 1:
        grid_pts = [np.ones(1)]
    elif K == 2:
        grid_pts = [np.array([t, 1 - t]) for t in ticks]
    else:
        grid_pts = [
            np.array([a, b, 1 - a - b]) for a in ticks for b in ticks if a + b <= 1 + 1e-12
        ]
    candidates.extend(p for p in grid_pts if feasible(p))

    if not candidates:
        raise InfeasibleError("no feasible point")
    return float(max(rewards @ p for p in candidates))
