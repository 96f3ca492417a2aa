"""Dense two-phase primal simplex for the small LPs produced by branch-and-bound.

Problems have a handful of variables and rows, so a full tableau with Bland's
rule is fast enough and fully deterministic.
"""

import enum
from dataclasses import dataclass

import numpy as np

EPS_FEAS = 1e-9
EPS_OBJ = 1e-9
_EPS_PIVOT = 1e-12

LE = "<="
GE = ">="


class LpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class LpProblem:
    """maximize ``objective @ x`` subject to ``constraints`` and ``x >= 0``.

    Each constraint is ``(row, relation, bound)`` with relation ``"<="`` or ``">="``.
    """

    num_vars: int
    objective: tuple
    constraints: tuple

    def __post_init__(self):
        object.__setattr__(self, "objective", tuple(float(v) for v in self.objective))
        object.__setattr__(
            self,
            "constraints",
            tuple((tuple(float(v) for v in row), rel, float(b)) for row, rel, b in self.constraints),
        )
        if len(self.objective) != self.num_vars:
            raise ValueError(f"objective has length {len(self.objective)}, expected {self.num_vars}")
        for k, (row, rel, b) in enumerate(self.constraints):
            if len(row) != self.num_vars:
                raise ValueError(f"constraint {k} has length {len(row)}, expected {self.num_vars}")
            if rel not in (LE, GE):
                raise ValueError(f"constraint {k} has unknown relation {rel!r}")
            if not np.isfinite(b) or not all(np.isfinite(row)):
                raise ValueError(f"constraint {k} is not finite")

    def with_constraint(self, row, relation, bound):
        return LpProblem(self.num_vars, self.objective, self.constraints + ((tuple(row), relation, bound),))

    def is_feasible(self, x, tol=EPS_FEAS):
        x = np.asarray(x, dtype=float)
        if np.any(x < -tol):
            return False
        for row, rel, b in self.constraints:
            lhs = float(np.dot(row, x))
            if rel == LE and lhs > b + tol:
                return False
            if rel == GE and lhs < b - tol:
                return False
        return True


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    x: np.ndarray = None
    objective_value: float = float("nan")


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]
    basis[row] = col


def _run_simplex(T, basis, cost, allowed):
    """Maximize ``cost @ z`` on a tableau in canonical form. Returns False if unbounded."""
    max_iter = 10_000
    for _ in range(max_iter):
        cb = cost[basis]
        reduced = cost[:-1] - cb @ T[:, :-1]
        entering = -1
        for j in allowed:
            if reduced[j] > _EPS_PIVOT:
                entering = j
                break
        if entering < 0:
            return True
        column = T[:, entering]
        best_row, best_ratio = -1, np.inf
        for i in range(T.shape[0]):
            if column[i] > _EPS_PIVOT:
                ratio = T[i, -1] / column[i]
                if ratio < best_ratio - _EPS_PIVOT or (
                    abs(ratio - best_ratio) <= _EPS_PIVOT and basis[i] < basis[best_row]
                ):
                    best_row, best_ratio = i, ratio
        if best_row < 0:
            return False
        _pivot(T, basis, best_row, entering)
    raise RuntimeError("simplex iteration limit reached")


def solve_lp(problem):
    """Solve ``problem`` and return an :class:`LpSolution`."""
    k = problem.num_vars
    rows = []
    for row, rel, b in problem.constraints:
        row = np.array(row, dtype=float)
        if b < 0:
            row, b, rel = -row, -b, (GE if rel == LE else LE)
        rows.append((row, rel, b))

    m = len(rows)
    n_art = sum(1 for _, rel, _ in rows if rel == GE)
    n_cols = k + m + n_art
    T = np.zeros((m, n_cols + 1))
    basis = np.zeros(m, dtype=int)
    art = k + m
    for i, (row, rel, b) in enumerate(rows):
        T[i, :k] = row
        T[i, -1] = b
        if rel == LE:
            T[i, k + i] = 1.0
            basis[i] = k + i
        else:
            T[i, k + i] = -1.0
            T[i, art] = 1.0
            basis[i] = art
            art += 1

    structural = list(range(k + m))
    if n_art:
        phase1 = np.zeros(n_cols + 1)
        phase1[k + m : n_cols] = -1.0
        _run_simplex(T, basis, phase1, list(range(n_cols)))
        if -float(phase1[basis] @ T[:, -1]) > EPS_FEAS:
            return LpSolution(LpStatus.INFEASIBLE)
        # drive zero-valued artificials out of the basis; drop redundant rows
        keep = []
        for i in range(T.shape[0]):
            if basis[i] >= k + m:
                candidates = [j for j in structural if abs(T[i, j]) > _EPS_PIVOT]
                if not candidates:
                    continue
                _pivot(T, basis, i, candidates[0])
            keep.append(i)
        T, basis = T[keep], basis[keep]

    phase2 = np.zeros(n_cols + 1)
    phase2[:k] = problem.objective
    if not _run_simplex(T, basis, phase2, structural):
        return LpSolution(LpStatus.UNBOUNDED)

    z = np.zeros(n_cols)
    z[basis] = T[:, -1]
    x = np.clip(z[:k], 0.0, None)
    value = float(np.dot(problem.objective, x))
    return LpSolution(LpStatus.OPTIMAL, x, value)
