"""
Small dense linear programs with a certified status.

Programs are solved with the HiGHS dual simplex behind scipy.optimize.linprog
(bounded variables, no presolve). Every optimal answer is clipped into its box
and checked against the original constraints before it is returned.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from src.utils.constants import LP_BOUND_SLACK, LP_FEASIBILITY_TOL, LP_MAX_ITER, LP_SOLVER_TOL

logger = logging.getLogger(__name__)

# linprog status codes
_SCIPY_OPTIMAL = 0
_SCIPY_ITERATION_LIMIT = 1
_SCIPY_INFEASIBLE = 2
_SCIPY_UNBOUNDED = 3
_SCIPY_NUMERICAL = 4


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class LpNumericalError(RuntimeError):
    """Raised when the solver stops without a certified answer (iteration cap, numerical breakdown)."""

    pass


def _as_matrix(rows, n: int, name: str) -> np.ndarray:
    matrix = np.zeros((0, n)) if rows is None else np.atleast_2d(np.asarray(rows, dtype=float))
    if matrix.size == 0:
        return np.zeros((0, n))
    if matrix.ndim != 2 or matrix.shape[1] != n:
        raise ValueError(f"{name} must have {n} columns, got shape {matrix.shape}")
    return matrix


def _as_vector(values, size: int, name: str) -> np.ndarray:
    vector = np.zeros(0) if values is None else np.asarray(values, dtype=float).reshape(-1)
    if vector.shape != (size,):
        raise ValueError(f"{name} must have {size} entries, got {vector.shape[0]}")
    return vector


@dataclass
class LinearProgram:
    """maximize c.x subject to A_eq x = b_eq, A_in x <= b_in, lo <= x <= hi.

    Missing constraint blocks may be passed as None; inputs are converted to float arrays.
    Box bounds may be infinite, which is the only way a program can be unbounded.
    """

    c: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    a_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    a_in: Optional[np.ndarray] = None
    b_in: Optional[np.ndarray] = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        if n == 0:
            raise ValueError("A linear program needs at least one variable")
        self.lo = _as_vector(self.lo, n, "lo")
        self.hi = _as_vector(self.hi, n, "hi")
        self.a_eq = _as_matrix(self.a_eq, n, "a_eq")
        self.b_eq = _as_vector(self.b_eq, self.a_eq.shape[0], "b_eq")
        self.a_in = _as_matrix(self.a_in, n, "a_in")
        self.b_in = _as_vector(self.b_in, self.a_in.shape[0], "b_in")

        for name in ("c", "a_eq", "b_eq", "a_in", "b_in"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"Linear program field {name} contains non-finite entries")
        if np.any(np.isnan(self.lo)) or np.any(np.isnan(self.hi)) or np.any(self.lo == np.inf) or np.any(self.hi == -np.inf):
            raise ValueError("Box bounds must be numbers with lo < +inf and hi > -inf")
        if np.any(self.lo > self.hi):
            bad = int(np.argmax(self.lo > self.hi))
            raise ValueError(f"Box bounds require lo <= hi, violated at variable {bad}: {self.lo[bad]} > {self.hi[bad]}")

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def num_equalities(self) -> int:
        return self.a_eq.shape[0]

    @property
    def num_inequalities(self) -> int:
        return self.a_in.shape[0]

    def residual(self, x: np.ndarray) -> float:
        """Largest violation of any equality or inequality row at x."""
        parts = [0.0]
        if self.num_equalities:
            parts.append(float(np.max(np.abs(self.a_eq @ x - self.b_eq))))
        if self.num_inequalities:
            parts.append(float(np.max(self.a_in @ x - self.b_in)))
        return max(parts)

    def within_box(self, x: np.ndarray, slack: float = LP_BOUND_SLACK) -> bool:
        return bool(np.all(x >= self.lo - slack) and np.all(x <= self.hi + slack))


@dataclass(frozen=True)
class LpSolution:
    """Solver answer. x and objective are NaN unless the status is optimal."""

    status: LpStatus
    x: np.ndarray
    objective: float
    residual: float
    iterations: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status == LpStatus.OPTIMAL


def _linprog(lp: LinearProgram, objective: np.ndarray):
    return linprog(
        -objective,
        A_ub=lp.a_in if lp.num_inequalities else None,
        b_ub=lp.b_in if lp.num_inequalities else None,
        A_eq=lp.a_eq if lp.num_equalities else None,
        b_eq=lp.b_eq if lp.num_equalities else None,
        bounds=np.column_stack([lp.lo, lp.hi]),
        method="highs-ds",
        options={
            "presolve": False,
            "maxiter": LP_MAX_ITER,
            "primal_feasibility_tolerance": LP_SOLVER_TOL,
            "dual_feasibility_tolerance": LP_SOLVER_TOL,
        },
    )


def _failed(lp: LinearProgram, status: LpStatus, iterations: int) -> LpSolution:
    return LpSolution(status=status, x=np.full(lp.n, np.nan), objective=float("nan"), residual=float("nan"), iterations=iterations)


def solve_lp(lp: LinearProgram) -> LpSolution:
    """Maximize the program's objective.

    Args:
        lp: The program

    Returns:
        LpSolution; infeasible and unbounded programs are reported through the status

    Raises:
        LpNumericalError: If the solver hits the iteration cap, breaks down numerically,
            or returns an optimum that violates the constraints by more than the feasibility tolerance
    """
    result = _linprog(lp, lp.c)
    iterations = int(getattr(result, "nit", 0))

    if result.status == _SCIPY_OPTIMAL:
        raw = np.asarray(result.x, dtype=float)
        if not lp.within_box(raw, slack=LP_FEASIBILITY_TOL):
            raise LpNumericalError(f"Solver optimum leaves the box by more than {LP_FEASIBILITY_TOL:.0e}")
        # HiGHS may stop up to its primal tolerance outside a bound
        x = np.clip(raw, lp.lo, lp.hi)
        residual = lp.residual(x)
        if residual > LP_FEASIBILITY_TOL:
            raise LpNumericalError(f"Solver optimum violates the constraints (residual {residual:.3e})")
        objective = float(lp.c @ x)
        logger.debug(f"LP optimal after {iterations} iterations: objective={objective:.12e}, residual={residual:.2e}")
        return LpSolution(status=LpStatus.OPTIMAL, x=x, objective=objective, residual=residual, iterations=iterations)

    if result.status == _SCIPY_INFEASIBLE:
        return _failed(lp, LpStatus.INFEASIBLE, iterations)
    if result.status == _SCIPY_UNBOUNDED:
        return _failed(lp, LpStatus.UNBOUNDED, iterations)
    if result.status == _SCIPY_ITERATION_LIMIT:
        raise LpNumericalError(f"Iteration cap of {LP_MAX_ITER} reached: {result.message}")

    if result.status == _SCIPY_NUMERICAL and "unbounded or infeasible" in str(result.message).lower():
        # A zero objective cannot be unbounded, so this solve settles feasibility.
        check = _linprog(lp, np.zeros(lp.n))
        if check.status == _SCIPY_INFEASIBLE:
            return _failed(lp, LpStatus.INFEASIBLE, iterations)
        if check.status == _SCIPY_OPTIMAL:
            return _failed(lp, LpStatus.UNBOUNDED, iterations)

    raise LpNumericalError(f"LP solver failed with status {result.status}: {result.message}")
