from itertools import combinations
from types import SimpleNamespace

import numpy as np
import pytest

from src.security import lp_core
from src.security.lp_core import LinearProgram, LpNumericalError, LpStatus, solve_lp


def _vertex_optimum(lp: LinearProgram) -> float:
    """Best objective over all basic feasible points, by enumeration."""
    eye = np.eye(lp.n)
    rows = np.vstack([lp.a_in, -eye, eye])
    rhs = np.concatenate([lp.b_in, -lp.lo, lp.hi])
    free = lp.n - lp.num_equalities
    best = -np.inf
    for active in combinations(range(len(rows)), free):
        system = np.vstack([lp.a_eq, rows[list(active)]])
        if abs(np.linalg.det(system)) < 1e-9:
            continue
        x = np.linalg.solve(system, np.concatenate([lp.b_eq, rhs[list(active)]]))
        if lp.residual(x) <= 1e-9 and lp.within_box(x, slack=1e-9):
            best = max(best, float(lp.c @ x))
    return best


def _random_program(seed: int, n: int, num_in: int, num_eq: int) -> LinearProgram:
    rng = np.random.default_rng(seed)
    lo = -rng.uniform(0.0, 2.0, n)
    hi = rng.uniform(0.5, 3.0, n)
    x0 = lo + (hi - lo) * rng.uniform(0.2, 0.8, n)
    a_in = rng.normal(size=(num_in, n))
    a_eq = rng.normal(size=(num_eq, n))
    return LinearProgram(
        c=rng.normal(size=n),
        lo=lo,
        hi=hi,
        a_eq=a_eq,
        b_eq=a_eq @ x0,
        a_in=a_in,
        b_in=a_in @ x0 + rng.uniform(0.1, 1.0, num_in),
    )


def test_two_variable_program():
    lp = LinearProgram(c=[1.0, 1.0], lo=[0.0, 0.0], hi=[10.0, 10.0], a_in=[[1.0, 2.0], [3.0, 1.0]], b_in=[4.0, 6.0])
    solution = solve_lp(lp)
    assert solution.is_optimal
    assert solution.objective == pytest.approx(2.8, rel=1e-12)
    np.testing.assert_allclose(solution.x, [1.6, 1.2], rtol=1e-10)
    assert solution.residual <= 1e-10


def test_equality_program():
    lp = LinearProgram(c=[2.0, 1.0], lo=[0.0, 0.0], hi=[1.0, 1.0], a_eq=[[1.0, 1.0]], b_eq=[1.5])
    solution = solve_lp(lp)
    assert solution.objective == pytest.approx(2.5, rel=1e-12)
    np.testing.assert_allclose(solution.x, [1.0, 0.5], rtol=1e-10)


def test_infeasible_program():
    lp = LinearProgram(c=[1.0], lo=[2.0], hi=[3.0], a_in=[[1.0]], b_in=[1.0])
    solution = solve_lp(lp)
    assert solution.status == LpStatus.INFEASIBLE
    assert not solution.is_optimal
    assert np.isnan(solution.objective) and np.all(np.isnan(solution.x))


def test_unbounded_program():
    lp = LinearProgram(c=[1.0, 0.0], lo=[0.0, 0.0], hi=[np.inf, np.inf], a_in=[[1.0, -1.0]], b_in=[1.0])
    assert solve_lp(lp).status == LpStatus.UNBOUNDED


@pytest.mark.parametrize(
    "kwargs",
    [
        {"c": [], "lo": [], "hi": []},
        {"c": [1.0, 1.0], "lo": [0.0], "hi": [1.0, 1.0]},
        {"c": [1.0], "lo": [1.0], "hi": [0.0]},
        {"c": [np.nan], "lo": [0.0], "hi": [1.0]},
        {"c": [1.0], "lo": [np.inf], "hi": [np.inf]},
        {"c": [1.0, 1.0], "lo": [0.0, 0.0], "hi": [1.0, 1.0], "a_in": [[1.0, 1.0, 1.0]], "b_in": [1.0]},
        {"c": [1.0], "lo": [0.0], "hi": [1.0], "a_eq": [[1.0]], "b_eq": [1.0, 2.0]},
    ],
)
def test_program_validation(kwargs):
    with pytest.raises(ValueError):
        LinearProgram(**kwargs)


@pytest.mark.parametrize("seed", range(100))
def test_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(10_000 + seed)
    lp = _random_program(seed, n=int(rng.integers(2, 5)), num_in=int(rng.integers(1, 6)), num_eq=int(rng.integers(0, 2)))
    solution = solve_lp(lp)
    assert solution.is_optimal
    assert solution.objective == pytest.approx(_vertex_optimum(lp), rel=1e-8, abs=1e-8)
    assert lp.residual(solution.x) <= 1e-8
    assert lp.within_box(solution.x)


@pytest.mark.parametrize("seed", range(4))
def test_matches_vertex_enumeration_six_variables(seed):
    lp = _random_program(500 + seed, n=6, num_in=5, num_eq=1)
    assert solve_lp(lp).objective == pytest.approx(_vertex_optimum(lp), rel=1e-8, abs=1e-8)


def _fake_linprog(*results):
    calls = iter(results)
    return lambda *args, **kwargs: next(calls)


def test_iteration_cap_raises(monkeypatch):
    lp = LinearProgram(c=[1.0], lo=[0.0], hi=[1.0])
    monkeypatch.setattr(lp_core, "linprog", _fake_linprog(SimpleNamespace(status=1, nit=10_000, message="Iteration limit reached")))
    with pytest.raises(LpNumericalError):
        solve_lp(lp)


def test_ambiguous_status_resolved(monkeypatch):
    lp = LinearProgram(c=[1.0], lo=[0.0], hi=[1.0])
    ambiguous = SimpleNamespace(status=4, nit=3, message="The problem is unbounded or infeasible")
    monkeypatch.setattr(lp_core, "linprog", _fake_linprog(ambiguous, SimpleNamespace(status=2, nit=1, message="infeasible")))
    assert solve_lp(lp).status == LpStatus.INFEASIBLE

    monkeypatch.setattr(lp_core, "linprog", _fake_linprog(ambiguous, SimpleNamespace(status=0, nit=1, message="ok", x=[0.0])))
    assert solve_lp(lp).status == LpStatus.UNBOUNDED


def test_violating_optimum_raises(monkeypatch):
    lp = LinearProgram(c=[1.0], lo=[0.0], hi=[1.0], a_in=[[1.0]], b_in=[0.5])
    monkeypatch.setattr(lp_core, "linprog", _fake_linprog(SimpleNamespace(status=0, nit=2, message="ok", x=[0.9])))
    with pytest.raises(LpNumericalError):
        solve_lp(lp)


def test_optimum_slightly_outside_box_is_clipped(monkeypatch):
    lp = LinearProgram(c=[-1.0, 1.0], lo=[0.0, 0.0], hi=[1.0, 1.0], a_in=[[1.0, 1.0]], b_in=[1.5])
    monkeypatch.setattr(lp_core, "linprog", _fake_linprog(SimpleNamespace(status=0, nit=4, message="ok", x=[-6.4e-10, 1.0 + 2e-10])))
    solution = solve_lp(lp)
    assert solution.is_optimal
    assert list(solution.x) == [0.0, 1.0]
    assert solution.objective == 1.0
    assert lp.within_box(solution.x, slack=0.0)


def test_optimum_far_outside_box_raises(monkeypatch):
    lp = LinearProgram(c=[1.0], lo=[0.0], hi=[1.0])
    monkeypatch.setattr(lp_core, "linprog", _fake_linprog(SimpleNamespace(status=0, nit=1, message="ok", x=[-1e-6])))
    with pytest.raises(LpNumericalError):
        solve_lp(lp)


@pytest.mark.parametrize("factor", [1e-3, 0.5, 2.0, 1e3])
@pytest.mark.parametrize("seed", range(5))
def test_objective_scales_with_cost(seed, factor):
    lp = _random_program(900 + seed, n=4, num_in=3, num_eq=1)
    scaled = LinearProgram(c=factor * lp.c, lo=lp.lo, hi=lp.hi, a_eq=lp.a_eq, b_eq=lp.b_eq, a_in=lp.a_in, b_in=lp.b_in)
    base, solution = solve_lp(lp), solve_lp(scaled)
    assert solution.is_optimal
    assert solution.objective == pytest.approx(factor * base.objective, rel=1e-8, abs=1e-8 * factor)
    assert lp.residual(solution.x) <= 1e-8
    assert lp.within_box(solution.x)
