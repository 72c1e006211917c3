import numpy as np
import pytest

from mrpdesign.admm import AdmmConfig, solve_subproblem, subproblem_objective
from mrpdesign.exceptions import NumericalError, ValidationError
from mrpdesign.market_data import SpreadBasis


def random_instance(rng, n, m=None):
    m = m or n + 2
    q = rng.standard_normal((n, n))
    a = q @ q.T / n + 0.1 * np.eye(n)
    return a, rng.normal(0, 3, n), SpreadBasis(rng.standard_normal((m, n)), rng.uniform(0.5, 2))


def test_unconstrained_minimum_inside_ball():
    w, state = solve_subproblem(np.eye(2), np.zeros(2), SpreadBasis.identity(2, 1.0))
    np.testing.assert_allclose(w, 0.0, atol=1e-12)
    assert state.converged


def test_boundary_solution_by_kkt():
    # unconstrained optimum [2, 0] is outside the unit ball; the answer is e1
    w, state = solve_subproblem(np.eye(2), np.array([-4.0, 0.0]), SpreadBasis.identity(2, 1.0))
    np.testing.assert_allclose(w, [1.0, 0.0], atol=1e-7)
    assert state.converged


def test_output_is_feasible_and_z_stays_in_ball(rng):
    for _ in range(20):
        a, b, basis = random_instance(rng, 4)
        w, state = solve_subproblem(a, b, basis)
        assert basis.leverage(w) <= basis.leverage_budget * (1 + 1e-14)
        assert np.abs(state.z).sum() <= basis.leverage_budget * (1 + 1e-12)
        ptol, _ = AdmmConfig().tolerances(4)
        assert state.primal_residuals[-1] <= ptol


def test_kkt_optimality_against_perturbations(rng):
    a, b, basis = random_instance(rng, 3)
    w, _ = solve_subproblem(a, b, basis)
    f = subproblem_objective(a, b, w)
    for _ in range(200):
        x = w + rng.normal(0, 1e-2, 3)
        lev = basis.leverage(x)
        if lev > basis.leverage_budget:
            x *= basis.leverage_budget / lev
        assert subproblem_objective(a, b, x) >= f - 1e-7


def test_warm_start_converges_faster(rng):
    a, b, basis = random_instance(rng, 5)
    _, cold = solve_subproblem(a, b, basis)
    _, warm = solve_subproblem(a, b + 1e-4, basis, warm=cold)
    assert warm.iterations < cold.iterations


def test_adaptive_penalty_agrees(rng):
    a, b, basis = random_instance(rng, 5)
    w1, _ = solve_subproblem(a, b, basis)
    w2, s2 = solve_subproblem(a, b, basis, AdmmConfig(rho=100.0, adaptive=True))
    assert s2.converged
    assert subproblem_objective(a, b, w2) == pytest.approx(subproblem_objective(a, b, w1), rel=1e-6, abs=1e-9)


def test_iteration_cap_is_reported_not_raised(rng):
    a, b, basis = random_instance(rng, 5)
    w, state = solve_subproblem(a, b, basis, AdmmConfig(max_iters=2))
    assert state.iterations == 2 and not state.converged
    assert np.all(np.isfinite(w))


def test_indefinite_system_raises():
    with pytest.raises(NumericalError, match="lambda_min"):
        solve_subproblem(-np.eye(2), np.zeros(2), SpreadBasis.identity(2, 1.0))


def test_validation():
    with pytest.raises(ValidationError):
        AdmmConfig(rho=0)
    with pytest.raises(ValidationError):
        AdmmConfig(max_iters=0)
    with pytest.raises(ValidationError):
        AdmmConfig(primal_tol=-1.0)
    with pytest.raises(ValidationError, match="shape"):
        solve_subproblem(np.eye(3), np.zeros(2), SpreadBasis.identity(2))
    with pytest.raises(ValidationError, match="SpreadBasis"):
        solve_subproblem(np.eye(2), np.zeros(2), np.eye(2))
