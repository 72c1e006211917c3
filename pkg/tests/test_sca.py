import json

import numpy as np
import pytest
from scipy import linalg

from conftest import random_moments
from mrpdesign.admm import AdmmConfig
from mrpdesign.criteria import eval_F
from mrpdesign.exceptions import DegenerateDenominatorError, ValidationError
from mrpdesign.market_data import SpreadBasis
from mrpdesign.moments import LaggedMoments, build_criterion
from mrpdesign.sca import SolveReport, StepRule, default_start, design_mrp, step_armijo, step_diminishing
from mrpdesign.synth import make_cointegrated


@pytest.fixture
def problem():
    mk = make_cointegrated(n_assets=5, n_spreads=3, n_periods=400, seed=2)
    from mrpdesign.moments import estimate_moments

    m = estimate_moments(mk.spreads, 2)
    return m, SpreadBasis(mk.basis, 2.0)


def test_default_start_is_feasible_and_deterministic(problem):
    m, basis = problem
    w0 = default_start(m, basis)
    assert basis.leverage(w0) == pytest.approx(1.0)
    assert w0[np.argmax(np.abs(w0))] > 0
    np.testing.assert_array_equal(w0, default_start(m, basis))


@pytest.mark.parametrize("kind", ["pre", "por", "cro", "pcro"])
def test_report_fields(problem, kind):
    m, basis = problem
    spec = build_criterion(m, kind, eta=0.5)
    r = design_mrp(spec, m, basis, mu=0.1)
    assert r.criterion == kind
    assert r.converged and r.reason in ("stationary", "objective_stalled")
    assert r.feasibility_gap <= 1e-6 * max(1, basis.leverage_budget)
    assert r.objective == pytest.approx(r.u + 0.1 * r.v)
    assert r.objective == pytest.approx(eval_F(r.weights.w, spec, m, 0.1).f)
    np.testing.assert_allclose(r.weights.w_p, basis.basis @ r.weights.w)
    assert len(r.objective_trace) == r.iterations + 1 == len(r.leverage_trace)
    assert np.all(np.diff(r.objective_trace) <= 0)


def test_predictability_reaches_generalized_eigenvalue(problem):
    m, basis = problem
    spec = build_criterion(m, "pre")
    r = design_mrp(spec, m, basis, mu=0.0)
    lam = linalg.eigh(spec.h_matrix, m.m0, eigvals_only=True)[0]
    assert r.u == pytest.approx(lam, rel=1e-4)


def test_stationarity_certificate_on_stationary_exit(problem):
    m, basis = problem
    r = design_mrp(build_criterion(m, "cro"), m, basis, mu=1.0, rtol=1e-14, max_iter=2000)
    if r.reason == "stationary":
        assert r.stationarity_trace[-1] <= 1e-5 * max(1.0, np.linalg.norm(r.weights.w))


def test_determinism(problem):
    m, basis = problem
    spec = build_criterion(m, "pcro", eta=0.3)
    a = design_mrp(spec, m, basis, mu=0.5).to_json()
    b = design_mrp(spec, m, basis, mu=0.5).to_json()
    assert a == b


def test_json_round_trip(problem):
    m, basis = problem
    r = design_mrp(build_criterion(m, "por"), m, basis, mu=0.2)
    back = SolveReport.from_dict(json.loads(r.to_json()))
    assert back.to_dict() == r.to_dict()


@pytest.mark.parametrize("rule", [StepRule("constant", gamma0=0.3), StepRule("diminishing")])
def test_other_step_rules_keep_iterates_feasible(problem, rule):
    m, basis = problem
    r = design_mrp(build_criterion(m, "cro"), m, basis, mu=0.1, step=rule, max_iter=100)
    assert max(r.leverage_trace) <= basis.leverage_budget + 1e-8
    assert all(bt is None for bt in r.backtrack_trace)
    if rule.kind == "constant":
        assert set(r.gamma_trace) == {0.3}
    else:
        assert np.all(np.diff(r.gamma_trace) < 0)


def test_inputs_are_not_mutated(problem):
    m, basis = problem
    spec = build_criterion(m, "cro")
    w0 = default_start(m, basis) * 0.5
    before = w0.copy()
    design_mrp(spec, m, basis, w0=w0, max_iter=5)
    np.testing.assert_array_equal(w0, before)


def test_validation(problem):
    m, basis = problem
    spec = build_criterion(m, "cro")
    with pytest.raises(ValidationError, match="mu"):
        design_mrp(spec, m, basis, mu=-1.0)
    with pytest.raises(ValidationError, match="infeasible"):
        design_mrp(spec, m, basis, w0=default_start(m, basis) * 3)
    with pytest.raises(ValidationError, match="length"):
        design_mrp(spec, m, basis, w0=np.ones(2))
    with pytest.raises(ValidationError, match="columns"):
        design_mrp(spec, m, SpreadBasis.identity(2))


def test_degenerate_start_raises():
    m = LaggedMoments((np.diag([1.0, 0.0]), np.diag([0.5, 0.0])))
    with pytest.raises(DegenerateDenominatorError):
        design_mrp(build_criterion(m, "cro"), m, SpreadBasis.identity(2), w0=np.array([0.0, 0.5]))


def test_step_diminishing():
    assert step_diminishing(1.0, 0.5) == 0.5
    assert step_diminishing(0.5, 0.5) == 0.375
    with pytest.raises(ValidationError):
        step_diminishing(0.0, 0.5)
    with pytest.raises(ValidationError):
        step_diminishing(0.5, 1.0)


def test_step_armijo_on_quadratic():
    # f(x) = x^2 from x = 1 along d = -2: the full step overshoots to -1 (no decrease)
    res = step_armijo(np.array([1.0]), np.array([-2.0]), lambda x: float(x @ x), 1e-4, 0.5)
    assert res.accepted and res.gamma == 0.5 and res.backtracks == 1 and res.f_new == 0.0
    # ascent direction: never accepted
    res = step_armijo(np.array([1.0]), np.array([1.0]), lambda x: float(x @ x), 1e-4, 0.5, max_backtracks=5)
    assert not res.accepted and res.gamma == 0.5**5
    with pytest.raises(ValidationError, match="zero"):
        step_armijo(np.ones(1), np.zeros(1), lambda x: 0.0, 0.1, 0.5)


def test_step_rule_validation():
    with pytest.raises(ValidationError):
        StepRule("newton")
    with pytest.raises(ValidationError):
        StepRule(gamma0=1.5)
    with pytest.raises(ValidationError):
        StepRule(alpha=1.0)


def test_random_problems_descend(rng):
    for _ in range(5):
        m = random_moments(rng, 4, p=2)
        basis = SpreadBasis(rng.standard_normal((6, 4)), 3.0)
        r = design_mrp(build_criterion(m, "pcro"), m, basis, mu=1.0, inner=AdmmConfig(rho=2.0), max_iter=100)
        assert np.all(np.diff(r.objective_trace) <= 0)
        assert max(r.leverage_trace) <= 3.0 + 1e-8
