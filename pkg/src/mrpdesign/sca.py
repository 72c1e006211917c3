"""Successive convex approximation for the leverage-constrained design problem.

At each outer iteration the objective is replaced by the quadratic model of
:mod:`mrpdesign.surrogate`, the model is minimized over
``{w : ||Bw||_1 <= L}`` with ADMM, and the iterate moves toward the model
minimizer ``w_hat`` with a step-size ``gamma`` in (0, 1]. Every iterate is a
convex combination of feasible points, so feasibility is preserved.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np
from scipy import linalg

from .admm import AdmmConfig, solve_subproblem
from .criteria import PortfolioWeights, eval_F, portfolio_variance
from .exceptions import DegenerateDenominatorError, NumericalError, ValidationError
from .surrogate import build_surrogate, default_tau

__all__ = [
    "StepRule",
    "SolveReport",
    "LineSearchResult",
    "design_mrp",
    "default_start",
    "step_diminishing",
    "step_armijo",
    "MAX_BACKTRACKS",
]

log = logging.getLogger(__name__)

MAX_BACKTRACKS = 60
STALL_WINDOW = 3


@dataclass(frozen=True)
class StepRule:
    """Step-size policy: ``constant``, ``diminishing`` or ``armijo``."""

    kind: str = "armijo"
    gamma0: float = 1.0
    theta: float = 0.5
    alpha: float = 1e-4
    beta: float = 0.5

    def __post_init__(self):
        if self.kind not in ("constant", "diminishing", "armijo"):
            raise ValidationError(f"unknown step rule {self.kind!r}")
        if not 0 < self.gamma0 <= 1:
            raise ValidationError(f"gamma0 must be in (0, 1], got {self.gamma0}")
        if not 0 < self.theta < 1:
            raise ValidationError(f"theta must be in (0, 1), got {self.theta}")
        if self.kind == "armijo":
            if self.alpha is None or self.beta is None:
                raise ValidationError("armijo rule needs alpha and beta")
            if not (0 < self.alpha < 1 and 0 < self.beta < 1):
                raise ValidationError(f"alpha, beta must lie in (0, 1), got {self.alpha}, {self.beta}")


class LineSearchResult(NamedTuple):
    gamma: float
    f_new: float
    accepted: bool
    backtracks: int


def step_diminishing(gamma, theta):
    """Next step of the rule ``gamma <- gamma (1 - theta gamma)``."""
    gamma, theta = float(gamma), float(theta)
    if not 0 < gamma <= 1:
        raise ValidationError(f"gamma must be in (0, 1], got {gamma}")
    if not 0 < theta < 1:
        raise ValidationError(f"theta must be in (0, 1), got {theta}")
    return gamma * (1.0 - theta * gamma)


def step_armijo(w, direction, f_eval: Callable, alpha, beta, f0=None, max_backtracks=MAX_BACKTRACKS):
    """Backtracking search for the largest ``beta**l`` with sufficient decrease.

    Accepts ``gamma = beta**l`` once
    ``f(w + gamma d) - f(w) <= -alpha * gamma * ||d||^2``. A trial point where
    ``f_eval`` raises a degeneracy error counts as a rejection. If no ``l`` up
    to ``max_backtracks`` passes, ``beta**max_backtracks`` is returned with
    ``accepted=False``.
    """
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise ValidationError(f"alpha, beta must lie in (0, 1), got {alpha}, {beta}")
    w = np.asarray(w, dtype=float)
    d = np.asarray(direction, dtype=float)
    dd = float(d @ d)
    if dd == 0:
        raise ValidationError("line search direction is zero")
    if f0 is None:
        f0 = f_eval(w)
    gamma = 1.0
    f_new = math.nan
    for l in range(max_backtracks + 1):
        gamma = beta**l
        try:
            f_new = f_eval(w + gamma * d)
        except DegenerateDenominatorError:
            continue
        if f_new - f0 <= -alpha * gamma * dd:
            return LineSearchResult(gamma, f_new, True, l)
    return LineSearchResult(gamma, f_new, False, max_backtracks)


@dataclass
class SolveReport:
    weights: PortfolioWeights
    objective_trace: list
    gamma_trace: list
    inner_iters: list
    stationarity_trace: list
    converged: bool
    reason: str
    feasibility_gap: float
    u: float
    v: float
    variance: float
    leverage: float
    mu: float
    criterion: str
    tau: float
    tau_trace: list = field(default_factory=list)
    leverage_trace: list = field(default_factory=list)
    backtrack_trace: list = field(default_factory=list)  # None where no Armijo step was accepted
    config: dict = field(default_factory=dict)

    @property
    def iterations(self):
        return len(self.gamma_trace)

    @property
    def objective(self):
        return self.objective_trace[-1]

    def to_dict(self):
        return {
            "criterion": self.criterion,
            "mu": self.mu,
            "tau": self.tau,
            "converged": self.converged,
            "reason": self.reason,
            "iterations": self.iterations,
            "objective": self.objective,
            "u": self.u,
            "v": self.v,
            "variance": self.variance,
            "leverage": self.leverage,
            "feasibility_gap": self.feasibility_gap,
            "w": self.weights.w.tolist(),
            "w_p": None if self.weights.w_p is None else self.weights.w_p.tolist(),
            "objective_trace": list(self.objective_trace),
            "gamma_trace": list(self.gamma_trace),
            "inner_iters": list(self.inner_iters),
            "stationarity_trace": list(self.stationarity_trace),
            "tau_trace": list(self.tau_trace),
            "leverage_trace": list(self.leverage_trace),
            "backtrack_trace": list(self.backtrack_trace),
            "config": self.config,
        }

    def to_json(self, **kw):
        kw.setdefault("indent", 2)
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, doc):
        wp = doc.get("w_p")
        return cls(
            weights=PortfolioWeights(doc["w"], wp),
            objective_trace=list(doc["objective_trace"]),
            gamma_trace=list(doc["gamma_trace"]),
            inner_iters=list(doc["inner_iters"]),
            stationarity_trace=list(doc["stationarity_trace"]),
            converged=bool(doc["converged"]),
            reason=doc["reason"],
            feasibility_gap=float(doc["feasibility_gap"]),
            u=float(doc["u"]),
            v=float(doc["v"]),
            variance=float(doc["variance"]),
            leverage=float(doc["leverage"]),
            mu=float(doc["mu"]),
            criterion=doc["criterion"],
            tau=float(doc["tau"]),
            tau_trace=list(doc.get("tau_trace", [])),
            leverage_trace=list(doc.get("leverage_trace", [])),
            backtrack_trace=list(doc.get("backtrack_trace", [])),
            config=dict(doc.get("config", {})),
        )


def default_start(moments, basis):
    """Leading eigenvector of ``M0`` rescaled so that ``||B w0||_1 = L/2``."""
    evals, evecs = linalg.eigh(moments[0])
    w0 = evecs[:, -1]
    k = int(np.argmax(np.abs(w0)))
    if w0[k] < 0:
        w0 = -w0
    lev = float(np.abs(basis.basis @ w0).sum())
    return w0 * (0.5 * basis.leverage_budget / lev)


def _inner_config(base, model, BtB, n, scale):
    # rho follows the curvature of the model so the ADMM splitting stays balanced
    rho = base.rho * max(2.0 * float(np.trace(model.a)) / float(np.trace(BtB)), 1e-12)
    ptol, dtol = base.tolerances(n)
    factor = max(min(1.0, scale), 1e-4)
    return replace(base, rho=rho, primal_tol=ptol * factor, dual_tol=dtol * factor * rho)


def design_mrp(spec, moments, basis, mu=0.0, tau=None, step=None, inner=None, w0=None,
               max_iter=500, rtol=1e-8, stationarity_tol=1e-5, adapt_tau=True):
    """Minimize ``U(w) + mu V(w)`` subject to ``||B w||_1 <= L``.

    Stops when the relative objective change stays below ``rtol`` for three
    consecutive iterations, when the model minimizer coincides with the
    iterate (``||w_hat - w|| <= stationarity_tol * max(1, ||w||)``), or at
    ``max_iter``.

    With ``adapt_tau`` (Armijo rule only) the proximal weight is halved after
    a full step and doubled for every extra backtrack, clipped to
    ``[1e-3, 1]`` times its initial value. The upper clip keeps the
    stationarity gap comparable across iterations.
    """
    mu = float(mu)
    if not mu >= 0 or not math.isfinite(mu):
        raise ValidationError(f"mu must be a finite value >= 0, got {mu}")
    step = step or StepRule()
    inner = inner or AdmmConfig()
    n = moments.n_spreads
    if basis.n_spreads != n:
        raise ValidationError(f"basis has {basis.n_spreads} columns but moments are {n}-dimensional")
    L = basis.leverage_budget
    BtB = basis.basis.T @ basis.basis
    feas_tol = 1e-8 * max(1.0, L)

    if w0 is None:
        w = default_start(moments, basis)
    else:
        w = np.array(getattr(w0, "w", w0), dtype=float).ravel()
        if w.shape[0] != n:
            raise ValidationError(f"w0 has length {w.shape[0]}, expected {n}")
        if basis.leverage(w) > L + feas_tol:
            raise ValidationError(f"w0 is infeasible: ||B w0||_1 = {basis.leverage(w):.6g} > L = {L:.6g}")

    def objective(x):
        return eval_F(x, spec, moments, mu).f

    f = objective(w)
    if tau is None:
        tau = default_tau(moments, w, mu)
    tau = float(tau)
    tau_lo, tau_hi = tau * 1e-3, tau
    adapt_tau = adapt_tau and step.kind == "armijo" and tau > 0
    tau0 = tau

    trace_f, trace_g, trace_inner, trace_gap, trace_tau = [f], [], [], [], []
    trace_lev, trace_bt = [basis.leverage(w)], []
    gamma = step.gamma0
    state = None
    scale = 1.0
    stall = 0
    converged, reason = False, "max_iter"

    for k in range(int(max_iter)):
        try:
            model = build_surrogate(w, spec, moments, mu, tau)
        except DegenerateDenominatorError as exc:
            exc.trace = list(trace_f)
            raise
        w_hat, state = solve_subproblem(model.a, model.b, basis, _inner_config(inner, model, BtB, n, scale), warm=state)
        d = w_hat - w
        gap = float(np.linalg.norm(d))
        trace_gap.append(gap)
        trace_inner.append(state.iterations)
        scale = gap
        if gap <= stationarity_tol * max(1.0, float(np.linalg.norm(w))):
            converged, reason = True, "stationary"
            break

        f_new = None
        backtracks = None
        if step.kind == "armijo":
            ls = step_armijo(w, d, objective, step.alpha, step.beta, f0=f)
            if ls.accepted:
                gamma_k, f_new, backtracks = ls.gamma, ls.f_new, ls.backtracks
            else:
                gamma_k = gamma
                gamma = step_diminishing(gamma, step.theta)
                log.debug("iteration %d: Armijo search failed, diminishing step %.3g", k, gamma_k)
        elif step.kind == "diminishing":
            gamma_k = gamma
            gamma = step_diminishing(gamma, step.theta)
        else:
            gamma_k = step.gamma0

        w_new = w + gamma_k * d
        if f_new is None:
            try:
                f_new = objective(w_new)
            except DegenerateDenominatorError as exc:
                if step.kind != "armijo":
                    exc.trace = list(trace_f)
                    raise
                f_new = math.inf
            if step.kind == "armijo" and f_new > f:
                # neither the search nor the fallback step decreases F
                converged, reason = True, "no_descent"
                break

        trace_tau.append(tau)
        if adapt_tau:
            if ls.accepted and ls.backtracks == 0:
                tau = max(0.5 * tau, tau_lo)
            elif ls.accepted and ls.backtracks > 1:
                tau = min(tau * 2.0 ** (ls.backtracks - 1), tau_hi)
            elif not ls.accepted:
                tau = min(tau * 10.0, tau_hi)

        w = w_new
        trace_g.append(gamma_k)
        trace_f.append(f_new)
        trace_lev.append(basis.leverage(w))
        trace_bt.append(backtracks)
        if abs(f_new - f) <= rtol * abs(f):
            stall += 1
        else:
            stall = 0
        f = f_new
        if stall >= STALL_WINDOW:
            converged, reason = True, "objective_stalled"
            break

    if not np.all(np.isfinite(trace_f)):
        raise NumericalError("objective became non-finite")
    value = eval_F(w, spec, moments, mu)
    lev = basis.leverage(w)
    return SolveReport(
        weights=PortfolioWeights.from_basis(w, basis),
        objective_trace=trace_f,
        gamma_trace=trace_g,
        inner_iters=trace_inner,
        stationarity_trace=trace_gap,
        converged=converged,
        reason=reason,
        feasibility_gap=lev - L,
        u=value.u,
        v=value.v,
        variance=portfolio_variance(w, moments),
        leverage=lev,
        mu=mu,
        criterion=spec.kind.short,
        tau=tau0,
        tau_trace=trace_tau,
        leverage_trace=trace_lev,
        backtrack_trace=trace_bt,
        config={"step": step.__dict__.copy(), "admm": inner.__dict__.copy(), "max_iter": int(max_iter),
                "rtol": rtol, "stationarity_tol": stationarity_tol, "adapt_tau": bool(adapt_tau)},
    )
