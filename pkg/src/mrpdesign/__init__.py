"""Leverage-constrained mean-reverting portfolio design.

The functional pipeline is ``load_panel`` -> ``build_spreads`` ->
``estimate_moments`` -> ``build_criterion`` -> ``design_mrp`` ->
``run_backtest``; :class:`MeanRevertingPortfolio` wraps it as a
scikit-learn estimator.
"""

from .admm import AdmmConfig, AdmmState, solve_subproblem, subproblem_objective
from .backtest import BacktestReport, Trade, TradeConfig, rolling_zscore, run_backtest, sharpe_ratio, simulate_spread
from .criteria import ObjectiveValue, PortfolioWeights, eval_F, eval_U, eval_V, grad_F, portfolio_variance, ratios
from .estimator import MeanRevertingPortfolio
from .exceptions import (
    DegenerateDenominatorError,
    DegenerateStdWarning,
    MRPError,
    NumericalError,
    ProximalWarning,
    SingularMomentWarning,
    ValidationError,
)
from .market_data import AssetPanel, SpreadBasis, SpreadSeries, build_spreads, load_basis, load_panel
from .moments import CriterionKind, CriterionSpec, LaggedMoments, build_criterion, estimate_moments
from .projection import ProjectionResult, project_l1
from .sca import SolveReport, StepRule, design_mrp, step_armijo, step_diminishing
from .surrogate import QuadraticModel, build_surrogate, eval_surrogate
from .synth import make_cointegrated

__version__ = "0.1.0"

__all__ = [
    "AdmmConfig", "AdmmState", "solve_subproblem", "subproblem_objective",
    "BacktestReport", "Trade", "TradeConfig", "rolling_zscore", "run_backtest", "sharpe_ratio", "simulate_spread",
    "ObjectiveValue", "PortfolioWeights", "eval_F", "eval_U", "eval_V", "grad_F", "portfolio_variance", "ratios",
    "MeanRevertingPortfolio",
    "DegenerateDenominatorError", "DegenerateStdWarning", "MRPError", "NumericalError", "ProximalWarning",
    "SingularMomentWarning", "ValidationError",
    "AssetPanel", "SpreadBasis", "SpreadSeries", "build_spreads", "load_basis", "load_panel",
    "CriterionKind", "CriterionSpec", "LaggedMoments", "build_criterion", "estimate_moments",
    "ProjectionResult", "project_l1",
    "SolveReport", "StepRule", "design_mrp", "step_armijo", "step_diminishing",
    "QuadraticModel", "build_surrogate", "eval_surrogate",
    "make_cointegrated",
]
