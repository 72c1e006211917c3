"""Scikit-learn style wrapper around the design pipeline.

``fit`` takes a ``(T, M)`` array of log-prices, forms spreads with the basis,
estimates lagged moments and solves the design problem. ``transform`` maps
log-prices to the portfolio value ``z_t = w_p' y_t``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .admm import AdmmConfig
from .criteria import eval_F
from .exceptions import ValidationError
from .market_data import SpreadBasis
from .moments import build_criterion, estimate_moments
from .sca import StepRule, design_mrp

__all__ = ["MeanRevertingPortfolio"]


class MeanRevertingPortfolio(TransformerMixin, BaseEstimator):
    """Leverage-constrained mean-reverting portfolio.

    Parameters
    ----------
    criterion : {"pre", "por", "cro", "pcro"}, default="pre"
        Mean-reversion statistic to minimize.
    mu : float, default=0.0
        Weight of the variance reward ``1 / w'M0w``; larger values favour
        more volatile (more tradable) spreads.
    lag_order : int, default=1
        Highest autocovariance lag ``p``.
    eta : float, default=1.0
        Weight on lags ``2..p`` for the penalized crossing statistic.
    leverage : float, default=1.0
        Budget ``L`` on the gross asset exposure ``||B w||_1``.
    basis : array-like of shape (n_assets, n_spreads), default=None
        Cointegration basis. ``None`` treats each input column as a spread.
    tau : float, default=None
        Proximal weight of the surrogate; ``None`` picks a scale-aware value.
    step : {"armijo", "diminishing", "constant"}, default="armijo"
        Outer step-size rule.
    rho : float, default=1.0
        Base ADMM penalty.
    max_iter : int, default=500
        Outer iteration cap.
    rtol : float, default=1e-8
        Relative objective-change tolerance.

    Attributes
    ----------
    basis_ : SpreadBasis
    moments_ : LaggedMoments
    criterion_ : CriterionSpec
    weights_ : ndarray of shape (n_spreads,)
    asset_weights_ : ndarray of shape (n_assets,)
    report_ : SolveReport
    n_features_in_ : int
    """

    def __init__(self, criterion="pre", mu=0.0, lag_order=1, eta=1.0, leverage=1.0, basis=None,
                 tau=None, step="armijo", rho=1.0, max_iter=500, rtol=1e-8):
        self.criterion = criterion
        self.mu = mu
        self.lag_order = lag_order
        self.eta = eta
        self.leverage = leverage
        self.basis = basis
        self.tau = tau
        self.step = step
        self.rho = rho
        self.max_iter = max_iter
        self.rtol = rtol

    def _make_basis(self, n_features):
        if self.basis is None:
            return SpreadBasis.identity(n_features, self.leverage)
        B = np.asarray(self.basis, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if B.shape[0] != n_features:
            raise ValidationError(f"basis has {B.shape[0]} rows but X has {n_features} columns")
        return SpreadBasis(B, self.leverage)

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64, ensure_min_samples=3)
        if self.mu is None or not float(self.mu) >= 0:
            raise ValidationError(f"mu must be >= 0, got {self.mu}")
        basis = self._make_basis(X.shape[1])
        moments = estimate_moments(X @ basis.basis, self.lag_order)
        spec = build_criterion(moments, self.criterion, eta=self.eta)
        report = design_mrp(spec, moments, basis, mu=self.mu, tau=self.tau, step=StepRule(self.step),
                            inner=AdmmConfig(rho=self.rho), max_iter=self.max_iter, rtol=self.rtol)
        self.n_features_in_ = X.shape[1]
        self.basis_ = basis
        self.moments_ = moments
        self.criterion_ = spec
        self.report_ = report
        self.weights_ = np.array(report.weights.w)
        self.asset_weights_ = np.array(report.weights.w_p)
        return self

    def transform(self, X):
        """Portfolio value ``X @ w_p`` as a ``(T, 1)`` column."""
        check_is_fitted(self, "asset_weights_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(f"X has {X.shape[1]} columns, estimator was fitted with {self.n_features_in_}")
        return (X @ self.asset_weights_).reshape(-1, 1)

    def score(self, X, y=None):
        """Negative objective ``-(U + mu V)`` of the fitted weights on ``X``.

        Moments are re-estimated on ``X``, so this measures out-of-sample
        mean reversion of the designed portfolio (higher is better).
        """
        check_is_fitted(self, "asset_weights_")
        X = check_array(X, dtype=np.float64, ensure_min_samples=3)
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(f"X has {X.shape[1]} columns, estimator was fitted with {self.n_features_in_}")
        moments = estimate_moments(X @ self.basis_.basis, self.lag_order)
        spec = build_criterion(moments, self.criterion, eta=self.eta)
        return -eval_F(self.weights_, spec, moments, self.mu).f
