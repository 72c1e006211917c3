"""Synthetic cointegrated price panels.

``N`` stationary AR(1) spreads are embedded into ``M`` log-price series via a
random basis ``B``; the remaining ``M - N`` directions follow random walks, so
``B' y_t`` recovers the stationary spreads exactly.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .exceptions import ValidationError

__all__ = ["SyntheticMarket", "make_cointegrated", "business_days"]


@dataclass(frozen=True)
class SyntheticMarket:
    dates: tuple
    tickers: tuple
    prices: np.ndarray
    basis: np.ndarray
    spreads: np.ndarray
    ar_coef: np.ndarray


def business_days(start, n):
    out = []
    day = start
    while len(out) < n:
        if day.weekday() < 5:
            out.append(day)
        day += dt.timedelta(days=1)
    return tuple(out)


def make_cointegrated(n_assets=6, n_spreads=3, n_periods=750, ar_coef=0.8, noise=0.01,
                      walk_noise=0.02, seed=0, start=dt.date(2016, 1, 4)):
    """Simulate a cointegrated system; deterministic for a given ``seed``.

    ``ar_coef`` is one AR(1) coefficient shared by all spreads or one per
    spread; each must lie in ``(-1, 1)``.
    """
    M, N, T = int(n_assets), int(n_spreads), int(n_periods)
    if not 1 <= N <= M:
        raise ValidationError(f"need 1 <= n_spreads <= n_assets, got N={N}, M={M}")
    if T < 3:
        raise ValidationError(f"n_periods must be >= 3, got {T}")
    phi = np.broadcast_to(np.asarray(ar_coef, dtype=float), (N,)).copy()
    if np.any(np.abs(phi) >= 1):
        raise ValidationError(f"AR coefficients must satisfy |phi| < 1 for stationarity, got {phi.tolist()}")
    if not (noise > 0 and walk_noise >= 0):
        raise ValidationError("noise must be positive and walk_noise non-negative")

    rng = np.random.default_rng(seed)
    B = rng.standard_normal((M, N))
    B /= np.abs(B).sum(axis=0)

    # mildly correlated innovations
    C = np.eye(N) + 0.3 * rng.uniform(-1, 1, (N, N))
    chol = np.linalg.cholesky(C @ C.T / np.diag(C @ C.T).mean())
    eps = noise * rng.standard_normal((T, N)) @ chol.T
    s = np.empty((T, N))
    s[0] = eps[0] / np.sqrt(1 - phi**2)
    for t in range(1, T):
        s[t] = phi * s[t - 1] + eps[t]

    # y = B (B'B)^{-1} s + (I - P_B) x, with x a random walk
    coef = np.linalg.solve(B.T @ B, B.T)
    level = np.log(rng.uniform(20, 200, M))
    walk = np.cumsum(walk_noise * rng.standard_normal((T, M)), axis=0) + level
    walk -= (walk @ coef.T) @ B.T
    y = s @ coef + walk
    prices = np.exp(y)

    tickers = tuple(f"A{m + 1:02d}" for m in range(M))
    return SyntheticMarket(business_days(start, T), tickers, prices, B, s, phi)
