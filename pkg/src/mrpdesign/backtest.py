"""Threshold trading simulation on a designed portfolio spread.

The portfolio value ``z_t = w_p' y_t`` (log-prices) is standardized with a
rolling window that ends at ``t``. The strategy goes short when the z-score
reaches ``+open_threshold`` and long when it reaches ``-open_threshold``, and
exits once the z-score comes back to within ``close_threshold`` of zero.
Profit is measured on log-price differences of the spread and scaled so that
the position deploys the full leverage budget.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .criteria import PortfolioWeights
from .exceptions import DegenerateStdWarning, ValidationError
from .market_data import AssetPanel, SpreadBasis

__all__ = [
    "TradeConfig",
    "Trade",
    "BacktestReport",
    "run_backtest",
    "simulate_spread",
    "rolling_zscore",
    "sharpe_ratio",
    "write_cumulative_pnl",
    "read_cumulative_pnl",
]

STD_FLOOR = 1e-15
LONG, FLAT, SHORT = 1, 0, -1
_SIDE_NAMES = {LONG: "long", SHORT: "short"}


@dataclass(frozen=True)
class TradeConfig:
    """Trading rule parameters; thresholds are in z-score units."""

    open_threshold: float = 1.0
    close_threshold: float = 0.0
    lookback: int = 60
    annualization: float = 252.0

    def __post_init__(self):
        if not (self.open_threshold > 0 and math.isfinite(self.open_threshold)):
            raise ValidationError(f"open_threshold must be positive, got {self.open_threshold}")
        if not 0 <= self.close_threshold < self.open_threshold:
            raise ValidationError(
                f"need 0 <= close_threshold < open_threshold, got {self.close_threshold}, {self.open_threshold}"
            )
        if int(self.lookback) != self.lookback or self.lookback < 2:
            raise ValidationError(f"lookback must be an integer >= 2, got {self.lookback}")
        if not self.annualization > 0:
            raise ValidationError(f"annualization must be positive, got {self.annualization}")
        object.__setattr__(self, "lookback", int(self.lookback))


class Trade(NamedTuple):
    entry: int
    exit: int | None  # None while the position is still open
    side: str
    entry_value: float
    exit_value: float
    pnl: float


@dataclass
class BacktestReport:
    trades: list
    cumulative_pnl: np.ndarray
    positions: np.ndarray
    zscores: np.ndarray
    roi: float
    sharpe: float
    sharpe_degenerate: bool
    open_trade: Trade | None
    skipped: list
    leverage_budget: float
    scale: float
    dates: tuple = ()
    config: dict = field(default_factory=dict)

    @property
    def num_trades(self):
        return len(self.trades)

    @property
    def open_mark(self):
        return 0.0 if self.open_trade is None else self.open_trade.pnl

    @property
    def total_pnl(self):
        return float(self.cumulative_pnl[-1])

    def to_dict(self):
        def trade(t):
            return None if t is None else t._asdict()

        return {
            "num_trades": self.num_trades,
            "roi": self.roi,
            "sharpe": self.sharpe,
            "sharpe_degenerate": self.sharpe_degenerate,
            "total_pnl": self.total_pnl,
            "open_mark": self.open_mark,
            "leverage_budget": self.leverage_budget,
            "scale": self.scale,
            "trades": [trade(t) for t in self.trades],
            "open_trade": trade(self.open_trade),
            "skipped": list(self.skipped),
            "cumulative_pnl": self.cumulative_pnl.tolist(),
            "positions": self.positions.tolist(),
            "zscores": [None if not math.isfinite(x) else x for x in self.zscores.tolist()],
            "dates": [d.isoformat() if hasattr(d, "isoformat") else str(d) for d in self.dates],
            "config": self.config,
        }

    def to_json(self, **kw):
        kw.setdefault("indent", 2)
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, doc):
        def trade(t):
            return None if t is None else Trade(**t)

        return cls(
            trades=[trade(t) for t in doc["trades"]],
            cumulative_pnl=np.asarray(doc["cumulative_pnl"], dtype=float),
            positions=np.asarray(doc["positions"], dtype=int),
            zscores=np.array([math.nan if x is None else x for x in doc["zscores"]], dtype=float),
            roi=float(doc["roi"]),
            sharpe=float(doc["sharpe"]),
            sharpe_degenerate=bool(doc["sharpe_degenerate"]),
            open_trade=trade(doc["open_trade"]),
            skipped=list(doc["skipped"]),
            leverage_budget=float(doc["leverage_budget"]),
            scale=float(doc["scale"]),
            dates=tuple(doc.get("dates", ())),
            config=dict(doc.get("config", {})),
        )


def _sharpe(returns, annualization):
    r = np.asarray(returns, dtype=float).ravel()
    if r.size < 2:
        raise ValidationError(f"Sharpe ratio needs at least 2 observations, got {r.size}")
    sd = float(np.std(r, ddof=1))
    if sd < STD_FLOOR:
        return 0.0, True
    return float(np.mean(r)) / sd * math.sqrt(annualization), False


def sharpe_ratio(returns, annualization=252.0):
    """Annualized ``mean / sample std`` of per-period returns.

    A (numerically) constant series has no defined ratio; 0.0 is returned
    and a :class:`DegenerateStdWarning` is emitted.
    """
    value, degenerate = _sharpe(returns, annualization)
    if degenerate:
        warnings.warn("returns have zero standard deviation; Sharpe ratio reported as 0",
                      DegenerateStdWarning, stacklevel=2)
    return value


def rolling_zscore(z, lookback):
    """Z-score of ``z[t]`` against the window ``z[t-lookback+1 .. t]``.

    Entries before the first full window, and windows with standard
    deviation below ``1e-15``, are NaN.
    """
    z = np.asarray(z, dtype=float).ravel()
    out = np.full(z.shape, np.nan)
    if z.size < lookback:
        return out
    win = sliding_window_view(z, lookback)
    mean = win.mean(axis=1)
    sd = win.std(axis=1, ddof=1)
    ok = sd >= STD_FLOOR
    idx = np.arange(lookback - 1, z.size)
    out[idx[ok]] = (z[idx[ok]] - mean[ok]) / sd[ok]
    return out


def simulate_spread(z, cfg=None, scale=1.0, leverage_budget=1.0, dates=()):
    """Trade a single spread series ``z``.

    ``scale`` converts a one-unit spread move into P&L (``L / ||w_p||_1`` when
    called from :func:`run_backtest`). Returns a :class:`BacktestReport`.
    """
    cfg = cfg or TradeConfig()
    z = np.asarray(z, dtype=float).ravel()
    if not np.all(np.isfinite(z)):
        raise ValidationError("spread contains non-finite values")
    T = z.size
    if T < cfg.lookback + 2:
        raise ValidationError(f"need at least lookback + 2 = {cfg.lookback + 2} periods, got {T}")
    score = rolling_zscore(z, cfg.lookback)

    pos = FLAT
    entry = None
    positions = np.zeros(T, dtype=int)
    pnl = np.zeros(T)
    trades, skipped = [], []
    for t in range(T):
        if t > 0:
            pnl[t] = pos * (z[t] - z[t - 1]) * scale
        if t >= cfg.lookback - 1:
            s = score[t]
            if math.isnan(s):
                skipped.append(t)
            else:
                if (pos == SHORT and s <= cfg.close_threshold) or (pos == LONG and s >= -cfg.close_threshold):
                    trades.append(Trade(entry, t, _SIDE_NAMES[pos], float(z[entry]), float(z[t]),
                                        float(pos * (z[t] - z[entry]) * scale)))
                    pos, entry = FLAT, None
                if pos == FLAT:
                    if s >= cfg.open_threshold:
                        pos, entry = SHORT, t
                    elif s <= -cfg.open_threshold:
                        pos, entry = LONG, t
        positions[t] = pos

    open_trade = None
    if pos != FLAT:
        open_trade = Trade(entry, None, _SIDE_NAMES[pos], float(z[entry]), float(z[-1]),
                           float(pos * (z[-1] - z[entry]) * scale))

    cumulative = np.cumsum(pnl)
    returns = pnl[cfg.lookback:] / leverage_budget
    sharpe, degenerate = _sharpe(returns, cfg.annualization)
    return BacktestReport(
        trades=trades,
        cumulative_pnl=cumulative,
        positions=positions,
        zscores=score,
        roi=float(cumulative[-1]) / leverage_budget,
        sharpe=sharpe,
        sharpe_degenerate=degenerate,
        open_trade=open_trade,
        skipped=skipped,
        leverage_budget=float(leverage_budget),
        scale=float(scale),
        dates=tuple(dates),
        config=dict(cfg.__dict__),
    )


def run_backtest(weights, panel, basis, cfg=None):
    """Backtest the portfolio ``w_p = B w`` on the log-prices of ``panel``."""
    if not isinstance(panel, AssetPanel):
        raise ValidationError("panel must be an AssetPanel")
    if not isinstance(basis, SpreadBasis):
        raise ValidationError("basis must be a SpreadBasis")
    if not isinstance(weights, PortfolioWeights):
        weights = PortfolioWeights.from_basis(weights, basis)
    w_p = weights.w_p if weights.w_p is not None else basis.asset_weights(weights.w)
    if w_p.shape[0] != panel.n_assets:
        raise ValidationError(f"asset weights have length {w_p.shape[0]}, panel has {panel.n_assets} assets")
    gross = float(np.abs(w_p).sum())
    if gross == 0:
        raise ValidationError("portfolio weights are all zero")
    L = basis.leverage_budget
    z = panel.log_prices @ w_p
    return simulate_spread(z, cfg, scale=L / gross, leverage_budget=L, dates=panel.dates)


def write_cumulative_pnl(report, fh=None):
    """Write ``date,value`` rows; returns the text when ``fh`` is None."""
    own = fh is None
    fh = io.StringIO() if own else fh
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["date", "value"])
    dates = report.dates or range(len(report.cumulative_pnl))
    for d, v in zip(dates, report.cumulative_pnl):
        w.writerow([d.isoformat() if hasattr(d, "isoformat") else d, repr(float(v))])
    return fh.getvalue() if own else None


def read_cumulative_pnl(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [r["date"] for r in rows], np.array([float(r["value"]) for r in rows])
