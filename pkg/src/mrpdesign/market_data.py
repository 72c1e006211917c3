"""Price ingestion, log-price panels and spread construction.

Prices arrive as a CSV with header ``date,<ticker1>,...,<tickerM>``. They
are converted to natural-log prices on load; everything downstream works on
log-prices.
"""

from __future__ import annotations

import contextlib
import csv
import datetime as dt
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ValidationError

__all__ = [
    "AssetPanel",
    "SpreadBasis",
    "SpreadSeries",
    "load_panel",
    "write_prices",
    "load_basis",
    "write_basis",
    "build_spreads",
]


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AssetPanel:
    """Aligned log-prices of ``M`` assets over ``T`` dates."""

    dates: tuple
    tickers: tuple
    log_prices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "tickers", tuple(str(t) for t in self.tickers))
        y = _frozen(self.log_prices)
        if y.ndim != 2:
            raise ValidationError(f"log_prices must be 2-D, got shape {y.shape}")
        T, M = y.shape
        if T < 2 or M < 1:
            raise ValidationError(f"panel needs T >= 2 and M >= 1, got T={T}, M={M}")
        if len(self.dates) != T:
            raise ValidationError(f"{len(self.dates)} dates for {T} rows")
        if len(self.tickers) != M:
            raise ValidationError(f"{len(self.tickers)} tickers for {M} columns")
        if not np.all(np.isfinite(y)):
            raise ValidationError("log_prices contain non-finite entries")
        for a, b in zip(self.dates, self.dates[1:]):
            if not a < b:
                raise ValidationError(f"dates must be strictly increasing ({a} then {b})")
        object.__setattr__(self, "log_prices", y)

    @property
    def n_periods(self):
        return self.log_prices.shape[0]

    @property
    def n_assets(self):
        return self.log_prices.shape[1]

    @property
    def prices(self):
        return np.exp(self.log_prices)


@dataclass(frozen=True)
class SpreadBasis:
    """Cointegration basis ``B`` (M x N) plus the gross-leverage budget ``L``."""

    basis: np.ndarray
    leverage_budget: float = 1.0
    tickers: tuple = field(default=())

    def __post_init__(self):
        B = _frozen(self.basis)
        if B.ndim == 1:
            B = _frozen(B.reshape(-1, 1))
        if B.ndim != 2:
            raise ValidationError(f"basis must be 2-D, got shape {B.shape}")
        M, N = B.shape
        if N < 1 or N > M:
            raise ValidationError(f"basis must have 1 <= N <= M columns, got M={M}, N={N}")
        if not np.all(np.isfinite(B)):
            raise ValidationError("basis contains non-finite entries")
        zero_cols = np.flatnonzero(~np.any(B != 0, axis=0))
        if zero_cols.size:
            raise ValidationError(f"basis column(s) {zero_cols.tolist()} are all zero")
        L = float(self.leverage_budget)
        if not (L > 0 and math.isfinite(L)):
            raise ValidationError(f"leverage_budget must be positive, got {self.leverage_budget}")
        if self.tickers and len(self.tickers) != M:
            raise ValidationError(f"{len(self.tickers)} tickers for {M} basis rows")
        object.__setattr__(self, "basis", B)
        object.__setattr__(self, "leverage_budget", L)
        object.__setattr__(self, "tickers", tuple(str(t) for t in self.tickers))

    @classmethod
    def identity(cls, n, leverage_budget=1.0):
        return cls(np.eye(n), leverage_budget)

    @property
    def n_assets(self):
        return self.basis.shape[0]

    @property
    def n_spreads(self):
        return self.basis.shape[1]

    def asset_weights(self, w):
        """Map spread weights ``w`` to asset-space weights ``B w``."""
        return self.basis @ np.asarray(w, dtype=float)

    def leverage(self, w):
        return float(np.abs(self.asset_weights(w)).sum())


@dataclass(frozen=True)
class SpreadSeries:
    """Spread values ``s_t = B' y_t`` stacked as a T x N matrix."""

    values: np.ndarray
    dates: tuple = field(default=())

    def __post_init__(self):
        s = _frozen(self.values)
        if s.ndim == 1:
            s = _frozen(s.reshape(-1, 1))
        if s.ndim != 2:
            raise ValidationError(f"spread values must be 2-D, got shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValidationError("spread values contain non-finite entries")
        if self.dates and len(self.dates) != s.shape[0]:
            raise ValidationError(f"{len(self.dates)} dates for {s.shape[0]} rows")
        object.__setattr__(self, "values", s)
        object.__setattr__(self, "dates", tuple(self.dates))

    @property
    def n_periods(self):
        return self.values.shape[0]

    @property
    def n_spreads(self):
        return self.values.shape[1]


def _parse_date(text, lineno):
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise ValidationError(f"line {lineno}: cannot parse date {text!r}") from None


def load_panel(source):
    """Read a price CSV into an :class:`AssetPanel`.

    Rows are sorted by date and rows with any missing price are dropped.
    A non-positive price is rejected with the offending line and ticker.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="") as fh:
            return _read_panel(fh)
    return _read_panel(source)


def _read_panel(fh):
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise ValidationError("price file is empty") from None
    header = [h.strip() for h in header]
    if len(header) < 2 or header[0].lower() != "date":
        raise ValidationError("price file needs a 'date' column followed by >= 1 ticker column")
    tickers = header[1:]

    rows = {}
    for lineno, rec in enumerate(reader, start=2):
        if not rec or all(not c.strip() for c in rec):
            continue
        if len(rec) != len(header):
            raise ValidationError(f"line {lineno}: expected {len(header)} fields, got {len(rec)}")
        date = _parse_date(rec[0], lineno)
        if date in rows:
            raise ValidationError(f"line {lineno}: duplicate date {date.isoformat()}")
        prices = []
        missing = False
        for ticker, cell in zip(tickers, rec[1:]):
            cell = cell.strip()
            if cell == "" or cell.lower() in ("nan", "na", "null"):
                missing = True
                continue
            try:
                p = float(cell)
            except ValueError:
                raise ValidationError(f"line {lineno}, ticker {ticker}: bad price {cell!r}") from None
            if not p > 0 or not math.isfinite(p):
                raise ValidationError(
                    f"line {lineno} ({date.isoformat()}), ticker {ticker}: price must be positive, got {cell}"
                )
            prices.append(p)
        if not missing:
            rows[date] = prices

    if len(rows) < 2:
        raise ValidationError(f"need at least 2 complete rows, found {len(rows)}")
    dates = sorted(rows)
    log_prices = np.log(np.array([rows[d] for d in dates], dtype=float))
    return AssetPanel(tuple(dates), tuple(tickers), log_prices)


def _open_out(target):
    """Open a path for writing, or pass an already-open text stream through."""
    if hasattr(target, "write"):
        return contextlib.nullcontext(target)
    return open(target, "w", newline="")


def write_prices(path, dates, tickers, prices):
    """Write a price matrix in the canonical CSV layout."""
    prices = np.asarray(prices, dtype=float)
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *tickers])
        for d, row in zip(dates, prices):
            d = d.isoformat() if hasattr(d, "isoformat") else str(d)
            w.writerow([d, *(repr(float(x)) for x in row)])


def load_basis(source, leverage_budget=1.0, tickers=None):
    """Read a basis CSV: header ``ticker,<spread1>,...``, one row per asset.

    When ``tickers`` is given, rows are reordered to match it.
    """
    with open(source, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValidationError(f"basis file {source} is empty")
        names, rows = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ValidationError(f"{source} line {lineno}: expected {len(header)} fields")
            names.append(rec[0].strip())
            try:
                rows.append([float(c) for c in rec[1:]])
            except ValueError:
                raise ValidationError(f"{source} line {lineno}: non-numeric basis entry") from None
    B = np.array(rows, dtype=float)
    if tickers is not None:
        tickers = list(tickers)
        missing = sorted(set(tickers) - set(names))
        if missing:
            raise ValidationError(f"basis file lacks rows for tickers {missing}")
        if len(names) != len(tickers):
            raise ValidationError(f"basis has {len(names)} rows but panel has {len(tickers)} tickers")
        order = [names.index(t) for t in tickers]
        B = B[order]
        names = tickers
    return SpreadBasis(B, leverage_budget, tuple(names))


def write_basis(path, tickers, basis):
    basis = np.asarray(basis, dtype=float)
    if basis.ndim == 1:
        basis = basis.reshape(-1, 1)
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ticker", *(f"spread{j + 1}" for j in range(basis.shape[1]))])
        for t, row in zip(tickers, basis):
            w.writerow([t, *(repr(float(x)) for x in row)])


def build_spreads(panel, basis):
    """Spread series ``s_t = B' y_t`` for every date of ``panel``."""
    B = basis.basis if isinstance(basis, SpreadBasis) else np.asarray(basis, dtype=float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    if B.shape[0] != panel.n_assets:
        raise ValidationError(f"basis has {B.shape[0]} rows but panel has {panel.n_assets} assets")
    return SpreadSeries(panel.log_prices @ B, panel.dates)
