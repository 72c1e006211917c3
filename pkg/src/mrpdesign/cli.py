"""Command-line front end.

Subcommands::

    mrpdesign synth     simulate a cointegrated panel -> prices.csv, basis.csv
    mrpdesign moments   lagged autocovariances        -> moments.json
    mrpdesign design    solve one design problem      -> solve_report.json, weights.csv, objective_trace.csv
    mrpdesign sweep     solve over a grid of mu       -> tradeoff.csv
    mrpdesign backtest  trade a designed portfolio    -> backtest_report.json, cumulative_pnl.csv

Settings come from :data:`DEFAULTS`, then an optional JSON ``--config`` file,
then command-line flags. Relative paths in a config file are resolved
against the file's directory; paths left unset default to files inside the
output directory, so ``synth``, ``design`` and ``backtest`` chain with only
``--out``.

Exit codes: 0 success, 2 invalid input or configuration, 3 I/O failure,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .admm import AdmmConfig
from .backtest import TradeConfig, run_backtest, write_cumulative_pnl
from .criteria import PortfolioWeights
from .exceptions import MRPError, NumericalError, ValidationError
from .market_data import SpreadBasis, build_spreads, load_basis, load_panel, write_basis, write_prices
from .moments import CriterionKind, build_criterion, dump_moments, estimate_moments
from .sca import StepRule, design_mrp
from .synth import make_cointegrated

__all__ = ["main", "DEFAULTS", "load_config", "EXIT_OK", "EXIT_VALIDATION", "EXIT_IO", "EXIT_NUMERICAL"]

log = logging.getLogger("mrpdesign")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_NUMERICAL = 0, 2, 3, 4

# key: (default, kind, description). This table is the single source of defaults.
DEFAULTS = {
    "out": (".", "path", "output directory"),
    "prices": (None, "path", "price CSV; default <out>/prices.csv"),
    "basis": (None, "path", "basis CSV; default <out>/basis.csv; 'identity' uses the prices as spreads"),
    "report": (None, "path", "solve report read by backtest; default <out>/solve_report.json"),
    "leverage": (1.0, "pos", "leverage budget L on ||B w||_1"),
    "criterion": ("pre", "criterion", "pre | por | cro | pcro"),
    "eta": (1.0, "pos", "weight on lags 2..p (pcro)"),
    "lag_order": (1, "posint", "highest autocovariance lag p"),
    "mu": (0.0, "nonneg", "variance-reward weight for design"),
    "mu_grid": ([0.0, 0.01, 0.1, 1.0, 10.0, 100.0], "grid", "mu values for sweep"),
    "tau": (None, "nonneg?", "surrogate proximal weight; null = scale-aware default"),
    "step": ("armijo", "step", "armijo | diminishing | constant"),
    "gamma0": (1.0, "unit", "initial / constant step size"),
    "theta": (0.5, "open_unit", "diminishing-rule decay"),
    "alpha": (1e-4, "open_unit", "Armijo sufficient-decrease constant"),
    "beta": (0.5, "open_unit", "Armijo backtracking factor"),
    "max_iter": (500, "posint", "outer iteration cap"),
    "rtol": (1e-8, "pos", "relative objective-change tolerance"),
    "stationarity_tol": (1e-5, "pos", "stationarity-gap tolerance"),
    "rho": (1.0, "pos", "base ADMM penalty"),
    "admm_max_iters": (20000, "posint", "ADMM iteration cap per subproblem"),
    "workers": (1, "posint", "parallel solves in sweep"),
    "open_threshold": (1.0, "pos", "z-score that opens a position"),
    "close_threshold": (0.0, "nonneg", "z-score band that closes a position"),
    "lookback": (60, "posint", "rolling window for the z-score"),
    "annualization": (252.0, "pos", "periods per year for the Sharpe ratio"),
    "seed": (0, "int", "random seed for synth"),
    "n_assets": (6, "posint", "synth: number of assets M"),
    "n_spreads": (3, "posint", "synth: number of stationary spreads N"),
    "n_periods": (750, "posint", "synth: number of dates T"),
    "ar_coef": (0.8, "ar", "synth: AR(1) coefficient(s), |phi| < 1"),
    "noise": (0.01, "pos", "synth: spread innovation scale"),
    "walk_noise": (0.02, "nonneg", "synth: random-walk innovation scale"),
}


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _check(key, value):
    kind = DEFAULTS[key][1]
    if kind == "path":
        if value is not None and not isinstance(value, str):
            raise ValidationError(f"{key} must be a path string")
        return value
    if kind == "criterion":
        return CriterionKind.parse(value).short
    if kind == "step":
        if value not in ("armijo", "diminishing", "constant"):
            raise ValidationError(f"step must be armijo, diminishing or constant, got {value!r}")
        return value
    if kind == "grid":
        if not isinstance(value, (list, tuple)) or len(value) == 0:
            raise ValidationError("mu grid must contain at least one value")
        return [_check("mu", v) for v in value]
    if kind == "ar":
        vals = value if isinstance(value, (list, tuple)) else [value]
        if not vals or not all(_is_number(v) and abs(v) < 1 for v in vals):
            raise ValidationError(f"ar_coef must satisfy |phi| < 1, got {value}")
        return list(vals) if isinstance(value, (list, tuple)) else float(value)
    if kind == "nonneg?" and value is None:
        return None
    if not _is_number(value):
        raise ValidationError(f"{key} must be a finite number, got {value!r}")
    if kind in ("int", "posint"):
        if int(value) != value:
            raise ValidationError(f"{key} must be an integer, got {value}")
        value = int(value)
        if kind == "posint" and value < 1:
            raise ValidationError(f"{key} must be >= 1, got {value}")
        return value
    value = float(value)
    ok = {
        "pos": value > 0,
        "nonneg": value >= 0,
        "nonneg?": value >= 0,
        "unit": 0 < value <= 1,
        "open_unit": 0 < value < 1,
    }[kind]
    if not ok:
        raise ValidationError(f"{key} out of range: {value}")
    return value


def load_config(path=None, overrides=None):
    """Merge defaults, a JSON config file and overrides; validate every key."""
    cfg = {k: v[0] for k, v in DEFAULTS.items()}
    base = None
    if path is not None:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
        if not isinstance(doc, dict):
            raise ValidationError(f"{path}: config must be a JSON object")
        unknown = sorted(set(doc) - set(DEFAULTS))
        if unknown:
            raise ValidationError(f"{path}: unknown config key(s) {unknown}")
        base = os.path.dirname(os.path.abspath(path))
        for k, v in doc.items():
            if DEFAULTS[k][1] == "path" and isinstance(v, str) and v != "identity" and not os.path.isabs(v):
                v = os.path.join(base, v)
            cfg[k] = v
    for k, v in (overrides or {}).items():
        if v is not None:
            cfg[k] = v
    return {k: _check(k, v) for k, v in cfg.items()}


def _path(cfg, key, name):
    return cfg[key] if cfg[key] is not None else os.path.join(cfg["out"], name)


def _require(path):
    if not os.path.exists(path):
        raise FileNotFoundError(2, "no such file", path)
    return path


def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _load_inputs(cfg):
    panel = load_panel(_require(_path(cfg, "prices", "prices.csv")))
    bpath = _path(cfg, "basis", "basis.csv")
    if bpath == "identity":
        basis = SpreadBasis(np.eye(panel.n_assets), cfg["leverage"], panel.tickers)
    else:
        basis = load_basis(_require(bpath), cfg["leverage"], panel.tickers)
    return panel, basis


def _solve(cfg, spec, moments, basis, mu):
    step = StepRule(cfg["step"], cfg["gamma0"], cfg["theta"], cfg["alpha"], cfg["beta"])
    inner = AdmmConfig(rho=cfg["rho"], max_iters=cfg["admm_max_iters"])
    return design_mrp(spec, moments, basis, mu=mu, tau=cfg["tau"], step=step, inner=inner,
                      max_iter=cfg["max_iter"], rtol=cfg["rtol"], stationarity_tol=cfg["stationarity_tol"])


def _prepare(cfg):
    panel, basis = _load_inputs(cfg)
    moments = estimate_moments(build_spreads(panel, basis), cfg["lag_order"])
    spec = build_criterion(moments, cfg["criterion"], eta=cfg["eta"])
    return panel, basis, moments, spec


def cmd_synth(cfg):
    mk = make_cointegrated(cfg["n_assets"], cfg["n_spreads"], cfg["n_periods"], cfg["ar_coef"],
                           cfg["noise"], cfg["walk_noise"], cfg["seed"])
    out = cfg["out"]
    buf = io.StringIO()
    write_prices(buf, mk.dates, mk.tickers, mk.prices)
    _atomic_write(os.path.join(out, "prices.csv"), buf.getvalue())
    buf = io.StringIO()
    write_basis(buf, mk.tickers, mk.basis)
    _atomic_write(os.path.join(out, "basis.csv"), buf.getvalue())
    log.info("wrote %d x %d panel and basis to %s", cfg["n_periods"], cfg["n_assets"], out)
    return EXIT_OK


def cmd_moments(cfg):
    panel, basis = _load_inputs(cfg)
    moments = estimate_moments(build_spreads(panel, basis), cfg["lag_order"])
    _atomic_write(os.path.join(cfg["out"], "moments.json"), dump_moments(moments) + "\n")
    return EXIT_OK


def cmd_design(cfg):
    panel, basis, moments, spec = _prepare(cfg)
    report = _solve(cfg, spec, moments, basis, cfg["mu"])
    out = cfg["out"]
    _atomic_write(os.path.join(out, "solve_report.json"), report.to_json() + "\n")
    _atomic_write(os.path.join(out, "weights.csv"),
                  _csv_text(["ticker", "w_p"], [(t, repr(float(v))) for t, v in zip(panel.tickers, report.weights.w_p)]))
    _atomic_write(os.path.join(out, "objective_trace.csv"),
                  _csv_text(["iteration", "objective"], [(i, repr(float(f))) for i, f in enumerate(report.objective_trace)]))
    log.info("design %s mu=%g: F=%.6g after %d iterations (%s)", spec.kind.short, cfg["mu"],
             report.objective, report.iterations, report.reason)
    return EXIT_OK


def cmd_sweep(cfg):
    panel, basis, moments, spec = _prepare(cfg)
    grid = cfg["mu_grid"]

    def row(mu):
        try:
            r = _solve(cfg, spec, moments, basis, mu)
        except MRPError as exc:
            log.warning("mu=%g failed: %s", mu, exc)
            return [repr(mu), "", "", "", "", "", str(exc).replace("\n", " ")]
        return [repr(mu), repr(r.u), repr(r.variance), repr(r.leverage), r.iterations, r.converged, ""]

    if cfg["workers"] > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=cfg["workers"]) as pool:
            rows = list(pool.map(row, grid))
    else:
        rows = [row(mu) for mu in grid]
    _atomic_write(os.path.join(cfg["out"], "tradeoff.csv"),
                  _csv_text(["mu", "U", "variance", "l1", "iterations", "converged", "error"], rows))
    return EXIT_OK


def cmd_backtest(cfg):
    panel, basis = _load_inputs(cfg)
    rpath = _require(_path(cfg, "report", "solve_report.json"))
    with open(rpath) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{rpath}: invalid JSON ({exc.msg})") from None
    if "w" not in doc:
        raise ValidationError(f"{rpath}: not a solve report (no 'w' field)")
    weights = PortfolioWeights.from_basis(doc["w"], basis)
    tcfg = TradeConfig(cfg["open_threshold"], cfg["close_threshold"], cfg["lookback"], cfg["annualization"])
    report = run_backtest(weights, panel, basis, tcfg)
    out = cfg["out"]
    _atomic_write(os.path.join(out, "backtest_report.json"), report.to_json() + "\n")
    _atomic_write(os.path.join(out, "cumulative_pnl.csv"), write_cumulative_pnl(report))
    log.info("backtest: %d trades, ROI %.4g, Sharpe %.4g", report.num_trades, report.roi, report.sharpe)
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "moments": cmd_moments, "design": cmd_design,
            "sweep": cmd_sweep, "backtest": cmd_backtest}


def _parse_mu(text):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid mu value(s): {text!r}") from None
    return vals


def build_parser():
    p = argparse.ArgumentParser(prog="mrpdesign", description="Leverage-constrained mean-reverting portfolio design.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=fn.__name__.replace("cmd_", ""))
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, help="random seed (synth)")
        sp.add_argument("--mu", type=_parse_mu, help="mu value, or comma-separated grid for sweep")
        sp.add_argument("--criterion", choices=["pre", "por", "cro", "pcro"])
        sp.add_argument("--verbose", "-v", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {"out": args.out, "seed": args.seed, "criterion": args.criterion}
    try:
        if args.mu is not None:
            if args.command == "sweep":
                overrides["mu_grid"] = args.mu
            elif len(args.mu) != 1:
                raise ValidationError(f"{args.command} takes a single mu value, got {len(args.mu)}")
            else:
                overrides["mu"] = args.mu[0]
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except NumericalError as exc:
        print(f"mrpdesign: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValidationError, ValueError) as exc:
        print(f"mrpdesign: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        where = exc.filename if exc.filename else ""
        print(f"mrpdesign: I/O error: {where}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
