import csv
import datetime as dt
import json

import numpy as np
import pytest
from scipy import linalg

from mrpdesign import cli
from mrpdesign.backtest import BacktestReport, read_cumulative_pnl
from mrpdesign.exceptions import NumericalError
from mrpdesign.market_data import build_spreads, load_basis, load_panel, write_prices
from mrpdesign.moments import build_criterion, estimate_moments, load_moments
from mrpdesign.sca import SolveReport


@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / "run"
    assert cli.main(["synth", "--out", str(out), "--seed", "5"]) == 0
    return out


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_synth_is_byte_identical_per_seed(tmp_path):
    for d in ("a", "b"):
        assert cli.main(["synth", "--out", str(tmp_path / d), "--seed", "9"]) == 0
    cli.main(["synth", "--out", str(tmp_path / "c"), "--seed", "10"])
    for name in ("prices.csv", "basis.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert (tmp_path / "a" / "prices.csv").read_bytes() != (tmp_path / "c" / "prices.csv").read_bytes()


def test_design_artifacts_round_trip(synth_dir):
    assert cli.main(["design", "--out", str(synth_dir), "--criterion", "pcro", "--mu", "0.5"]) == 0
    report = SolveReport.from_dict(json.loads((synth_dir / "solve_report.json").read_text()))
    assert report.criterion == "pcro" and report.mu == 0.5
    weights = read_rows(synth_dir / "weights.csv")
    panel = load_panel(synth_dir / "prices.csv")
    assert [r["ticker"] for r in weights] == list(panel.tickers)
    np.testing.assert_array_equal([float(r["w_p"]) for r in weights], report.weights.w_p)
    trace = read_rows(synth_dir / "objective_trace.csv")
    assert [float(r["objective"]) for r in trace] == report.objective_trace


def test_moments_and_backtest_artifacts(synth_dir):
    assert cli.main(["moments", "--out", str(synth_dir)]) == 0
    m = load_moments(synth_dir / "moments.json")
    panel = load_panel(synth_dir / "prices.csv")
    basis = load_basis(synth_dir / "basis.csv", tickers=panel.tickers)
    ref = estimate_moments(build_spreads(panel, basis), 1)
    np.testing.assert_array_equal(m[1], ref[1])

    assert cli.main(["design", "--out", str(synth_dir)]) == 0
    assert cli.main(["backtest", "--out", str(synth_dir)]) == 0
    rep = BacktestReport.from_dict(json.loads((synth_dir / "backtest_report.json").read_text()))
    dates, values = read_cumulative_pnl(synth_dir / "cumulative_pnl.csv")
    np.testing.assert_array_equal(values, rep.cumulative_pnl)
    assert len(dates) == panel.n_periods


def test_sweep_single_zero_row_matches_eigen_oracle(synth_dir):
    assert cli.main(["sweep", "--out", str(synth_dir), "--mu", "0"]) == 0
    rows = read_rows(synth_dir / "tradeoff.csv")
    assert len(rows) == 1 and rows[0]["error"] == ""
    panel = load_panel(synth_dir / "prices.csv")
    basis = load_basis(synth_dir / "basis.csv", tickers=panel.tickers)
    m = estimate_moments(build_spreads(panel, basis), 1)
    lam = linalg.eigh(build_criterion(m, "pre").h_matrix, m.m0, eigvals_only=True)[0]
    assert float(rows[0]["U"]) == pytest.approx(lam, rel=1e-4)


def test_sweep_variance_grows_with_mu(synth_dir):
    config = synth_dir / "cfg.json"
    config.write_text(json.dumps({"mu_grid": [0, 1000], "leverage": 10.0, "workers": 2}))
    assert cli.main(["sweep", "--out", str(synth_dir), "--config", str(config)]) == 0
    rows = read_rows(synth_dir / "tradeoff.csv")
    assert [float(r["mu"]) for r in rows] == [0.0, 1000.0]
    assert float(rows[1]["variance"]) >= float(rows[0]["variance"])
    assert float(rows[1]["l1"]) == pytest.approx(10.0)


def test_singular_moments_exit_numerical(tmp_path, capsys):
    # two identical assets with an identity basis make M0 singular
    y = np.cumsum(np.random.default_rng(0).standard_normal((80, 1)), axis=0) * 0.01
    prices = np.exp(np.hstack([y, y]) + 3)
    dates = [dt.date(2020, 1, 1) + dt.timedelta(days=i) for i in range(80)]
    write_prices(tmp_path / "prices.csv", dates, ["A", "B"], prices)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"basis": "identity"}))
    assert cli.main(["design", "--out", str(tmp_path), "--config", str(cfg)]) == cli.EXIT_NUMERICAL
    assert "numerical error" in capsys.readouterr().err


def test_sweep_records_row_failures(synth_dir, monkeypatch):
    real = cli.design_mrp

    def flaky(spec, moments, basis, mu=0.0, **kw):
        if mu == 1.0:
            raise NumericalError("synthetic failure")
        return real(spec, moments, basis, mu=mu, **kw)

    monkeypatch.setattr(cli, "design_mrp", flaky)
    assert cli.main(["sweep", "--out", str(synth_dir), "--mu", "0,1,10"]) == 0
    rows = read_rows(synth_dir / "tradeoff.csv")
    assert [r["error"] for r in rows] == ["", "synthetic failure", ""]
    assert rows[1]["U"] == "" and rows[2]["U"] != ""


def test_missing_prices_file(tmp_path, capsys):
    code = cli.main(["design", "--out", str(tmp_path / "empty")])
    assert code == cli.EXIT_IO
    assert str(tmp_path / "empty" / "prices.csv") in capsys.readouterr().err


def test_negative_mu_fails_before_any_work(synth_dir, capsys):
    assert cli.main(["design", "--out", str(synth_dir), "--mu", "-1"]) == cli.EXIT_VALIDATION
    assert "mu" in capsys.readouterr().err
    assert not (synth_dir / "solve_report.json").exists()


@pytest.mark.parametrize(
    "doc, pattern",
    [
        ({"mu_grid": []}, "at least one"),
        ({"bogus": 1}, "unknown config key"),
        ({"ar_coef": 1.0}, "phi"),
        ({"lookback": 0}, "lookback"),
        ({"step": "newton"}, "step"),
        ({"criterion": "sharpe"}, "criterion"),
    ],
)
def test_config_validation(tmp_path, capsys, doc, pattern):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(doc))
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(tmp_path)]) == cli.EXIT_VALIDATION
    assert pattern in capsys.readouterr().err


def test_empty_mu_grid_flag(tmp_path):
    assert cli.main(["sweep", "--out", str(tmp_path), "--mu", ","]) == cli.EXIT_VALIDATION


def test_config_paths_are_relative_to_config_file(synth_dir, tmp_path):
    cfg = synth_dir / "cfg.json"
    cfg.write_text(json.dumps({"prices": "prices.csv", "basis": "basis.csv", "max_iter": 50}))
    out = tmp_path / "elsewhere"
    assert cli.main(["design", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "solve_report.json").exists()
    assert not list(out.glob(".tmp-*"))


def test_load_config_defaults_and_overrides():
    cfg = cli.load_config(overrides={"mu": 2, "criterion": "penalized_crossing"})
    assert cfg["mu"] == 2.0 and cfg["criterion"] == "pcro"
    assert cfg["lookback"] == 60 and cfg["tau"] is None
    assert set(cfg) == set(cli.DEFAULTS)
