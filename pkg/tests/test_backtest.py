import csv
import math

import numpy as np
import pytest

from deepfolio.backtest import (
    BacktestReport,
    backtest,
    build_policy,
    emit_plot_data,
    max_drawdown,
    prepare_series,
    run_compare,
    sharpe,
    write_report_csv,
)
from deepfolio.baselines import BaselinePolicy
from deepfolio.config import RunConfig
from deepfolio.errors import DataError
from deepfolio.market_data import split
from deepfolio.portfolio_env import cash_weights
from deepfolio.synthetic import geometric_walk_market, write_market_csv

from conftest import FIXTURE_CSV, make_series


def fixture_config(**kw) -> RunConfig:
    base = dict(
        data_csv=str(FIXTURE_CSV),
        train_end="2015-12-31",
        test_end="2016-06-30",
        window_size=20,
        vol_window=10,
        denoise_window=32,
        episodes=2,
        episode_length=25,
        batch_size=16,
        hidden=16,
        conv_channels=4,
        rnn_hidden=8,
        seed=5,
    )
    base.update(kw)
    return RunConfig(**base).validate()


class TestMaxDrawdown:
    def test_monotone_increasing_is_zero(self):
        assert max_drawdown(np.linspace(1, 2, 50)) == 0.0

    def test_half_drop(self):
        assert max_drawdown(np.array([1.0, 0.5, 0.75])) == pytest.approx(0.5, abs=0)

    def test_matches_quadratic_bruteforce(self):
        rng = np.random.default_rng(1)
        w = np.exp(np.cumsum(rng.normal(0, 0.05, 300)))
        got = max_drawdown(w)
        worst = 0.0
        for i in range(len(w)):
            for j in range(i, len(w)):
                worst = max(worst, 1.0 - w[j] / w[i])
        assert got == pytest.approx(worst, abs=1e-14)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            max_drawdown(np.array([]))


class TestSharpe:
    def test_constant_returns_undefined(self):
        assert sharpe(np.full(10, 0.01)) is None

    def test_zero_mean(self):
        assert sharpe(np.array([0.01, -0.01])) == 0.0

    def test_matches_recomputation(self):
        rng = np.random.default_rng(2)
        r = rng.normal(1e-4, 0.01, 500)
        got = sharpe(r, 252)
        mean = sum(r) / len(r)
        sd = math.sqrt(sum((x - mean) ** 2 for x in r) / (len(r) - 1))
        assert got == pytest.approx(mean / sd * math.sqrt(252), abs=1e-10)

    def test_too_short(self):
        with pytest.raises(ValueError):
            sharpe(np.array([0.01]))


class TestBacktest:
    def test_cash_policy_constant_wealth(self):
        cfg = fixture_config(beta=0.0)

        class CashPolicy:
            kind = "cash"

            def act(self, state, explore=False):
                return cash_weights(len(state.prev_weights))

        _, test_series = prepare_series(cfg)
        report = backtest(CashPolicy(), test_series, cfg)
        assert np.all(report.wealth == 1.0)
        assert np.all(report.rewards == 0.0)
        assert report.metrics["final_wealth"] == 1.0
        assert report.metrics["sharpe"] is None
        assert report.metrics["max_drawdown"] == 0.0

    def test_ucrp_flat_market_no_cost_stays_at_one(self):
        closes = np.full((3, 120), 80.0)
        series = make_series(closes, highs=closes)
        _, test = split(series, series.dates[60], series.dates[-1], context=21)
        cfg = fixture_config(mu=0.0, beta=0.0)
        policy = BaselinePolicy("ucrp", 3, series.close_feature)
        report = backtest(policy, test, cfg)
        assert np.all(report.wealth == 1.0)

    def test_ucrp_wealth_path_matches_independent_replay(self, tmp_path):
        # standalone day-by-day oracle over the raw CSV, written before
        # looking at the engine's numbers
        series = geometric_walk_market(4, 260, seed=9)
        csv_path = tmp_path / "m.csv"
        write_market_csv(csv_path, series)
        cfg = fixture_config(
            data_csv=str(csv_path),
            train_end=series.dates[150].isoformat(),
            test_end=series.dates[-1].isoformat(),
            mu=0.0025,
            beta=0.0,
            features=["close", "high"],
        )
        _, test_series = prepare_series(cfg)
        policy = BaselinePolicy("ucrp", 4, test_series.close_feature)
        report = backtest(policy, test_series, cfg)

        with open(csv_path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        names = ["A00", "A01", "A02", "A03"]
        closes = {n: [float(r[f"{n}_close"]) for r in rows] for n in names}
        start = report.day_indices[0] + 151 - test_series.context
        # oracle replay: hold cash day one, then uniform thereafter
        wealth = 1.0
        held = [1.0, 0, 0, 0, 0]
        target = [0.0] + [0.25] * 4
        path = [wealth]
        for t in range(start + 1, start + len(report.dates)):
            y = [1.0] + [closes[n][t] / closes[n][t - 1] for n in names]
            gross = sum(yi * wi for yi, wi in zip(y, held))
            drifted = [yi * wi / gross for yi, wi in zip(y, held)]
            cost = 0.0025 * sum(abs(a - b) for a, b in zip(target, drifted))
            wealth *= gross - cost
            held = list(target)
            path.append(wealth)
        assert np.max(np.abs(report.wealth - np.array(path))) <= 1e-9

    def test_telescoping_identity_beta_zero(self):
        cfg = fixture_config(beta=0.0)
        _, test_series = prepare_series(cfg)
        policy = BaselinePolicy("winner", 4, test_series.close_feature)
        report = backtest(policy, test_series, cfg)
        assert math.exp(report.rewards.sum()) == pytest.approx(
            report.metrics["final_wealth"], abs=1e-9
        )

    def test_rows_cover_full_test_period(self):
        cfg = fixture_config()
        _, test_series = prepare_series(cfg)
        policy = BaselinePolicy("ucrp", 4, test_series.close_feature)
        report = backtest(policy, test_series, cfg)
        assert report.wealth[0] == 1.0
        assert len(report.dates) == test_series.num_days - test_series.context
        assert report.dates[0] == test_series.dates[test_series.context]
        assert report.dates[-1] == test_series.dates[-1]


class TestInitialWeights:
    def test_cash_keyword(self):
        from deepfolio.backtest import parse_initial_weights

        assert np.array_equal(parse_initial_weights("cash", 4), [1, 0, 0, 0])

    def test_explicit_fractions(self):
        from deepfolio.backtest import parse_initial_weights

        w = parse_initial_weights("0.2, 0.3, 0.5", 3)
        assert np.allclose(w, [0.2, 0.3, 0.5], atol=0)

    def test_bad_values_rejected(self):
        from deepfolio.backtest import parse_initial_weights
        from deepfolio.errors import ConfigError

        with pytest.raises(ConfigError):
            parse_initial_weights("a,b", 2)
        with pytest.raises(ConfigError):
            parse_initial_weights("0.5,0.5", 3)

    def test_config_key_drives_backtest(self):
        cfg = fixture_config(beta=0.0, initial_weights="0,0.25,0.25,0.25,0.25")
        _, test_series = prepare_series(cfg)
        policy = BaselinePolicy("ucrp", 4, test_series.close_feature)
        report = backtest(policy, test_series, cfg)
        assert np.array_equal(report.weights[0], [0, 0.25, 0.25, 0.25, 0.25])
        # starting at the rebalance target, day one incurs only drift cost
        assert report.turnover[0] == 0.0


class TestEmission:
    def _reports(self, n=2):
        cfg = fixture_config(beta=0.0)
        _, test_series = prepare_series(cfg)
        out = []
        for kind in ("ucrp", "winner", "loser")[:n]:
            policy = BaselinePolicy(kind, 4, test_series.close_feature)
            report = backtest(policy, test_series, cfg)
            report.agent = kind
            out.append(report)
        return out

    def test_report_csv_layout(self, tmp_path):
        report = self._reports(1)[0]
        path = tmp_path / "r.csv"
        write_report_csv(report, path)
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["t", "date", "reward", "wealth", "turnover"] + [
            f"w_{i}" for i in range(5)
        ]
        assert len(rows) == 1 + len(report.dates)
        assert float(rows[1][3]) == 1.0

    def test_single_report_two_columns(self, tmp_path):
        report = self._reports(1)[0]
        out = tmp_path / "wealth.csv"
        emit_plot_data([report], out)
        with out.open(newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["date", "ucrp_wealth"]
        assert len(rows[1]) == 2

    def test_multi_report_column_count(self, tmp_path):
        reports = self._reports(3)
        out = tmp_path / "wealth.csv"
        emit_plot_data(reports, out, summary_path=tmp_path / "s.txt")
        with out.open(newline="") as fh:
            rows = list(csv.reader(fh))
        assert len(rows[0]) == 4
        assert len(rows) == 1 + len(reports[0].dates)
        assert "final_wealth" in (tmp_path / "s.txt").read_text()

    def test_mismatched_axes_rejected(self, tmp_path):
        reports = self._reports(2)
        reports[1].dates = reports[1].dates[:-1]
        reports[1].wealth = reports[1].wealth[:-1]
        with pytest.raises(DataError, match="date axis"):
            emit_plot_data(reports, tmp_path / "w.csv")

    def test_identical_runs_identical_columns(self, tmp_path):
        a = self._reports(1)[0]
        b = self._reports(1)[0]
        emit_plot_data([a], tmp_path / "a.csv")
        emit_plot_data([b], tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


class TestCompare:
    def test_bundle_files_and_determinism(self, tmp_path):
        cfg = fixture_config(episodes=1, episode_length=15)
        agents = ["ucrp", "ddpg"]
        r1 = run_compare(cfg, agents, tmp_path / "one")
        r2 = run_compare(cfg, agents, tmp_path / "two")
        assert [r.agent for r in r1] == ["ddpg", "ucrp"]
        for name in ("wealth.csv", "summary.txt", "report_ucrp.csv", "report_ddpg.csv"):
            assert (tmp_path / "one" / name).read_bytes() == (
                tmp_path / "two" / name
            ).read_bytes()

    def test_snapshot_reproduces_run(self, tmp_path):
        cfg = fixture_config(episodes=1, episode_length=15)
        run_compare(cfg, ["ucrp"], tmp_path / "one")
        snapshot = RunConfig.from_file(tmp_path / "one" / "config_snapshot.cfg")
        assert snapshot == cfg
        run_compare(snapshot, ["ucrp"], tmp_path / "two")
        assert (tmp_path / "one" / "report_ucrp.csv").read_bytes() == (
            tmp_path / "two" / "report_ucrp.csv"
        ).read_bytes()
