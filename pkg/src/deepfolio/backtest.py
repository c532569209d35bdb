"""End-to-end orchestration: data preparation, policy construction and
training, deterministic test-range replay, metrics, and report emission.

Reports are plain CSV plus a structured-text summary; nothing here
renders plots.  All output is byte-deterministic given the same config
and seed: floats are written with ``repr`` and no timestamps are
embedded.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .agents import AgentConfig, make_agent, train_agent
from .baselines import BaselinePolicy
from .config import RunConfig
from .denoise import add_denoised_channel
from .errors import ConfigError, DataError
from .market_data import PriceSeries, ingest_csv, split
from .portfolio_env import EnvConfig, PortfolioEnv, cash_weights

#: per-agent seed offsets so a comparison run trains decorrelated agents
SEED_OFFSETS = {"ucrp": 0, "winner": 0, "loser": 0, "ddpg": 1, "gdpg": 2, "ppo": 3}

BASELINES = ("ucrp", "winner", "loser")


@dataclass
class BacktestReport:
    """Daily wealth/weights path of one policy over the test range plus
    summary metrics and the full config snapshot that produced it."""

    agent: str
    dates: list
    wealth: np.ndarray
    rewards: np.ndarray
    turnover: np.ndarray
    weights: np.ndarray  # (rows, assets)
    asset_names: tuple[str, ...]
    day_indices: list[int]
    metrics: dict
    config_snapshot: str
    termination: str = "completed"


def max_drawdown(wealth: np.ndarray) -> float:
    """Largest peak-to-trough fractional decline."""
    w = np.asarray(wealth, dtype=np.float64)
    if w.size == 0:
        raise ValueError("empty wealth series")
    if np.any(w <= 0):
        raise ValueError("wealth must be positive")
    peaks = np.maximum.accumulate(w)
    return float(np.max(1.0 - w / peaks))


def sharpe(returns: np.ndarray, periods_per_year: int = 252) -> float | None:
    """Annualized mean-over-std of daily log returns; None when the
    deviation is zero and the ratio is undefined."""
    r = np.asarray(returns, dtype=np.float64)
    if r.size < 2:
        raise ValueError("need at least 2 returns")
    if np.ptp(r) == 0.0:  # identical returns: std is zero up to summation noise
        return None
    sd = float(np.std(r, ddof=1))
    if sd == 0.0:
        return None
    return float(np.mean(r) / sd * math.sqrt(periods_per_year))


def parse_initial_weights(spec: str, n_assets: int, cash_index: int = 0) -> np.ndarray:
    """'cash' or comma-separated fractions (cash entry included)."""
    if spec.strip().lower() == "cash":
        return cash_weights(n_assets, cash_index)
    try:
        w = np.array([float(p) for p in spec.split(",")])
    except ValueError as exc:
        raise ConfigError(f"bad initial_weights {spec!r}") from exc
    if w.shape != (n_assets,):
        raise ConfigError(
            f"initial_weights has {w.size} entries, portfolio has {n_assets} assets"
        )
    return w


def backtest(policy, series: PriceSeries, config: RunConfig) -> BacktestReport:
    """Replay a policy deterministically (exploration off) over the
    tradable range of ``series`` and assemble the daily report."""
    env_cfg = EnvConfig(
        mu=config.mu,
        beta=config.beta,
        vol_window=config.vol_window,
        window_size=config.window_size,
        gamma=config.gamma,
    )
    env = PortfolioEnv(series, env_cfg)
    initial = parse_initial_weights(
        config.initial_weights, series.num_assets, series.cash_index
    )
    state = env.reset(initial_weights=initial)
    start = env.t

    dates = [series.dates[start]]
    day_indices = [start]
    wealth = [1.0]
    rewards = [0.0]
    turnover = [0.0]
    weights = [initial]
    termination = "completed"
    while not env.done:
        step = env.step(policy.act(state, explore=False))
        dates.append(step.info["date"])
        day_indices.append(env.t)
        wealth.append(env.wealth)
        rewards.append(step.reward)
        turnover.append(step.info["turnover"])
        weights.append(step.action)
        state = step.next_state
        if step.info["cost_exceeded_return"]:
            termination = "cost_exceeded_return"

    wealth_arr = np.array(wealth)
    log_returns = np.diff(np.log(wealth_arr))
    metrics = {
        "final_wealth": float(wealth_arr[-1]),
        "sharpe": sharpe(log_returns, config.periods_per_year),
        "max_drawdown": max_drawdown(wealth_arr),
        "total_turnover": float(np.sum(turnover)),
    }
    return BacktestReport(
        agent=getattr(policy, "kind", type(policy).__name__),
        dates=dates,
        wealth=wealth_arr,
        rewards=np.array(rewards),
        turnover=np.array(turnover),
        weights=np.stack(weights),
        asset_names=series.asset_names,
        day_indices=day_indices,
        metrics=metrics,
        config_snapshot=config.to_text(),
        termination=termination,
    )


# ---------------------------------------------------------------------------
# pipeline helpers


def prepare_series(config: RunConfig) -> tuple[PriceSeries, PriceSeries]:
    """Ingest the CSV, derive the denoised channel when requested, keep
    the configured feature set, and split train/test with enough leading
    context to trade from the first test day."""
    if not config.data_csv:
        raise ConfigError("data_csv is not set")
    series = ingest_csv(config.data_csv, window_size=config.window_size)
    if "close_denoised" in config.features:
        series = add_denoised_channel(
            series,
            levels=config.denoise_levels,
            wavelet=config.denoise_wavelet,
            window=config.denoise_window,
        )
    series = series.select_features(config.features)
    if not config.train_end or not config.test_end:
        raise ConfigError("train_end and test_end must be set")
    context = max(config.window_size, config.vol_window + 1)
    return split(series, config.train_end, config.test_end, context=context)


def agent_config(config: RunConfig, series: PriceSeries, seed: int) -> AgentConfig:
    return AgentConfig(
        n_assets=series.num_assets,
        window_size=config.window_size,
        n_features=series.num_features,
        close_feature=series.close_feature,
        cash_index=series.cash_index,
        conv_channels=config.conv_channels,
        conv_kernel=config.conv_kernel,
        hidden=config.hidden,
        rnn_hidden=config.rnn_hidden,
        actor_lr=config.actor_lr,
        critic_lr=config.critic_lr,
        model_lr=config.model_lr,
        value_lr=config.value_lr,
        gamma=config.gamma,
        tau=config.tau,
        noise_sigma=config.noise_sigma,
        batch_size=config.batch_size,
        replay_capacity=config.replay_capacity,
        alpha=config.alpha,
        gdpg_dual_ascent=config.gdpg_dual_ascent,
        dual_lr=config.dual_lr,
        clip_eps=config.clip_eps,
        ppo_epochs=config.ppo_epochs,
        ppo_init_std=config.ppo_init_std,
        ppo_use_prev_weights=config.ppo_use_prev_weights,
        seed=seed,
    )


def build_policy(
    kind: str,
    config: RunConfig,
    train_series: PriceSeries,
    *,
    train_log: str | Path | None = None,
):
    """Baselines come back ready; learning agents are trained on the
    train slice first."""
    if kind in BASELINES:
        return BaselinePolicy(
            kind, train_series.num_assets - 1, train_series.close_feature
        )
    seed = config.seed + SEED_OFFSETS.get(kind, 0)
    agent = make_agent(kind, agent_config(config, train_series, seed))
    env_cfg = EnvConfig(
        mu=config.mu,
        beta=config.beta,
        vol_window=config.vol_window,
        window_size=config.window_size,
        gamma=config.gamma,
    )
    env = PortfolioEnv(train_series, env_cfg)
    train_agent(
        agent,
        env,
        episodes=config.episodes,
        episode_length=config.episode_length,
        warmup=config.warmup_steps or None,
        log_path=train_log,
    )
    return agent


def run_compare(
    config: RunConfig, agents: list[str], out_dir: str | Path
) -> list[BacktestReport]:
    """Train/backtest each named policy on the shared split and emit the
    comparison bundle into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_series, test_series = prepare_series(config)
    reports = []
    for kind in sorted(agents, key=lambda k: (SEED_OFFSETS.get(k, 99), k)):
        policy = build_policy(
            kind,
            config,
            train_series,
            train_log=out / f"train_{kind}.csv" if kind not in BASELINES else None,
        )
        if hasattr(policy, "save"):
            policy.save(out / f"{kind}.ckpt")
        report = backtest(policy, test_series, config)
        report.agent = kind
        write_report_csv(report, out / f"report_{kind}.csv")
        reports.append(report)
    reports.sort(key=lambda r: r.agent)
    emit_plot_data(reports, out / "wealth.csv", summary_path=out / "summary.txt")
    (out / "config_snapshot.cfg").write_text(config.to_text(), encoding="utf-8")
    return reports


# ---------------------------------------------------------------------------
# emission


def write_report_csv(report: BacktestReport, path: str | Path) -> None:
    """One row per trading day: t,date,reward,wealth,turnover,w_0..w_m."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    m = report.weights.shape[1]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["t", "date", "reward", "wealth", "turnover"]
            + [f"w_{i}" for i in range(m)]
        )
        for k in range(len(report.dates)):
            writer.writerow(
                [
                    report.day_indices[k],
                    report.dates[k].isoformat(),
                    repr(float(report.rewards[k])),
                    repr(float(report.wealth[k])),
                    repr(float(report.turnover[k])),
                ]
                + [repr(float(w)) for w in report.weights[k]]
            )


def format_metrics(report: BacktestReport) -> str:
    lines = [f"agent: {report.agent}"]
    for key in ("final_wealth", "sharpe", "max_drawdown", "total_turnover"):
        value = report.metrics[key]
        lines.append(
            f"  {key:16s} {'undefined' if value is None else repr(float(value))}"
        )
    lines.append(f"  {'termination':16s} {report.termination}")
    return "\n".join(lines)


def emit_plot_data(
    reports: list[BacktestReport],
    out_path: str | Path,
    summary_path: str | Path | None = None,
) -> None:
    """Wide CSV ``date,<agent>_wealth,...`` for external plotting, plus a
    metrics summary table."""
    if not reports:
        raise ValueError("no reports to emit")
    axis = [d.isoformat() for d in reports[0].dates]
    for rep in reports[1:]:
        other = [d.isoformat() for d in rep.dates]
        if other != axis:
            missing = sorted(set(axis).symmetric_difference(other))
            raise DataError(
                f"report {rep.agent!r} date axis differs from {reports[0].agent!r}; "
                f"mismatched dates: {', '.join(missing[:10])}"
            )
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date"] + [f"{r.agent}_wealth" for r in reports])
        for k, day in enumerate(axis):
            writer.writerow([day] + [repr(float(r.wealth[k])) for r in reports])
    if summary_path is not None:
        text = "\n\n".join(format_metrics(r) for r in reports) + "\n"
        Path(summary_path).write_text(text, encoding="utf-8")
