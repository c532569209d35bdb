"""Transaction-cost-aware portfolio backtesting engine.

Capabilities: OHLC CSV ingestion into windowed state tensors, wavelet
feature denoising, closed-form minimum-variance stock selection, a
portfolio MDP with drift/turnover-cost/risk-adjusted log rewards, three
classical baselines, and three continuous-action policy-gradient agents
(DDPG, GDPG, PPO) with a deterministic backtest harness and CLI.
"""

from .baselines import BaselinePolicy, loser_action, ucrp_action, winner_action
from .backtest import (
    BacktestReport,
    backtest,
    emit_plot_data,
    max_drawdown,
    prepare_series,
    run_compare,
    sharpe,
)
from .config import RunConfig
from .denoise import (
    WaveletDecomposition,
    add_denoised_channel,
    decompose,
    denoise_series,
    reconstruct,
    rolling_denoise,
    soft_shrink,
    universal_threshold,
)
from .market_data import (
    CsvSchema,
    PriceSeries,
    StateTensor,
    build_state,
    ingest_csv,
    price_relative,
    split,
)
from .portfolio_env import (
    EnvConfig,
    EpisodeStep,
    PortfolioEnv,
    drift,
    volatility_term,
    wealth_update,
)
from .selection import (
    CovarianceEstimate,
    MinVarResult,
    empirical_covariance,
    min_variance_weights,
    select_subset,
)
from .agents import (
    AgentConfig,
    DdpgAgent,
    GdpgAgent,
    PpoAgent,
    ReplayBuffer,
    clipped_surrogate,
    load_agent,
    make_agent,
    soft_update,
    train_agent,
)

__version__ = "0.1.0"

__all__ = [
    "AgentConfig",
    "BacktestReport",
    "BaselinePolicy",
    "CovarianceEstimate",
    "CsvSchema",
    "DdpgAgent",
    "EnvConfig",
    "EpisodeStep",
    "GdpgAgent",
    "MinVarResult",
    "PortfolioEnv",
    "PpoAgent",
    "PriceSeries",
    "ReplayBuffer",
    "RunConfig",
    "StateTensor",
    "WaveletDecomposition",
    "add_denoised_channel",
    "backtest",
    "build_state",
    "clipped_surrogate",
    "decompose",
    "denoise_series",
    "drift",
    "emit_plot_data",
    "empirical_covariance",
    "ingest_csv",
    "load_agent",
    "loser_action",
    "make_agent",
    "max_drawdown",
    "min_variance_weights",
    "prepare_series",
    "price_relative",
    "reconstruct",
    "rolling_denoise",
    "run_compare",
    "select_subset",
    "sharpe",
    "soft_shrink",
    "soft_update",
    "split",
    "train_agent",
    "ucrp_action",
    "universal_threshold",
    "volatility_term",
    "wealth_update",
]
