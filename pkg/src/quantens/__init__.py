"""quantens: combining probabilistic electricity-price forecasts.

Load percentile forecast panels, combine them (equal-weight quantile
averaging or online CRPS learning with smoothed per-quantile weights),
evaluate with proper scores and Diebold-Mariano tests, and backtest a
quantile-based battery trading strategy on the day-ahead market.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .combine import horizontal_average, qens_combine, rearrange
from .config import EnsembleSpec, RunConfig, load_config
from .data import (
    HOURS,
    N_QUANTILES,
    PROB_GRID,
    AlignedData,
    ExpertPanel,
    ForecastPanel,
    PriceSeries,
    align,
    load_expert_panel,
    load_prices,
    load_quantile_panel,
)
from .errors import (
    ConfigError,
    CoverageError,
    DataError,
    DegenerateDifferentialError,
    NonFiniteError,
    QuantensError,
    SchemaError,
    WeightOverflowError,
)
from .learner import (
    BoaState,
    LambdaTracker,
    LearnerConfig,
    OnlineResult,
    boa_step,
    pinball_subgradient,
    run_online,
    weights_from_state,
)
from .metrics import (
    DmResult,
    crps_approx,
    crps_panel,
    dm_matrix,
    dm_test,
    mae_median,
    pinball_by_quantile,
    quantile_loss,
    rmse_mean,
)
from .smoothing import SmootherBasis, smooth_weights
from .trading import (
    DayPlan,
    RiskConfig,
    TradeLedger,
    crystal_ball,
    execute_day,
    naive_fixed,
    plan_day,
    run_strategy,
    worst_case,
)

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "__version__",
    # data
    "HOURS", "N_QUANTILES", "PROB_GRID",
    "AlignedData", "ExpertPanel", "ForecastPanel", "PriceSeries",
    "align", "load_expert_panel", "load_prices", "load_quantile_panel",
    # combination
    "horizontal_average", "qens_combine", "rearrange",
    # learning
    "BoaState", "LambdaTracker", "LearnerConfig", "OnlineResult",
    "boa_step", "pinball_subgradient", "run_online", "weights_from_state",
    "SmootherBasis", "smooth_weights",
    # metrics
    "DmResult", "crps_approx", "crps_panel", "dm_matrix", "dm_test",
    "mae_median", "pinball_by_quantile", "quantile_loss", "rmse_mean",
    # trading
    "DayPlan", "RiskConfig", "TradeLedger",
    "crystal_ball", "execute_day", "naive_fixed", "plan_day",
    "run_strategy", "worst_case",
    # config
    "EnsembleSpec", "RunConfig", "load_config",
    # errors
    "ConfigError", "CoverageError", "DataError",
    "DegenerateDifferentialError", "NonFiniteError", "QuantensError",
    "SchemaError", "WeightOverflowError",
]
