"""Multi-period portfolio construction under correlated jump-diffusion risk.

The library covers the full pipeline: market model and portfolio
statistics (:mod:`.model`), quantile risk measures and comonotonic
utilities (:mod:`.risk`), the comonotonic lower bound on terminal wealth
with its linearization (:mod:`.bounds`), the closed-form CVaR-floor
allocation and its grid oracle (:mod:`.optimizer`), exact and Euler
Monte Carlo (:mod:`.simulate`), a rebalancing backtest (:mod:`.backtest`),
threshold calibration from daily prices (:mod:`.calibrate`) and CSV/JSON
plumbing (:mod:`.io`).
"""

from .model import (
    Allocation,
    ModelParams,
    NormalJumpLaw,
    PointJumpLaw,
    RuinError,
    h_moment,
    jump_size_transform,
    portfolio_drift,
    portfolio_variance,
    scaled_mgf_at_one,
)
from .risk import (
    DegenerateTailError,
    EmpiricalSample,
    clvar,
    comonotonic_counterpart,
    cvar,
    gaussian_cvar_of_negative,
    var,
)
from .bounds import (
    BoundCoefficients,
    InvestmentPlan,
    bound_coefficients,
    corr_vn_lambda,
    linearized_bound,
    lower_bound_mean,
    lower_bound_value,
    sample_lower_bound,
    stop_loss_floor,
    terminal_wealth_mean,
)
from .optimizer import (
    InfeasibleError,
    SolverReport,
    base_direction,
    grid_oracle,
    ray_scalars,
    solve,
)
from .simulate import (
    EulerResult,
    PathBatch,
    PathSample,
    euler_path,
    euler_paths,
    sample_period_return,
    sample_price_panel,
    sample_terminal_wealth,
)
from .backtest import (
    BacktestLedger,
    PeriodRecord,
    PricePanel,
    run_backtest,
    sweep_stop_loss,
)
from .calibrate import CalibrationConfig, calibrate

__version__ = "0.1.0"

__all__ = [
    "Allocation", "ModelParams", "NormalJumpLaw", "PointJumpLaw", "RuinError",
    "h_moment", "jump_size_transform", "portfolio_drift", "portfolio_variance",
    "scaled_mgf_at_one",
    "DegenerateTailError", "EmpiricalSample", "clvar", "comonotonic_counterpart",
    "cvar", "gaussian_cvar_of_negative", "var",
    "BoundCoefficients", "InvestmentPlan", "bound_coefficients", "corr_vn_lambda",
    "linearized_bound", "lower_bound_mean", "lower_bound_value",
    "sample_lower_bound", "stop_loss_floor", "terminal_wealth_mean",
    "InfeasibleError", "SolverReport", "base_direction", "grid_oracle",
    "ray_scalars", "solve",
    "EulerResult", "PathBatch", "PathSample", "euler_path", "euler_paths",
    "sample_period_return", "sample_price_panel", "sample_terminal_wealth",
    "BacktestLedger", "PeriodRecord", "PricePanel", "run_backtest",
    "sweep_stop_loss",
    "CalibrationConfig", "calibrate",
    "__version__",
]
