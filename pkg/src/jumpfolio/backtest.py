"""Periodic-rebalancing backtest on historical daily prices.

Each rebalancing period opens with a fresh closed-form solve at the
realized wealth, converts the allocation into share volumes at the
period's opening prices, and marks the book at the closing prices:

    W_l = f_{l-1} . S_e(l-1) + cash_{l-1} * G + alpha_l,

where f are the risky share volumes, cash is the uninvested fraction
(1 - sum x) of wealth, and G is 1 by default or exp(r/tau) when the
cash-interest flag is on.  Carrying the cash sleeve keeps the recursion
consistent for allocations that do not sum to one (the solver's rarely
do); tracking only the risky legs would shed the cash principal whenever
sum(x) != 1.
"""

from __future__ import annotations

import dataclasses
import datetime as _dt
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor
import math

import numpy as np
from scipy.optimize import brentq

from .model import ModelParams
from .bounds import InvestmentPlan, stop_loss_floor
from .optimizer import InfeasibleError, SolverReport, solve

__all__ = [
    "PricePanel",
    "PeriodRecord",
    "BacktestLedger",
    "stop_loss_floor",
    "run_backtest",
    "sweep_stop_loss",
]


def _as_date(d):
    if isinstance(d, _dt.date):
        return d
    return _dt.date.fromisoformat(str(d))


@dataclass(frozen=True)
class PricePanel:
    """Daily closing prices partitioned into rebalancing periods.

    ``boundaries`` holds tau+1 row indices; period l (0-based) spans rows
    [boundaries[l], boundaries[l+1]), so its opening prices are the first
    row of the slice and its closing prices the last.  Adjacent periods
    share the boundary convention: the close of period l-1 is the trading
    day before the open of period l.
    """

    dates: tuple
    prices: np.ndarray
    tickers: tuple
    boundaries: np.ndarray

    def __post_init__(self):
        prices = np.atleast_2d(np.asarray(self.prices, dtype=float))
        if np.any(~np.isfinite(prices)) or np.any(prices <= 0):
            raise ValueError("prices must be finite and strictly positive")
        dates = tuple(_as_date(d) for d in self.dates)
        if len(dates) != prices.shape[0]:
            raise ValueError("one date per price row required")
        if any(b >= a for a, b in zip(dates[1:], dates)):
            raise ValueError("dates must be strictly increasing")
        tickers = tuple(str(t) for t in self.tickers)
        if len(tickers) != prices.shape[1]:
            raise ValueError("one ticker per price column required")
        bounds = np.asarray(self.boundaries, dtype=int)
        if bounds[0] != 0 or bounds[-1] != prices.shape[0] or np.any(np.diff(bounds) < 1):
            raise ValueError("boundaries must cover the whole sample without overlap")
        prices = prices.copy()
        prices.flags.writeable = False
        bounds = bounds.copy()
        bounds.flags.writeable = False
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "tickers", tickers)
        object.__setattr__(self, "boundaries", bounds)

    @classmethod
    def from_daily(cls, dates, prices, tickers) -> "PricePanel":
        """Build a panel with one period per calendar month."""
        dates = [_as_date(d) for d in dates]
        bounds = [0]
        for i in range(1, len(dates)):
            if (dates[i].year, dates[i].month) != (dates[i - 1].year, dates[i - 1].month):
                bounds.append(i)
        bounds.append(len(dates))
        return cls(dates=tuple(dates), prices=prices, tickers=tuple(tickers),
                   boundaries=np.array(bounds))

    @property
    def n_periods(self) -> int:
        return len(self.boundaries) - 1

    @property
    def n_assets(self) -> int:
        return self.prices.shape[1]

    def s_begin(self, l: int) -> np.ndarray:
        """Opening price vector of 0-based period l."""
        return self.prices[self.boundaries[l]]

    def s_end(self, l: int) -> np.ndarray:
        """Closing price vector of 0-based period l."""
        return self.prices[self.boundaries[l + 1] - 1]


@dataclass(frozen=True)
class PeriodRecord:
    """One period of the ledger (l is 1-based, matching the plan)."""

    period: int
    wealth_start: float        # W_{l-1}, after the period-start endowment
    x: np.ndarray              # allocation chosen at the period start
    q: float
    binding: str
    volumes: np.ndarray        # risky shares bought at the opening prices
    cash: float                # uninvested wealth carried through the period
    cash_growth: float         # per-period growth factor applied to cash
    alpha_next: float          # endowment added at the period end
    wealth_end: float          # W_l including that endowment
    return_pct: float          # (W_l - endowments paid in) / endowments paid in
    solver: SolverReport = field(repr=False, default=None)


@dataclass
class BacktestLedger:
    """Backtest results for one stop-loss rate."""

    k_star: float
    cash_interest: bool
    records: list
    wealth: np.ndarray         # W_0 .. W_tau
    terminal_wealth: float
    total_return_pct: float
    periodic_rate_pct: float
    error: str | None = None

    def reconstruction_error(self, panel: PricePanel) -> float:
        """Largest absolute wealth-recursion mismatch across periods.

        Recomputes W_l = f_{l-1} . S_e(l-1) + cash_{l-1} * G + alpha_l
        from stored volumes, cash and prices.
        """
        worst = 0.0
        for rec in self.records:
            t = rec.period - 1
            implied = float(rec.volumes @ panel.s_end(t)) \
                + rec.cash * rec.cash_growth + rec.alpha_next
            worst = max(worst, abs(implied - rec.wealth_end))
        return worst


def run_backtest(panel: PricePanel, params_source, plan: InvestmentPlan,
                 cash_interest: bool = False, weighting: str = "endowment",
                 c9_convention: str = "stationary") -> BacktestLedger:
    """Run the three-step periodic re-solve over the panel's periods.

    ``params_source`` is either a fixed :class:`ModelParams` or a callable
    ``(panel, l) -> ModelParams`` re-evaluated at each period (rolling
    calibration).  The wealth recursion starts at W_0 = alpha[0]; each
    period solves at the realized wealth, buys volumes at the opening
    prices and marks them at the closing prices.  Solver infeasibility
    truncates the ledger with an error state instead of raising.
    """
    tau = plan.tau
    if panel.n_periods < tau:
        raise ValueError(f"panel has {panel.n_periods} periods, plan needs {tau}")
    alpha = plan.alpha
    invested = np.cumsum(alpha)

    records = []
    wealth = [float(alpha[0])]
    error = None
    for t in range(tau):
        l = t + 1
        params = params_source if isinstance(params_source, ModelParams) \
            else params_source(panel, l)
        g_cash = math.exp(params.r / tau) if cash_interest else 1.0
        if wealth[t] < 0:
            error = f"period {l}: wealth exhausted (W_{t} = {wealth[t]:.6g})"
            break
        plan_l = dataclasses.replace(plan, l=l, w_prev=wealth[t])
        try:
            rep = solve(params, plan_l, weighting=weighting,
                        c9_convention=c9_convention)
        except InfeasibleError as exc:
            error = f"period {l}: {exc}"
            break
        volumes = wealth[t] * rep.x / panel.s_begin(t)
        cash = (1.0 - float(np.sum(rep.x))) * wealth[t]
        alpha_next = float(alpha[l]) if l < tau else 0.0
        w_end = float(volumes @ panel.s_end(t)) + cash * g_cash + alpha_next
        paid_in = float(invested[min(l, tau - 1)])
        records.append(PeriodRecord(
            period=l, wealth_start=wealth[t], x=rep.x, q=rep.q,
            binding=rep.binding, volumes=volumes, cash=cash,
            cash_growth=g_cash, alpha_next=alpha_next, wealth_end=w_end,
            return_pct=(w_end - paid_in) / paid_in * 100.0, solver=rep,
        ))
        wealth.append(w_end)

    terminal = wealth[-1]
    total_paid = float(invested[-1])
    return BacktestLedger(
        k_star=plan.k_star, cash_interest=cash_interest, records=records,
        wealth=np.array(wealth), terminal_wealth=terminal,
        total_return_pct=(terminal - total_paid) / total_paid * 100.0,
        periodic_rate_pct=_periodic_rate(alpha, terminal) * 100.0
        if error is None and len(records) == tau else math.nan,
        error=error,
    )


def _periodic_rate(alpha: np.ndarray, terminal: float) -> float:
    """Per-period internal rate: sum_l alpha_l (1+rho)^(tau-l) = W_tau."""
    tau = len(alpha)

    def gap(rho):
        y = 1.0 + rho
        return sum(alpha[l] * y ** (tau - l) for l in range(tau)) - terminal

    if gap(0.0) == 0.0:
        return 0.0
    lo, hi = -0.999999, 10.0
    if gap(lo) * gap(hi) > 0:
        return math.nan
    return float(brentq(gap, lo, hi, xtol=1e-12))


def sweep_stop_loss(panel: PricePanel, params_source, plan: InvestmentPlan,
                    k_stars, cash_interest: bool = False,
                    weighting: str = "endowment",
                    c9_convention: str = "stationary",
                    workers: int = 1) -> list[BacktestLedger]:
    """Independent backtests over a grid of stop-loss rates, in input order."""
    plans = [dataclasses.replace(plan, k_star=float(k)) for k in k_stars]

    def run(p):
        return run_backtest(panel, params_source, p, cash_interest=cash_interest,
                            weighting=weighting, c9_convention=c9_convention)

    if workers > 1 and len(plans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, plans))
    return [run(p) for p in plans]
