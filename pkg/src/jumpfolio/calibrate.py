"""Estimate market-model parameters from a daily price panel.

The estimation policy is deliberately simple and documented, and it is
isolated behind one function so it can be swapped without touching
anything downstream:

1. daily log returns from the panel (optionally only the trailing
   ``window`` observations);
2. threshold jump detection: day t of asset j is flagged when the return
   deviates from a rolling median by more than kappa rolling standard
   deviations;
3. days where at least ``common_jump_rule`` of the assets are flagged
   together count as common jumps (-> lambda); remaining flags are
   idiosyncratic (-> lambda_j);
4. normal magnitude laws fitted by the sample mean/variance of the
   flagged deviations, per stream and asset;
5. diffusion volatilities and correlations from the sample covariance of
   the jump-free days;
6. drifts from the jump-free sample means, compensator-adjusted so the
   stored net excess drift A is internally consistent;
7. everything rescaled from daily to per-period units via
   ``days_per_period``.

No jitter is applied anywhere: a singular covariance or a degenerate
sample is an error the caller must resolve with more data or fewer
assets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams, NormalJumpLaw, h_moment

__all__ = ["CalibrationConfig", "calibrate", "flag_jumps"]


@dataclass(frozen=True)
class CalibrationConfig:
    """Tuning knobs of the threshold-detection calibration.

    ``days_per_period`` converts daily estimates to per-period units.
    ``common_jump_rule`` is the minimum fraction of assets that must be
    flagged on the same day for the day to count as a common jump (1.0
    means all of them).  ``risk_free_rate`` is the per-period rate stored
    on the resulting model.
    """

    jump_threshold: float = 3.0
    window: int | None = None
    days_per_period: float = 21.0
    common_jump_rule: float = 1.0
    rolling_window: int = 21
    risk_free_rate: float = 0.03

    def __post_init__(self):
        if self.jump_threshold <= 0:
            raise ValueError("jump threshold multiplier must be > 0")
        if self.window is not None and self.window < 30:
            raise ValueError("calibration window must cover at least 30 observations")
        if self.days_per_period <= 0:
            raise ValueError("days_per_period must be > 0")
        if not 0 < self.common_jump_rule <= 1:
            raise ValueError("common jump rule must lie in (0, 1]")
        if self.rolling_window < 5:
            raise ValueError("rolling window too short to estimate scale")


def flag_jumps(returns: np.ndarray, kappa: float, window: int) -> np.ndarray:
    """Boolean jump flags per (day, asset) via rolling median/std threshold.

    Two passes: the second recomputes the rolling standard deviation with
    the first pass's flags excluded, so a jump sitting inside the trailing
    window cannot mask its neighbours.  On clean data the second pass
    rarely moves a flag.  The first window-1 days reuse the first full
    window (the trailing window is not yet populated there).
    """
    returns = np.atleast_2d(returns)
    n, m = returns.shape
    if n < window:
        window = max(5, n)
    flags = np.zeros((n, m), dtype=bool)
    for _ in range(2):
        new = np.zeros((n, m), dtype=bool)
        for j in range(m):
            col = returns[:, j]
            keep = ~flags[:, j]
            for t in range(n):
                lo = t - window + 1 if t + 1 >= window else 0
                hi = t + 1 if t + 1 >= window else window
                seg = col[lo:hi][keep[lo:hi]]
                if seg.size < 5:
                    seg = col[lo:hi]
                med = np.median(seg)
                sd = np.std(seg, ddof=1)
                new[t, j] = abs(col[t] - med) > kappa * sd
        if np.array_equal(new, flags):
            break
        flags = new
    return flags


def calibrate(panel, config: CalibrationConfig = CalibrationConfig()) -> ModelParams:
    """Fit :class:`ModelParams` to a price panel (or a raw daily price array).

    Raises when fewer than two jump-free observations remain or when the
    jump-free sample covariance is singular.
    """
    prices = panel.prices if hasattr(panel, "prices") else panel
    prices = np.atleast_2d(np.asarray(prices, dtype=float))
    rets = np.diff(np.log(prices), axis=0)
    if config.window is not None:
        rets = rets[-config.window:]
    n_days, m = rets.shape
    if n_days < 30:
        raise ValueError(f"need at least 30 daily returns, got {n_days}")

    flags = flag_jumps(rets, config.jump_threshold, config.rolling_window)
    n_flagged = flags.sum(axis=1)
    common_days = n_flagged >= max(1, int(np.ceil(config.common_jump_rule * m)))
    idio_flags = flags & ~common_days[:, None]
    clean_days = ~flags.any(axis=1)

    clean = rets[clean_days]
    if clean.shape[0] < 2:
        raise ValueError("fewer than 2 jump-free observations; cannot estimate diffusion")

    scale = config.days_per_period
    cov_daily = np.cov(clean, rowvar=False).reshape(m, m)
    if np.linalg.matrix_rank(cov_daily) < m or np.any(np.diag(cov_daily) <= 0):
        raise ValueError("jump-free sample covariance is singular; supply more "
                         "data or fewer assets")
    Sigma = cov_daily * scale
    sigma = np.sqrt(np.diag(Sigma))
    rho = Sigma / np.outer(sigma, sigma)
    np.fill_diagonal(rho, 1.0)
    rho = 0.5 * (rho + rho.T)
    try:
        np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError:
        raise ValueError("jump-free sample covariance is singular; supply more "
                         "data or fewer assets") from None

    lam = common_days.sum() / n_days * scale
    lam_idio = idio_flags.sum(axis=0) / n_days * scale

    # median of the clean days centers the magnitude samples
    clean_center = np.median(clean, axis=0)
    common_laws = []
    idio_laws = []
    for j in range(m):
        common_laws.append(_fit_magnitudes(rets[common_days, j] - clean_center[j]))
        idio_laws.append(_fit_magnitudes(rets[idio_flags[:, j], j] - clean_center[j]))

    # per-period drift so that A_j = mean clean log growth - r + sigma_j^2/2
    r = config.risk_free_rate
    total_drift = clean.mean(axis=0) * scale
    h0 = np.array([h_moment(law) for law in common_laws])
    h1 = np.array([h_moment(law) for law in idio_laws])
    A = total_drift - r + 0.5 * sigma ** 2
    mu = A + lam * h0 + lam_idio * h1

    return ModelParams(
        r=r, mu=mu, sigma=sigma, rho=rho,
        lambda_common=float(lam), lambda_idio=lam_idio,
        common_jump_laws=tuple(common_laws), idio_jump_laws=tuple(idio_laws),
    )


def _fit_magnitudes(samples: np.ndarray) -> NormalJumpLaw:
    """Normal law from flagged deviations; degenerate samples collapse to it."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        return NormalJumpLaw(0.0, 0.0)
    if samples.size == 1:
        return NormalJumpLaw(float(samples[0]), 0.0)
    return NormalJumpLaw(float(samples.mean()), float(samples.var(ddof=1)))
