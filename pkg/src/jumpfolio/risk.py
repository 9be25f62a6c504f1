"""Quantile-based risk measures on empirical samples and Gaussian laws.

Conventions follow the generalized inverse of the empirical cdf: the
value-at-risk at level p is the order statistic of rank ceil(p*N), and the
tail expectations use strict inequalities, so a degenerate tail raises
instead of silently falling back.  With these conventions the duality
``clvar(X, p) == -cvar(-X, 1 - p)`` holds bit-exactly whenever p*N is not
an integer.
"""

import math

import numpy as np
from scipy.stats import norm

__all__ = [
    "EmpiricalSample",
    "DegenerateTailError",
    "var",
    "cvar",
    "clvar",
    "gaussian_cvar_of_negative",
    "comonotonic_counterpart",
]


class DegenerateTailError(ValueError):
    """No observation lies strictly beyond the value-at-risk threshold."""


class EmpiricalSample:
    """Immutable sample of real outcomes with a lazily sorted view."""

    def __init__(self, values):
        values = np.atleast_1d(np.asarray(values, dtype=float))
        if values.ndim != 1 or values.size == 0:
            raise ValueError("sample must be a nonempty 1-d collection")
        if np.any(np.isnan(values)):
            raise ValueError("sample contains NaN entries")
        self._values = values.copy()
        self._values.flags.writeable = False
        self._sorted = None

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def sorted_values(self) -> np.ndarray:
        if self._sorted is None:
            s = np.sort(self._values)
            s.flags.writeable = False
            self._sorted = s
        return self._sorted

    def __len__(self) -> int:
        return self._values.size


def _as_sample(sample) -> EmpiricalSample:
    return sample if isinstance(sample, EmpiricalSample) else EmpiricalSample(sample)


def _check_level(p: float) -> float:
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability level must lie in (0, 1), got {p}")
    return p


def var(sample, p: float) -> float:
    """Empirical value-at-risk: order statistic of rank ceil(p*N).

    The small backward guard keeps ranks stable when p*N is an exact
    integer that floating arithmetic nudges upward.
    """
    s = _as_sample(sample)
    p = _check_level(p)
    n = len(s)
    rank = max(1, math.ceil(p * n - 1e-9))
    return float(s.sorted_values[rank - 1])


def cvar(sample, p: float) -> float:
    """Mean of the outcomes strictly above var(sample, p)."""
    s = _as_sample(sample)
    threshold = var(s, p)
    tail = s.values[s.values > threshold]
    if tail.size == 0:
        raise DegenerateTailError(f"no outcome exceeds VaR_{p} = {threshold}")
    return float(np.mean(tail))


def clvar(sample, p: float) -> float:
    """Mean of the outcomes strictly below var(sample, p)."""
    s = _as_sample(sample)
    threshold = var(s, p)
    tail = s.values[s.values < threshold]
    if tail.size == 0:
        raise DegenerateTailError(f"no outcome lies below VaR_{p} = {threshold}")
    return float(np.mean(tail))


def gaussian_cvar_of_negative(mean: float, sd: float, p: float) -> float:
    """Closed-form CVaR at level 1-p of -X for X ~ Normal(mean, sd^2).

    Equals -mean + sd * pdf(ppf(p)) / p with the standard normal pdf and
    quantile; this is the tail factor the linearized lower bound uses.
    """
    p = _check_level(p)
    if sd < 0:
        raise ValueError("standard deviation must be >= 0")
    return float(-mean + sd * norm.pdf(norm.ppf(p)) / p)


def comonotonic_counterpart(quantile_functions, u_draws) -> np.ndarray:
    """Joint outcomes with comonotonic dependence and given marginals.

    Row k is ``(F1^{-1}(u_k), ..., Fn^{-1}(u_k))``: every coordinate is a
    nondecreasing function of the same uniform draw, so the columns are
    comonotonic by construction and quantile-based risk measures of the
    row sum are additive across columns.
    """
    u = np.atleast_1d(np.asarray(u_draws, dtype=float))
    if np.any((u <= 0) | (u >= 1)):
        raise ValueError("u draws must lie strictly inside (0, 1)")
    return np.column_stack([np.asarray(q(u), dtype=float) for q in quantile_functions])
