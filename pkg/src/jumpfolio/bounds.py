"""Comonotonic lower bound on terminal wealth and its linearization.

Terminal wealth is a sum of lognormal-type tranches (current wealth plus
each future endowment, compounded to the horizon).  Conditioning every
tranche on one common Gaussian variable L (a weighted sum of the remaining
Brownian increments) produces a comonotonic sum that precedes terminal
wealth in convex order.  Each tranche exponent splits into

    c1_n  deterministic rate and jump-moment part,
    c2_n  allocation drift minus the conditioning variance correction,
    c3_n  loading on the standardized conditioning variable,

and a first-order Taylor expansion collapses the bound to the affine form
c4 + c5(x) + c6 * vol(x) * L/sigma_L whose CVaR is available in closed
form via the Gaussian tail factor c7.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .model import ModelParams, portfolio_drift, portfolio_variance, scaled_mgf_at_one

__all__ = [
    "InvestmentPlan",
    "BoundCoefficients",
    "stop_loss_floor",
    "lambda_weights",
    "corr_vn_lambda",
    "ray_scalars",
    "bound_coefficients",
    "lower_bound_value",
    "linearized_bound",
    "lower_bound_mean",
    "terminal_wealth_mean",
    "sample_lower_bound",
]

# exp() overflows shortly above 709; clamp with a diagnostic instead of inf
_EXP_CLAMP = 700.0


@dataclass(frozen=True)
class InvestmentPlan:
    """Horizon, endowment schedule and risk budget of a periodic investor.

    ``alpha[i]`` is the endowment paid in at the start of period i+1
    (``alpha[0]`` is the initial wealth when l = 1).  ``l`` is the 1-based
    index of the current period and ``w_prev`` the wealth at its start.
    The terminal-wealth floor is ``K`` when given explicitly, otherwise it
    is derived from the stop-loss rate ``k_star`` (see
    :func:`stop_loss_floor`).  ``c0`` caps the per-period portfolio drift.
    """

    tau: int
    alpha: np.ndarray
    p: float
    k_star: float = 0.0
    K: float | None = None
    c0: float = math.inf
    l: int = 1
    w_prev: float = 1.0

    def __post_init__(self):
        tau = int(self.tau)
        if tau < 1:
            raise ValueError("horizon must be at least one period")
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        if alpha.shape != (tau,):
            raise ValueError(f"endowment schedule must have length {tau}")
        if np.any(alpha < 0):
            raise ValueError("endowments must be >= 0")
        if not 0.0 < float(self.p) < 1.0:
            raise ValueError("risk level p must lie in (0, 1)")
        if not 1 <= int(self.l) <= tau:
            raise ValueError(f"current period must lie in [1, {tau}]")
        if float(self.w_prev) < 0:
            raise ValueError("current wealth must be >= 0")
        if float(self.k_star) < 0:
            raise ValueError("stop-loss rate must be >= 0")
        alpha = alpha.copy()
        alpha.flags.writeable = False
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "k_star", float(self.k_star))
        object.__setattr__(self, "c0", float(self.c0))
        object.__setattr__(self, "l", int(self.l))
        object.__setattr__(self, "w_prev", float(self.w_prev))

    @property
    def n_values(self) -> np.ndarray:
        """Tranche start indices n = l-1, ..., tau-1."""
        return np.arange(self.l - 1, self.tau)

    def floor(self, r: float) -> float:
        """Explicit wealth floor, or the stop-loss floor derived from r."""
        return self.K if self.K is not None else stop_loss_floor(self, r)


def stop_loss_floor(plan: InvestmentPlan, r: float) -> float:
    """Wealth floor K = k_star * sum_{i=1..tau} exp((tau-i+1) r / tau).

    The sum compounds one unit per period at the per-period risk-free
    factor exp(r/tau), i.e. the floor is a fraction k_star of the value
    the endowment stream would reach risk-free.
    """
    tau = plan.tau
    return plan.k_star * sum(math.exp((tau - i + 1) * r / tau) for i in range(1, tau + 1))


def lambda_weights(plan: InvestmentPlan, weighting: str = "endowment") -> np.ndarray:
    """Tranche weights of the conditioning variable, for k = l-1..tau-1.

    "endowment" weights every tranche by its schedule entry
    alpha[l-1..tau-1], including the current one.  "wealth" replaces the
    first weight with the current wealth w_{l-1}, which is what the
    k = l-1 tranche actually holds; that variant maximizes the correlation
    between the conditioner and the wealth tranches.
    """
    a = np.array(plan.alpha[plan.l - 1:], dtype=float)
    if weighting == "wealth":
        a[0] = plan.w_prev
    elif weighting != "endowment":
        raise ValueError(f"unknown weighting policy {weighting!r}")
    return a


def _min_overlap(n_values: np.ndarray) -> np.ndarray:
    """Matrix of min(tau-k, tau-w) overlaps for tranche start indices."""
    horizon = n_values.max() + 1
    rem = horizon - n_values
    return np.minimum(rem[:, None], rem[None, :])


def corr_vn_lambda(n: int, plan: InvestmentPlan, weighting: str = "endowment") -> float:
    """Correlation r_n between a tranche's Brownian part and the conditioner.

    Both are sums of the same per-period aggregate increments, so the
    correlation reduces to overlap counting:

        r_n = sum_k a_k min(tau-n, tau-k)
              / sqrt((tau-n) sum_{k,w} a_k a_w min(tau-k, tau-w)).
    """
    tau, l = plan.tau, plan.l
    if not l - 1 <= n <= tau - 1:
        raise ValueError(f"tranche index n must lie in [{l - 1}, {tau - 1}]")
    a = lambda_weights(plan, weighting)
    if not np.any(a > 0):
        raise ValueError("all conditioning weights are zero")
    ks = plan.n_values
    num = float(np.sum(a * np.minimum(tau - n, tau - ks)))
    denom = math.sqrt((tau - n) * float(a @ _min_overlap(ks) @ a))
    return num / denom


def ray_scalars(plan: InvestmentPlan, r_vec: np.ndarray,
                c9_convention: str = "stationary") -> tuple[float, float]:
    """Linear and quadratic coefficients (c8, c9) of the objective along the ray.

    Along x = q * Sigma^{-1} A the linearized objective is
    g*(c8*q - c9*q^2) with g = A' Sigma^{-1} A.  The "stationary"
    convention keeps the (tau-i) factor on every quadratic term, which
    makes q = c8/(2 c9) the exact stationary point of the objective (the
    factor is present in each tranche's variance correction).  The
    "unweighted" convention drops that factor on the future-endowment
    terms, shifting the stationary candidate slightly off the true peak.
    """
    tau, l, w, alpha = plan.tau, plan.l, plan.w_prev, plan.alpha
    r_vec = np.asarray(r_vec, dtype=float)
    i_future = np.arange(l, tau)
    c8 = w * (tau - l + 1) + float(np.sum(alpha[l:] * (tau - i_future)))
    if c9_convention == "stationary":
        quad = alpha[l:] * (tau - i_future) * r_vec[1:] ** 2
    elif c9_convention == "unweighted":
        quad = alpha[l:] * r_vec[1:] ** 2
    else:
        raise ValueError(f"unknown c9 convention {c9_convention!r}")
    c9 = 0.5 * w * (tau - l + 1) * r_vec[0] ** 2 + 0.5 * float(np.sum(quad))
    return float(c8), float(c9)


@dataclass(frozen=True)
class BoundCoefficients:
    """All derived scalars of the bound, its linearization and the ray.

    Vectors are aligned with tranche indices n = l-1..tau-1.  ``x_vol`` is
    sqrt(x' Sigma x) for the allocation the coefficients were built at, so
    evaluation needs no further reference to the market.
    """

    n_values: np.ndarray
    r_n: np.ndarray
    sigma_lambda: float
    c1: np.ndarray
    c2: np.ndarray
    c3: np.ndarray
    c4: float
    c5: float
    c6: float
    c7: float
    c8: float
    c9: float
    x: np.ndarray
    x_vol: float
    weighting: str = "endowment"

    def __post_init__(self):
        # derived-quantity sanity per construction
        if not np.all((self.r_n > 0) & (self.r_n <= 1 + 1e-12)):
            raise ValueError("tranche correlations must lie in (0, 1]")


def bound_coefficients(params: ModelParams, plan: InvestmentPlan, x,
                       weighting: str = "endowment",
                       c9_convention: str = "stationary") -> BoundCoefficients:
    """Compute every coefficient of the bound at allocation x.

    c1_n collects the risk-free rate and the jump exponential moments of
    the transformed magnitudes (via their scaled MGFs at 1); c2_n the
    allocation drift minus the conditioning variance correction; c3_n the
    Gaussian loading sqrt(tau-n) * r_n.  c4..c6 aggregate tranches for the
    linearized bound, c7 is the Gaussian CVaR tail factor and (c8, c9) the
    ray-objective scalars.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (params.m,):
        raise ValueError(f"allocation must have length {params.m}")
    tau, l, w, alpha = plan.tau, plan.l, plan.w_prev, plan.alpha
    ns = plan.n_values
    rem = tau - ns

    var_x = portfolio_variance(params, x)
    vol_x = math.sqrt(var_x)
    drift_excess = float(params.A @ x)

    mgf_common = math.prod(scaled_mgf_at_one(x[j], params.h[j, 0]) for j in range(params.m))
    mgf_idio = sum(params.lambda_idio[j] * (scaled_mgf_at_one(x[j], params.h[j, 1]) - 1.0)
                   for j in range(params.m))
    jump_rate = params.lambda_common * (mgf_common - 1.0) + mgf_idio

    r_vec = np.array([corr_vn_lambda(n, plan, weighting) for n in ns])
    a = lambda_weights(plan, weighting)
    sigma_lambda = math.sqrt(var_x * float(a @ _min_overlap(ns) @ a))

    c1 = rem * (params.r + jump_rate)
    c2 = rem * drift_excess - 0.5 * rem * r_vec ** 2 * var_x
    c3 = np.sqrt(rem) * r_vec

    tranche_w = np.concatenate([[w], alpha[l:]])
    c4 = float(tranche_w @ (1.0 + c1))
    c5 = float(tranche_w @ c2)
    c6 = float(tranche_w @ c3)
    c7 = c6 * float(norm.pdf(norm.ppf(plan.p))) / plan.p
    c8, c9 = ray_scalars(plan, r_vec, c9_convention)

    return BoundCoefficients(
        n_values=ns, r_n=r_vec, sigma_lambda=sigma_lambda,
        c1=c1, c2=c2, c3=c3, c4=c4, c5=c5, c6=c6, c7=c7, c8=c8, c9=c9,
        x=x.copy(), x_vol=vol_x, weighting=weighting,
    )


def _tranche_exponents(coeffs: BoundCoefficients, lambda_std) -> np.ndarray:
    z = np.asarray(lambda_std, dtype=float)
    expo = coeffs.c1 + coeffs.c2 + np.multiply.outer(z, coeffs.c3 * coeffs.x_vol)
    if np.any(np.abs(expo) > _EXP_CLAMP):
        warnings.warn("bound exponent clamped at +/-700; extreme conditioning draw",
                      RuntimeWarning, stacklevel=3)
        expo = np.clip(expo, -_EXP_CLAMP, _EXP_CLAMP)
    return expo


def lower_bound_value(coeffs: BoundCoefficients, plan: InvestmentPlan, lambda_std):
    """Comonotonic lower bound evaluated at standardized conditioning draws.

    ``lambda_std`` may be a scalar or an array of realizations of
    L/sigma_L; the return value matches its shape.  Strictly increasing in
    the draw whenever the allocation is nonzero.
    """
    tranche_w = np.concatenate([[plan.w_prev], plan.alpha[plan.l:]])
    out = np.exp(_tranche_exponents(coeffs, lambda_std)) @ tranche_w
    return float(out) if np.isscalar(lambda_std) else out


def linearized_bound(coeffs: BoundCoefficients, lambda_std):
    """First-order expansion c4 + c5 + c6 * vol(x) * lambda_std."""
    z = np.asarray(lambda_std, dtype=float)
    out = coeffs.c4 + coeffs.c5 + coeffs.c6 * coeffs.x_vol * z
    return float(out) if np.isscalar(lambda_std) else out


def lower_bound_mean(coeffs: BoundCoefficients, plan: InvestmentPlan) -> float:
    """Analytic mean of the bound over a standard normal conditioner.

    Each tranche integrates to exp(c1 + c2 + c3^2 vol^2 / 2); by
    construction this equals the exact mean of terminal wealth (the
    conditioning preserves expectations).
    """
    tranche_w = np.concatenate([[plan.w_prev], plan.alpha[plan.l:]])
    expo = coeffs.c1 + coeffs.c2 + 0.5 * (coeffs.c3 * coeffs.x_vol) ** 2
    return float(tranche_w @ np.exp(expo))


def terminal_wealth_mean(params: ModelParams, plan: InvestmentPlan, x) -> float:
    """Closed-form E[W_tau] at a fixed allocation.

    The per-period growth factor has mean
    exp(drift) * exp(lambda*(prod_j M_j0 - 1) + sum_j lambda_j*(M_j1 - 1))
    with M the scaled MGFs of the transformed jumps; tranche n compounds
    it tau - n times.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mgf_common = math.prod(scaled_mgf_at_one(x[j], params.h[j, 0]) for j in range(params.m))
    mgf_idio = sum(params.lambda_idio[j] * (scaled_mgf_at_one(x[j], params.h[j, 1]) - 1.0)
                   for j in range(params.m))
    log_growth_mean = portfolio_drift(params, x) \
        + params.lambda_common * (mgf_common - 1.0) + mgf_idio
    rem = plan.tau - plan.n_values
    tranche_w = np.concatenate([[plan.w_prev], plan.alpha[plan.l:]])
    return float(tranche_w @ np.exp(rem * log_growth_mean))


def sample_lower_bound(coeffs: BoundCoefficients, plan: InvestmentPlan,
                       n_draws: int, seed=None) -> np.ndarray:
    """Monte Carlo draws of the bound from standard normal conditioners."""
    rng = np.random.default_rng(seed)
    return lower_bound_value(coeffs, plan, rng.standard_normal(n_draws))
