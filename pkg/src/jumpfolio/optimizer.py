"""Closed-form allocation under a CVaR floor and a drift cap.

The linearized problem maximizes c4 + c5(x) subject to

    -c4 - c5(x) + c7 * vol(x) <= -K      (risk floor)
    r + A'x <= c0                        (drift cap)

and its solution lies on the ray x = q * Sigma^{-1} A.  The scale q is the
smallest of three candidates: q1 where the risk floor becomes active, q2
the unconstrained stationary point of the ray objective, and q3 where the
drift cap binds.  A dense grid search over the same problem doubles as an
independent verification oracle on small markets.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .model import Allocation, ModelParams
from .bounds import (
    InvestmentPlan,
    bound_coefficients,
    corr_vn_lambda,
    ray_scalars,
)

__all__ = [
    "InfeasibleError",
    "SolverReport",
    "base_direction",
    "ray_scalars",
    "solve",
    "grid_oracle",
]

_FEAS_TOL = 1e-8


class InfeasibleError(ValueError):
    """No allocation satisfies the risk floor and drift cap together."""


@dataclass(frozen=True)
class SolverReport:
    """Closed-form solution with its candidate scales and diagnostics.

    ``binding`` names the constraint that produced the chosen scale
    ("risk-floor", "ray-stationarity" or "drift-cap"; ties resolve in that
    order).  ``constraint_residuals`` holds the slack of the risk floor
    and the drift cap at the returned allocation (both >= -1e-8).
    """

    x_star: np.ndarray
    q1: float
    q2: float
    q3: float
    q: float
    x: np.ndarray
    binding: str
    objective: float
    constraint_residuals: tuple[float, float]
    b1: float
    b2: float
    b3: float
    warning: str | None = None

    @property
    def allocation(self) -> Allocation:
        return Allocation(x=self.x, q=self.q, x_star=self.x_star)


def base_direction(params: ModelParams) -> np.ndarray:
    """Base allocation direction Sigma^{-1} A via a positive-definite solve.

    One step of iterative refinement keeps the residual ||Sigma x - A||_inf
    within 1e-10 * ||A||_inf even for poorly conditioned covariances.
    """
    try:
        factor = cho_factor(params.Sigma, lower=True)
    except np.linalg.LinAlgError:
        raise ValueError("diffusion covariance is not positive definite") from None
    x_star = cho_solve(factor, params.A)
    x_star = x_star + cho_solve(factor, params.A - params.Sigma @ x_star)
    resid = np.max(np.abs(params.Sigma @ x_star - params.A))
    norm_a = float(np.max(np.abs(params.A)))
    if norm_a > 0 and resid > 1e-10 * norm_a:
        raise ValueError(f"linear solve residual {resid:.3g} exceeds 1e-10 * ||A||")
    return x_star


def _risk_slack(coeffs, floor: float, c5_x: float, vol_x: float) -> float:
    """Slack of -c4 - c5 + c7*vol <= -K (nonnegative means feasible)."""
    return coeffs.c4 + c5_x - coeffs.c7 * vol_x - floor


def solve(params: ModelParams, plan: InvestmentPlan,
          weighting: str = "endowment",
          c9_convention: str = "stationary") -> SolverReport:
    """Closed-form allocation x = q * Sigma^{-1} A for the current period.

    Requires p < 0.5 (the Gaussian tail factor argument needs it).  The
    coefficients are evaluated at x = 0, where the jump-MGF terms vanish
    exactly and c4 is a genuine constant; c5 along the ray is then
    g*(c8*q - c9*q^2) with g = A' Sigma^{-1} A.

    Raises :class:`InfeasibleError` when the risk-floor quadratic has no
    real root along the ray, or when no nonnegative scale satisfies both
    constraints.
    """
    if plan.p >= 0.5:
        raise ValueError(f"risk level p must be < 0.5, got {plan.p}")
    if plan.c0 < params.r:
        raise ValueError(f"drift cap {plan.c0} lies below the risk-free rate {params.r}")

    coeffs = bound_coefficients(params, plan, np.zeros(params.m),
                                weighting=weighting, c9_convention=c9_convention)
    floor = plan.floor(params.r)
    x_star = base_direction(params)
    g = float(params.A @ x_star)  # A' Sigma^{-1} A >= 0

    if g <= 0 or coeffs.c8 <= 0:
        # no risky excess drift, or nothing left to invest: hold cash
        warning = "zero excess drift" if g <= 0 else "no investable wealth"
        return _cash_report(coeffs, params, plan, x_star, floor,
                            binding="ray-stationarity", warning=warning)

    b1 = -coeffs.c9 * g
    b2 = coeffs.c8 / (-coeffs.c9) * b1 - coeffs.c7 * math.sqrt(b1 / (-coeffs.c9))
    b3 = coeffs.c4 - floor
    disc = b2 * b2 - 4.0 * b1 * b3
    if disc < 0:
        raise InfeasibleError(
            "risk floor unreachable along the ray: discriminant "
            f"{disc:.6g} < 0 (K = {floor}, c4 = {coeffs.c4})")

    q1 = (-b2 - math.sqrt(disc)) / (2.0 * b1)  # upper root; b1 < 0
    q2 = coeffs.c8 / (2.0 * coeffs.c9)
    q3 = (plan.c0 - params.r) / g

    q, binding = min(
        (q1, "risk-floor"), (q2, "ray-stationarity"), (q3, "drift-cap"),
        key=lambda t: t[0],
    )
    if q < 0:
        if b3 >= 0:
            # the zero allocation is still feasible; hold cash and say so
            report = _cash_report(coeffs, params, plan, x_star, floor,
                                  binding=binding,
                                  warning=f"candidate scale {q:.6g} negative; holding cash")
            return dataclasses.replace(report, q1=q1, q2=q2, q3=q3, b1=b1, b2=b2, b3=b3)
        raise InfeasibleError(
            f"all usable scales negative (q = {q:.6g}) and the zero "
            f"allocation violates the floor (c4 - K = {b3:.6g})")

    x = q * x_star
    c5_x = g * (coeffs.c8 * q - coeffs.c9 * q * q)
    vol_x = q * math.sqrt(g)
    risk_slack = _risk_slack(coeffs, floor, c5_x, vol_x)
    drift_slack = plan.c0 - (params.r + g * q)
    if risk_slack < -_FEAS_TOL or drift_slack < -_FEAS_TOL:
        raise InfeasibleError(
            f"chosen scale q = {q:.6g} infeasible: risk slack {risk_slack:.3g}, "
            f"drift slack {drift_slack:.3g} (the floor excludes small allocations)")

    return SolverReport(
        x_star=x_star, q1=q1, q2=q2, q3=q3, q=q, x=x, binding=binding,
        objective=coeffs.c4 + c5_x,
        constraint_residuals=(risk_slack, drift_slack),
        b1=b1, b2=b2, b3=b3, warning=None,
    )


def _cash_report(coeffs, params, plan, x_star, floor, binding, warning) -> SolverReport:
    risk_slack = _risk_slack(coeffs, floor, 0.0, 0.0)
    if risk_slack < -_FEAS_TOL:
        raise InfeasibleError(
            f"floor {floor} exceeds the risk-free value c4 = {coeffs.c4}")
    return SolverReport(
        x_star=x_star, q1=math.nan, q2=0.0, q3=math.nan, q=0.0,
        x=np.zeros(params.m), binding=binding, objective=coeffs.c4,
        constraint_residuals=(risk_slack, plan.c0 - params.r),
        b1=math.nan, b2=math.nan, b3=coeffs.c4 - floor, warning=warning,
    )


def grid_oracle(params: ModelParams, plan: InvestmentPlan, box, steps: int,
                weighting: str = "endowment") -> tuple[np.ndarray, float]:
    """Exhaustive search of the linearized problem over an axis-aligned box.

    Evaluates the genuine per-tranche objective c4 + c5(x) (not the ray
    parameterization), discards grid points violating the risk floor or
    the drift cap, and returns the feasible maximizer.  The grid is
    exponential in the asset count, so m <= 3 is enforced.
    """
    m = params.m
    if m > 3:
        raise ValueError("grid oracle supports at most 3 assets")
    box = [tuple(map(float, b)) for b in box]
    if len(box) != m:
        raise ValueError(f"box needs {m} axis ranges")

    coeffs0 = bound_coefficients(params, plan, np.zeros(m), weighting=weighting)
    floor = plan.floor(params.r)
    tau, l = plan.tau, plan.l
    ns = plan.n_values
    rem = tau - ns
    r_vec = np.array([corr_vn_lambda(n, plan, weighting) for n in ns])
    tranche_w = np.concatenate([[plan.w_prev], plan.alpha[l:]])
    lin_coef = float(tranche_w @ rem)                        # multiplies A'x
    quad_coef = 0.5 * float(tranche_w @ (rem * r_vec ** 2))  # multiplies x' Sigma x

    axes = [np.linspace(lo, hi, steps) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=1)

    drift_excess = pts @ params.A
    var_x = np.einsum("ij,jk,ik->i", pts, params.Sigma, pts)
    c5 = lin_coef * drift_excess - quad_coef * var_x
    objective = coeffs0.c4 + c5

    feasible = (coeffs0.c4 + c5 - coeffs0.c7 * np.sqrt(np.maximum(var_x, 0.0)) >= floor)
    feasible &= (params.r + drift_excess <= plan.c0)
    if not np.any(feasible):
        raise InfeasibleError("no feasible grid point in the search box")

    idx = np.argmax(np.where(feasible, objective, -np.inf))
    return pts[idx], float(objective[idx])
