"""Market model for one risk-free and m risky assets with correlated jumps.

Each risky asset follows a geometric diffusion overlaid with two independent
Poisson jump streams: a *common* stream (intensity ``lambda_common``) that
hits every asset at once, and a per-asset *idiosyncratic* stream (intensity
``lambda_idio[j]``).  Jump magnitudes act on log-prices; their sizes are
drawn from per-asset continuous laws (normal by default, with a point mass
available for exact unit tests).

One rebalancing period is one time unit, so all rates here are per period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NormalJumpLaw",
    "PointJumpLaw",
    "ModelParams",
    "Allocation",
    "RuinError",
    "h_moment",
    "portfolio_drift",
    "portfolio_variance",
    "jump_size_transform",
    "scaled_mgf_at_one",
]


class RuinError(ValueError):
    """A jump wipes out the leveraged portfolio: 1 + x_j*(e^z - 1) <= 0."""


@dataclass(frozen=True)
class NormalJumpLaw:
    """Normal law for a log-price jump magnitude Z ~ N(mean, var)."""

    mean: float
    var: float

    def __post_init__(self):
        if self.var < 0:
            raise ValueError(f"jump variance must be >= 0, got {self.var}")

    def exp_moment(self) -> float:
        """E[e^Z] = exp(mean + var/2)."""
        return math.exp(self.mean + 0.5 * self.var)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.normal(self.mean, math.sqrt(self.var), size)


@dataclass(frozen=True)
class PointJumpLaw:
    """Degenerate law: every jump has the same log magnitude."""

    value: float

    def exp_moment(self) -> float:
        return math.exp(self.value)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return np.full(size, self.value, dtype=float)


def h_moment(law) -> float:
    """Expected relative jump size h = E[e^Z] - 1 of a magnitude law."""
    return law.exp_moment() - 1.0


def _as_law_tuple(laws, m: int, name: str) -> tuple:
    if not isinstance(laws, (list, tuple)):
        laws = [laws] * m
    if len(laws) != m:
        raise ValueError(f"{name} needs one law per asset ({m}), got {len(laws)}")
    return tuple(laws)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ModelParams:
    """Full specification of the (m+1)-asset market.

    Parameters
    ----------
    r : risk-free rate per period.
    mu : length-m excess-drift components (per period).
    sigma : length-m diffusion volatilities (per sqrt period).
    rho : m x m correlation matrix of the driving Brownian motions.
    lambda_common : intensity of the common jump stream (per period).
    lambda_idio : length-m idiosyncratic intensities (per period).
    common_jump_laws, idio_jump_laws : per-asset magnitude laws (a single
        law is broadcast to all assets).

    Derived on construction: ``Sigma`` (diffusion covariance), ``h``
    (m x 2 matrix of expected relative jump sizes, column 0 common and
    column 1 idiosyncratic) and ``A`` with
    ``A[j] = mu[j] - lambda_common*h[j,0] - lambda_idio[j]*h[j,1]``,
    the net excess drift entering the portfolio drift A'x + r.
    """

    r: float
    mu: np.ndarray
    sigma: np.ndarray
    rho: np.ndarray
    lambda_common: float = 0.0
    lambda_idio: np.ndarray | None = None
    common_jump_laws: tuple = ()
    idio_jump_laws: tuple = ()
    m: int = field(init=False)
    Sigma: np.ndarray = field(init=False)
    h: np.ndarray = field(init=False)
    A: np.ndarray = field(init=False)

    def __post_init__(self):
        mu = _readonly(np.atleast_1d(self.mu))
        sigma = _readonly(np.atleast_1d(self.sigma))
        m = mu.shape[0]
        if sigma.shape != (m,):
            raise ValueError("mu and sigma must have the same length")
        if np.any(sigma <= 0):
            raise ValueError("all diffusion volatilities must be > 0")

        rho = _readonly(np.atleast_2d(self.rho))
        if rho.shape != (m, m):
            raise ValueError(f"rho must be {m}x{m}, got {rho.shape}")
        if not np.allclose(rho, rho.T, atol=1e-12):
            raise ValueError("rho must be symmetric")
        if not np.allclose(np.diag(rho), 1.0, atol=1e-12):
            raise ValueError("rho must have unit diagonal")
        if np.any(np.abs(rho) > 1 + 1e-12):
            raise ValueError("rho entries must lie in [-1, 1]")

        lam = float(self.lambda_common)
        if lam < 0:
            raise ValueError("lambda_common must be >= 0")
        lam_idio = np.zeros(m) if self.lambda_idio is None else np.atleast_1d(self.lambda_idio)
        lam_idio = _readonly(lam_idio)
        if lam_idio.shape != (m,):
            raise ValueError("lambda_idio must have one entry per asset")
        if np.any(lam_idio < 0):
            raise ValueError("all idiosyncratic intensities must be >= 0")

        common = _as_law_tuple(self.common_jump_laws or PointJumpLaw(0.0), m, "common_jump_laws")
        idio = _as_law_tuple(self.idio_jump_laws or PointJumpLaw(0.0), m, "idio_jump_laws")

        Sigma = sigma[:, None] * sigma[None, :] * rho
        try:
            np.linalg.cholesky(Sigma)
        except np.linalg.LinAlgError:
            raise ValueError("diffusion covariance is not positive definite") from None

        h = np.column_stack([[h_moment(l) for l in common], [h_moment(l) for l in idio]])
        if np.any(h <= -1):
            raise ValueError("expected relative jump sizes must exceed -1")
        A = mu - lam * h[:, 0] - lam_idio * h[:, 1]

        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "lambda_common", lam)
        object.__setattr__(self, "lambda_idio", lam_idio)
        object.__setattr__(self, "common_jump_laws", common)
        object.__setattr__(self, "idio_jump_laws", idio)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "Sigma", _readonly(Sigma))
        object.__setattr__(self, "h", _readonly(h))
        object.__setattr__(self, "A", _readonly(A))

    def check_consistency(self, A: np.ndarray, tol: float = 1e-12) -> None:
        """Verify an externally supplied A against the recomputed one."""
        A = np.atleast_1d(np.asarray(A, dtype=float))
        if A.shape != self.A.shape or np.max(np.abs(A - self.A)) > tol:
            raise ValueError("stored A is inconsistent with mu, intensities and h")


@dataclass(frozen=True)
class Allocation:
    """Risky-asset weight vector with its scale and base direction.

    Closed-form solutions are rays: ``x = q * x_star`` with
    ``x_star = Sigma^{-1} A``.  Entries may be negative or exceed one;
    shorting and leverage are not excluded.  ``cash_fraction`` is
    ``1 - sum(x)`` by construction.
    """

    x: np.ndarray
    q: float
    x_star: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _readonly(np.atleast_1d(self.x)))
        object.__setattr__(self, "x_star", _readonly(np.atleast_1d(self.x_star)))

    @property
    def cash_fraction(self) -> float:
        return 1.0 - float(np.sum(self.x))


def _check_x(params: ModelParams, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (params.m,):
        raise ValueError(f"allocation must have length {params.m}, got shape {x.shape}")
    return x


def portfolio_drift(params: ModelParams, x) -> float:
    """Per-period drift of the mixed portfolio, A'x + r."""
    x = _check_x(params, x)
    return float(params.A @ x + params.r)


def portfolio_variance(params: ModelParams, x) -> float:
    """Per-period diffusion variance x' Sigma x (zero iff x = 0)."""
    x = _check_x(params, x)
    return float(x @ params.Sigma @ x)


def jump_size_transform(z: float, x_j: float) -> float:
    """Portfolio-level log jump induced by an asset-level log jump z.

    Holding a fraction x_j of wealth in the jumping asset turns an asset
    jump factor e^z into a wealth factor 1 + x_j*(e^z - 1); the returned
    value is the log of that factor.  Raises :class:`RuinError` when the
    factor is non-positive (the leveraged position is wiped out); callers
    such as the simulator decide the absorption policy.
    """
    g = x_j * math.expm1(z)
    if 1.0 + g <= 0.0:
        raise RuinError(f"jump z={z} at weight x_j={x_j} drives wealth to {1.0 + g:.3g}")
    return math.log1p(g)


def scaled_mgf_at_one(x_j: float, h: float) -> float:
    """E[e^{Z*}] for the transformed jump, exactly 1 + x_j*h.

    Follows from the defining identity e^{Z*} = 1 + x_j*(e^Z - 1) by
    linearity of expectation.  Raises when 1 + x_j*h <= 0, which signals
    leverage incompatible with the jump law.
    """
    v = 1.0 + x_j * h
    if v <= 0.0:
        raise RuinError(f"1 + x_j*h = {v:.3g} is non-positive (x_j={x_j}, h={h})")
    return v
