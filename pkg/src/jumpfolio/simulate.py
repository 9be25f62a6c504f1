"""Exact-law sampling of per-period returns and terminal wealth.

The per-period log return of a fixed-mix portfolio is

    Y_t = drift(x) - var(x)/2 + N(0, var(x)) + sum of transformed jumps,

where the Gaussian term is the aggregate diffusion increment (its per
period variance is exactly x' Sigma x, so the m correlated Brownian paths
never need to be materialized) and every jump contributes
log(1 + x_j (e^Z - 1)).  Terminal wealth compounds the current wealth and
each future endowment over its remaining periods.

Paths are drawn in fixed-size blocks, each block from an independent
sub-stream derived from (seed, block index); block results are merged in
index order, so output is bit-identical for any worker count.  A
multiplicative Euler discretization of the wealth SDE provides an
independent distributional cross-check, and a daily price-panel sampler
feeds the calibration round-trip tests.

Ruin: a jump with 1 + x_j (e^Z - 1) <= 0 wipes every tranche invested in
that period; the period return is recorded as -inf so wealth reconstructs
to zero for the affected tranches, and the path is flagged rather than
dropped.
"""

from __future__ import annotations

import datetime as _dt
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import ModelParams, portfolio_drift, portfolio_variance
from .bounds import InvestmentPlan, lambda_weights, _min_overlap

__all__ = [
    "JumpRecord",
    "PathSample",
    "PathBatch",
    "EulerResult",
    "sample_period_return",
    "sample_terminal_wealth",
    "euler_path",
    "euler_paths",
    "sample_price_panel",
]

_BLOCK = 4096


@dataclass(frozen=True)
class JumpRecord:
    """One jump event: period t, stream kind, and transformed magnitudes."""

    period: int
    kind: str                 # "common" or "idio"
    asset: int | None         # None for common events (they hit all assets)
    z_star: np.ndarray | float


@dataclass(frozen=True)
class PathSample:
    """One simulated realization of the investment horizon."""

    periods: np.ndarray        # t = l .. tau
    y: np.ndarray              # per-period log returns
    terminal_wealth: float
    lambda_value: float        # conditioning variable realization
    lambda_std: float          # standardized by sigma_Lambda
    v: np.ndarray              # Brownian tranche parts, n = l-1 .. tau-1
    s: np.ndarray              # drift-plus-jump tranche parts
    jump_log: tuple
    ruined: bool


class PathBatch:
    """Column-oriented collection of simulated paths.

    Arrays are indexed by path; ``batch[i]`` materializes the i-th
    :class:`PathSample` including its per-event jump log.
    """

    def __init__(self, plan, periods, y, terminal_wealth, lambda_value,
                 lambda_std, v, s, ruined, common_counts, idio_counts,
                 common_events, idio_events, sigma_lambda):
        self.plan = plan
        self.periods = periods
        self.y = y
        self.terminal_wealth = terminal_wealth
        self.lambda_value = lambda_value
        self.lambda_std = lambda_std
        self.v = v
        self.s = s
        self.ruined = ruined
        self.common_counts = common_counts
        self.idio_counts = idio_counts
        self._common_events = common_events  # (path, period, z_star rows)
        self._idio_events = idio_events      # (path, period, asset, z_star)
        self.sigma_lambda = sigma_lambda

    def __len__(self) -> int:
        return self.terminal_wealth.size

    @property
    def ruin_count(self) -> int:
        return int(np.sum(self.ruined))

    def __getitem__(self, i: int) -> PathSample:
        i = int(i)
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(f"path index {i} out of range")
        cp, ct, cz = self._common_events
        ip, it, ia, iz = self._idio_events
        log = []
        for k in range(*np.searchsorted(cp, [i, i + 1])):
            log.append(JumpRecord(period=int(ct[k]), kind="common", asset=None,
                                  z_star=cz[k]))
        for k in range(*np.searchsorted(ip, [i, i + 1])):
            log.append(JumpRecord(period=int(it[k]), kind="idio",
                                  asset=int(ia[k]), z_star=float(iz[k])))
        log.sort(key=lambda rec: rec.period)
        return PathSample(
            periods=self.periods, y=self.y[i],
            terminal_wealth=float(self.terminal_wealth[i]),
            lambda_value=float(self.lambda_value[i]),
            lambda_std=float(self.lambda_std[i]),
            v=self.v[i], s=self.s[i], jump_log=tuple(log),
            ruined=bool(self.ruined[i]),
        )


def _transform_events(z, weight):
    """log(1 + w*(e^z - 1)) elementwise, -inf where the factor is wiped out."""
    arg = weight * np.expm1(z)
    out = np.full(np.shape(arg), -np.inf)
    ok = arg > -1.0
    out[ok] = np.log1p(arg[ok])
    return out


def sample_period_return(params: ModelParams, x, rng: np.random.Generator):
    """Draw one period's log return for allocation x.

    Returns ``(y, diffusion_increment, jump_records)``.  Ruin events are
    recorded in the jump log with a -inf transformed magnitude and drive
    y to -inf; no exception is raised here so callers choose the policy.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mu_x = portfolio_drift(params, x)
    var_x = portfolio_variance(params, x)
    d = float(rng.normal(0.0, np.sqrt(var_x)))

    records = []
    jump_sum = 0.0
    n_common = rng.poisson(params.lambda_common) if params.lambda_common > 0 else 0
    for _ in range(n_common):
        z = np.array([law.sample(rng, ()) for law in params.common_jump_laws])
        zs = _transform_events(z, x)
        records.append(JumpRecord(period=1, kind="common", asset=None, z_star=zs))
        jump_sum += float(np.sum(zs))
    for j in range(params.m):
        lam_j = params.lambda_idio[j]
        n_j = rng.poisson(lam_j) if lam_j > 0 else 0
        for _ in range(n_j):
            z = float(params.idio_jump_laws[j].sample(rng, ()))
            zs = float(_transform_events(np.array(z), x[j]))
            records.append(JumpRecord(period=1, kind="idio", asset=j, z_star=zs))
            jump_sum += zs

    y = mu_x - 0.5 * var_x + d + jump_sum
    return y, d, records


def _scatter_jumps(rng, counts, laws, x, flat_size):
    """Draw per-event magnitudes and scatter their transformed sums.

    ``counts`` maps each (path, period) cell to an event count; events are
    drawn in row-major cell order so the stream layout is deterministic.
    Returns (cell sums, event cell indices, transformed magnitude rows).
    """
    total = int(counts.sum())
    if total == 0:
        empty_z = np.empty((0, len(laws))) if isinstance(laws, tuple) else np.empty(0)
        return np.zeros(flat_size), np.empty(0, dtype=np.int64), empty_z
    cells = np.repeat(np.arange(flat_size), counts.ravel())
    if isinstance(laws, tuple):  # common stream: one draw per asset per event
        z = np.column_stack([law.sample(rng, total) for law in laws])
        zs = _transform_events(z, x[None, :])
        contrib = zs.sum(axis=1)
    else:
        z = laws.sample(rng, total)
        zs = _transform_events(z, x)
        contrib = zs
    sums = np.bincount(cells, weights=contrib, minlength=flat_size)
    # bincount of a -inf weight in an otherwise empty cell yields nan; fix up
    bad = np.isnan(sums)
    if np.any(bad):
        neg = np.bincount(cells[np.isneginf(contrib)], minlength=flat_size) > 0
        sums[bad & neg] = -np.inf
        sums[bad & ~neg] = 0.0
    return sums, cells, zs


def _sample_block(params, plan, x, rng, size, weights, sigma_lambda):
    tau, l = plan.tau, plan.l
    T = tau - l + 1
    mu_x = portfolio_drift(params, x)
    var_x = portfolio_variance(params, x)

    d = rng.normal(0.0, np.sqrt(var_x), (size, T))
    n_common = (rng.poisson(params.lambda_common, (size, T))
                if params.lambda_common > 0 else np.zeros((size, T), dtype=np.int64))
    n_idio = rng.poisson(params.lambda_idio, (size, T, params.m))

    flat = size * T
    j_sum, c_cells, c_z = _scatter_jumps(rng, n_common, params.common_jump_laws, x, flat)
    j_sum = j_sum.reshape(size, T)
    idio_events = []
    for j in range(params.m):
        s_j, cells_j, z_j = _scatter_jumps(rng, n_idio[:, :, j],
                                           params.idio_jump_laws[j], x[j], flat)
        j_sum += s_j.reshape(size, T)
        if cells_j.size:
            idio_events.append((cells_j, np.full(cells_j.size, j, dtype=np.int64), z_j))

    y = (mu_x - 0.5 * var_x) + d + j_sum

    # suffix sums over periods: tranche n = l-1+i spans columns i..T-1
    v = d[:, ::-1].cumsum(axis=1)[:, ::-1]
    rem = (tau - plan.n_values).astype(float)
    s = rem * (mu_x - 0.5 * var_x) + j_sum[:, ::-1].cumsum(axis=1)[:, ::-1]

    tranche_w = np.concatenate([[plan.w_prev], plan.alpha[l:]])
    wealth = np.exp(v + s) @ tranche_w
    lam_val = v @ weights
    lam_std = lam_val / sigma_lambda if sigma_lambda > 0 else np.zeros(size)
    ruined = np.isneginf(y).any(axis=1)

    return dict(y=y, wealth=wealth, lam=lam_val, lam_std=lam_std, v=v, s=s,
                ruined=ruined, n_common=n_common, n_idio=n_idio,
                common=(c_cells, c_z), idio=idio_events)


def sample_terminal_wealth(params: ModelParams, plan: InvestmentPlan, x,
                           n_paths: int, seed, workers: int = 1,
                           weighting: str = "endowment") -> PathBatch:
    """Simulate terminal wealth at a fixed allocation.

    Deterministic for a given (seed, n_paths) regardless of ``workers``:
    path blocks of 4096 use independent sub-streams keyed by block index
    and results merge in block order.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (params.m,):
        raise ValueError(f"allocation must have length {params.m}")
    if n_paths < 1:
        raise ValueError("need at least one path")
    tau, l = plan.tau, plan.l
    T = tau - l + 1
    if seed is None:
        seed = np.random.SeedSequence().entropy

    weights = lambda_weights(plan, weighting)
    var_x = portfolio_variance(params, x)
    overlap = _min_overlap(plan.n_values)
    sigma_lambda = float(np.sqrt(var_x * (weights @ overlap @ weights)))

    offsets = list(range(0, n_paths, _BLOCK))
    sizes = [min(_BLOCK, n_paths - o) for o in offsets]

    def run(block_idx):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(block_idx,)))
        return _sample_block(params, plan, x, rng, sizes[block_idx],
                             weights, sigma_lambda)

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(run, range(len(sizes))))
    else:
        blocks = [run(i) for i in range(len(sizes))]

    y = np.vstack([b["y"] for b in blocks]) if blocks else np.zeros((0, T))
    common_p, common_t, common_z = [], [], []
    idio_p, idio_t, idio_a, idio_z = [], [], [], []
    for off, b in zip(offsets, blocks):
        cells, z = b["common"]
        common_p.append(cells // T + off)
        common_t.append(cells % T + l)
        common_z.append(z)
        for cells_j, assets_j, z_j in b["idio"]:
            idio_p.append(cells_j // T + off)
            idio_t.append(cells_j % T + l)
            idio_a.append(assets_j)
            idio_z.append(z_j)

    def cat(parts, width=None):
        if not parts:
            return np.empty((0, width)) if width else np.empty(0)
        return np.concatenate(parts)

    common_events = (cat(common_p), cat(common_t), cat(common_z, width=params.m))
    idio_flat = (cat(idio_p), cat(idio_t), cat(idio_a), cat(idio_z))
    # merge ordering: sort idiosyncratic events by path (per-asset scatters interleave)
    if idio_flat[0].size:
        order = np.argsort(idio_flat[0], kind="stable")
        idio_flat = tuple(a[order] for a in idio_flat)
    if common_events[0].size:
        order = np.argsort(common_events[0], kind="stable")
        common_events = tuple(a[order] for a in common_events)

    return PathBatch(
        plan=plan,
        periods=np.arange(l, tau + 1),
        y=y,
        terminal_wealth=np.concatenate([b["wealth"] for b in blocks]),
        lambda_value=np.concatenate([b["lam"] for b in blocks]),
        lambda_std=np.concatenate([b["lam_std"] for b in blocks]),
        v=np.vstack([b["v"] for b in blocks]),
        s=np.vstack([b["s"] for b in blocks]),
        ruined=np.concatenate([b["ruined"] for b in blocks]),
        common_counts=np.vstack([b["n_common"] for b in blocks]),
        idio_counts=np.vstack([b["n_idio"] for b in blocks]),
        common_events=common_events,
        idio_events=idio_flat,
        sigma_lambda=sigma_lambda,
    )


class EulerResult(NamedTuple):
    growth_factor: float
    absorbed: bool


def euler_path(params: ModelParams, x, dt: float, horizon: float,
               rng: np.random.Generator) -> EulerResult:
    """Multiplicative Euler discretization of the wealth SDE.

    Each step multiplies wealth by 1 + drift*dt + diffusion + jump terms,
    with jumps placed by thinning within steps.  A non-positive step
    absorbs the path at zero (flagged), mirroring the exact sampler's
    ruin policy.
    """
    growth, absorbed = _euler_block(params, x, dt, horizon, rng, 1)
    return EulerResult(float(growth[0]), bool(absorbed[0]))


def euler_paths(params: ModelParams, x, dt: float, horizon: float,
                n_paths: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized Euler growth factors for a batch of paths."""
    rng = np.random.default_rng(seed)
    growth = np.empty(n_paths)
    absorbed = np.empty(n_paths, dtype=bool)
    for off in range(0, n_paths, 2000):
        size = min(2000, n_paths - off)
        g, a = _euler_block(params, x, dt, horizon, rng, size)
        growth[off:off + size] = g
        absorbed[off:off + size] = a
    return growth, absorbed


def _euler_block(params, x, dt, horizon, rng, size):
    if not 0 < dt <= 0.01:
        raise ValueError("step size must satisfy 0 < dt <= 0.01")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    steps = int(round(horizon / dt))
    mu_x = portfolio_drift(params, x)
    chol = np.linalg.cholesky(params.Sigma)
    w_vec = chol.T @ x  # (w_vec @ z) ~ N(0, x' Sigma x)

    z = rng.standard_normal((size, steps, params.m))
    diffusion = (z @ w_vec) * np.sqrt(dt)

    jump_add = np.zeros((size, steps))
    flat = size * steps
    if params.lambda_common > 0:
        counts = rng.poisson(params.lambda_common * dt, (size, steps))
        total = int(counts.sum())
        if total:
            zc = np.column_stack([law.sample(rng, total)
                                  for law in params.common_jump_laws])
            contrib = (x[None, :] * np.expm1(zc)).sum(axis=1)
            cells = np.repeat(np.arange(flat), counts.ravel())
            jump_add += np.bincount(cells, weights=contrib,
                                    minlength=flat).reshape(size, steps)
    for j in range(params.m):
        if params.lambda_idio[j] > 0:
            counts = rng.poisson(params.lambda_idio[j] * dt, (size, steps))
            total = int(counts.sum())
            if total:
                zj = params.idio_jump_laws[j].sample(rng, total)
                contrib = x[j] * np.expm1(zj)
                cells = np.repeat(np.arange(flat), counts.ravel())
                jump_add += np.bincount(cells, weights=contrib,
                                        minlength=flat).reshape(size, steps)

    factors = 1.0 + mu_x * dt + diffusion + jump_add
    absorbed = (factors <= 0.0).any(axis=1)
    growth = np.prod(factors, axis=1)
    growth[absorbed] = 0.0
    return growth, absorbed


def sample_price_panel(params: ModelParams, n_periods: int,
                       days_per_period: int = 21, s0=100.0, seed=None,
                       start: _dt.date = _dt.date(2020, 8, 3),
                       tickers=None, boundary: str = "uniform"):
    """Synthetic daily closing prices consistent with the market model.

    Each trading day advances the clock by 1/days_per_period of a period;
    per-asset daily log returns carry the compensated drift, correlated
    diffusion, and both jump streams (a common event draws one magnitude
    per asset).  Returns a :class:`..backtest.PricePanel` with either
    uniform boundaries every ``days_per_period`` rows or calendar-month
    boundaries derived from the generated business-day dates.
    """
    from .backtest import PricePanel  # deferred: backtest does not import simulate

    rng = np.random.default_rng(seed)
    m = params.m
    n_days = n_periods * days_per_period
    dt = 1.0 / days_per_period
    chol = np.linalg.cholesky(params.Sigma)

    drift = (params.r + params.A - 0.5 * params.sigma ** 2) * dt
    rets = drift[None, :] + np.sqrt(dt) * rng.standard_normal((n_days, m)) @ chol.T

    if params.lambda_common > 0:
        counts = rng.poisson(params.lambda_common * dt, n_days)
        total = int(counts.sum())
        if total:
            z = np.column_stack([law.sample(rng, total)
                                 for law in params.common_jump_laws])
            days = np.repeat(np.arange(n_days), counts)
            np.add.at(rets, days, z)
    for j in range(m):
        if params.lambda_idio[j] > 0:
            counts = rng.poisson(params.lambda_idio[j] * dt, n_days)
            total = int(counts.sum())
            if total:
                z = params.idio_jump_laws[j].sample(rng, total)
                days = np.repeat(np.arange(n_days), counts)
                np.add.at(rets[:, j], days, z)

    s0 = np.broadcast_to(np.asarray(s0, dtype=float), (m,))
    prices = s0 * np.exp(np.cumsum(rets, axis=0))

    dates = []
    day = start
    while len(dates) < n_days:
        if day.weekday() < 5:
            dates.append(day)
        day += _dt.timedelta(days=1)

    tickers = tuple(tickers) if tickers else tuple(f"A{j + 1}" for j in range(m))
    if boundary == "uniform":
        bounds = np.arange(0, n_days + 1, days_per_period)
        return PricePanel(dates=tuple(dates), prices=prices, tickers=tickers,
                          boundaries=bounds)
    return PricePanel.from_daily(dates, prices, tickers)
