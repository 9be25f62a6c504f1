"""Acceptance battery: one test per criterion, one printed line each.

Run with ``pytest tests/test_acceptance.py -s`` to see the PASS/FAIL lines
as they execute.  Every tolerance is pinned here; nothing is deferred to
later calibration.
"""

import math
import time

import numpy as np
import pytest
from scipy.stats import ks_2samp, lognorm

from jumpfolio import (
    InvestmentPlan,
    ModelParams,
    NormalJumpLaw,
    bound_coefficients,
    base_direction,
    clvar,
    comonotonic_counterpart,
    cvar,
    euler_paths,
    grid_oracle,
    lower_bound_mean,
    sample_lower_bound,
    sample_terminal_wealth,
    solve,
    var,
)
from jumpfolio.cli import cli_dispatch
from jumpfolio.io import fmt, load_sample_panel


def _line(num, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"[criterion {num}] {status} - {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def acceptance_market():
    """Two risky assets, common intensity 0.3 and idiosyncratic 0.2."""
    return ModelParams(
        r=0.03, mu=[0.08, 0.06], sigma=[0.20, 0.25],
        rho=[[1.0, 0.3], [0.3, 1.0]],
        lambda_common=0.3, lambda_idio=[0.2, 0.2],
        common_jump_laws=(NormalJumpLaw(-0.04, 0.01), NormalJumpLaw(-0.03, 0.008)),
        idio_jump_laws=(NormalJumpLaw(0.02, 0.005), NormalJumpLaw(-0.01, 0.008)),
    )


@pytest.fixture(scope="module")
def acceptance_plan():
    return InvestmentPlan(tau=6, alpha=np.ones(6), p=0.05)


@pytest.fixture(scope="module")
def wealth_sample(acceptance_market, acceptance_plan):
    x = np.array([0.3, 0.2])
    start = time.perf_counter()
    batch = sample_terminal_wealth(acceptance_market, acceptance_plan, x,
                                   100_000, seed=2024)
    return x, batch, time.perf_counter() - start


def test_criterion_1_convex_order_mean_equality(acceptance_market,
                                                acceptance_plan, wealth_sample):
    x, batch, elapsed = wealth_sample
    w = batch.terminal_wealth
    coeffs = bound_coefficients(acceptance_market, acceptance_plan, x)
    analytic = lower_bound_mean(coeffs, acceptance_plan)
    se = w.std(ddof=1) / math.sqrt(w.size)
    diff = abs(w.mean() - analytic)
    _line(1, diff <= 3 * se and elapsed < 10.0,
          f"|MC mean W - analytic mean of the bound| = {diff:.5g} "
          f"(3*SE = {3 * se:.5g}), sampling took {elapsed:.2f}s")


def test_criterion_2_stop_loss_dominance(acceptance_market, acceptance_plan,
                                         wealth_sample):
    x, batch, _ = wealth_sample
    w = batch.terminal_wealth
    coeffs = bound_coefficients(acceptance_market, acceptance_plan, x)
    lb = sample_lower_bound(coeffs, acceptance_plan, w.size, seed=2025)
    worst = -np.inf
    ok = True
    for d in np.quantile(w, np.linspace(0.02, 0.98, 11)):
        a = np.maximum(lb - d, 0.0)
        b = np.maximum(w - d, 0.0)
        se = math.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)
        margin = float(a.mean() - b.mean()) - 3 * se
        worst = max(worst, margin)
        ok &= margin <= 0
    _line(2, ok, f"stop-loss dominance at 11 grid points, "
                 f"max(E[(L-d)+] - E[(W-d)+] - 3*SE) = {worst:.5g}")


def test_criterion_3_comonotonic_additivity():
    marg1 = lognorm(s=0.5, scale=math.exp(0.1))
    marg2 = lognorm(s=0.8, scale=math.exp(-0.2))
    n = 10_000
    u = (np.arange(1, n + 1) - 0.5) / n
    out = comonotonic_counterpart([marg1.ppf, marg2.ppf], u)
    total = out.sum(axis=1)
    worst = max(abs(var(total, p) - (var(out[:, 0], p) + var(out[:, 1], p)))
                for p in (0.05, 0.5, 0.95))
    _line(3, worst <= 1e-9,
          f"lognormal VaR additivity on the {n}-point grid, max gap = {worst:.3g}")


def test_criterion_4_risk_measure_oracles():
    draws = np.random.default_rng(123456).standard_normal(10 ** 6)
    v = var(draws, 0.95)
    c = cvar(draws, 0.95)
    ok = abs(v - 1.6449) <= 0.01 and abs(c - 2.0627) <= 0.02
    rng = np.random.default_rng(654321)
    dual_ok = True
    for _ in range(100):
        n = int(rng.integers(20, 500))
        sample = rng.normal(size=n) * rng.uniform(0.5, 3.0)
        p = float(rng.uniform(0.05, 0.95))
        if p * n == round(p * n):
            p += 0.37 / n
        dual_ok &= clvar(sample, p) == -cvar(-sample, 1.0 - p)
    _line(4, ok and dual_ok,
          f"VaR_0.95 = {v:.4f} (target 1.6449 +/- 0.01), CVaR_0.95 = {c:.4f} "
          f"(target 2.0627 +/- 0.02), duality bit-exact on 100 samples: {dual_ok}")


def test_criterion_5_optimizer_vs_grid_oracle():
    rng = np.random.default_rng(7777)
    start = time.perf_counter()
    worst_gap = -np.inf
    worst_resid = 0.0
    worst_fd = 0.0
    for _ in range(20):
        sig = rng.uniform(0.1, 0.4, size=2)
        rho = float(rng.uniform(-0.5, 0.8))
        params = ModelParams(r=0.03, mu=rng.uniform(0.01, 0.08, size=2),
                             sigma=sig, rho=[[1.0, rho], [rho, 1.0]])
        plan = InvestmentPlan(tau=6, alpha=np.ones(6), p=0.05,
                              k_star=float(rng.uniform(0.3, 0.95)),
                              c0=0.03 + float(rng.uniform(0.02, 0.2)))
        rep = solve(params, plan)
        half = float(np.max(np.abs(rep.x))) * 0.5 + 0.05
        box = [(v - 1.0131 * half, v + 0.9869 * half) for v in rep.x]
        _, obj_grid = grid_oracle(params, plan, box, 201)
        worst_gap = max(worst_gap, (obj_grid - rep.objective) / abs(obj_grid))
        if rep.binding == "risk-floor":
            worst_resid = max(worst_resid, abs(rep.constraint_residuals[0]))
        elif rep.binding == "drift-cap":
            worst_resid = max(worst_resid, abs(rep.constraint_residuals[1]))
        # stationarity of the ray objective at q2 by central differences
        coeffs = bound_coefficients(params, plan, np.zeros(2))
        g = float(params.A @ base_direction(params))
        eps = 1e-6

        def c5_ray(q):
            return g * (coeffs.c8 * q - coeffs.c9 * q * q)

        fd = abs(c5_ray(rep.q2 + eps) - c5_ray(rep.q2 - eps)) / (2 * eps)
        worst_fd = max(worst_fd, fd)
    elapsed = time.perf_counter() - start
    ok = worst_gap <= 1e-6 and worst_resid <= 1e-8 and worst_fd <= 1e-8 \
        and elapsed < 5.0
    _line(5, ok,
          f"20 random markets: max relative grid excess = {worst_gap:.3g}, "
          f"max binding residual = {worst_resid:.3g}, max |dc5/dq| at q2 = "
          f"{worst_fd:.3g}, runtime {elapsed:.2f}s")


def test_criterion_6_exact_vs_euler():
    n = 10_000
    critical = math.sqrt(-math.log(0.005) / 2) * math.sqrt(2.0 / n)
    plan = InvestmentPlan(tau=1, alpha=[1.0], p=0.05)
    results = []
    for with_jumps in (False, True):
        if with_jumps:
            params = ModelParams(r=0.03, mu=[0.07], sigma=[0.2], rho=[[1.0]],
                                 lambda_common=0.5,
                                 common_jump_laws=NormalJumpLaw(-0.1, 0.04))
        else:
            params = ModelParams(r=0.03, mu=[0.07], sigma=[0.2], rho=[[1.0]])
        growth, absorbed = euler_paths(params, [1.0], 1e-3, 1.0, n, seed=31)
        assert not absorbed.any()
        exact = sample_terminal_wealth(params, plan, [1.0], n, seed=32).y[:, 0]
        log_e = np.log(growth)
        stat = ks_2samp(log_e, exact).statistic
        se_m = math.sqrt(log_e.var(ddof=1) / n + exact.var(ddof=1) / n)
        dm = abs(log_e.mean() - exact.mean())
        se_v = math.sqrt(2.0 / (n - 1)) * max(log_e.var(ddof=1), exact.var(ddof=1))
        dv = abs(log_e.var(ddof=1) - exact.var(ddof=1))
        results.append((with_jumps, stat, dm <= 3 * se_m, dv <= 3 * se_v))
    ok = all(stat < critical and m_ok and v_ok for _, stat, m_ok, v_ok in results)
    detail = ", ".join(f"jumps={wj}: KS = {stat:.4f}" for wj, stat, _, _ in results)
    _line(6, ok, f"{detail} (1% critical value {critical:.4f}); moments within 3 SE")


def test_criterion_7_backtest_trend():
    from jumpfolio import CalibrationConfig, calibrate, sweep_stop_loss
    panel = load_sample_panel()
    params = calibrate(panel, CalibrationConfig(risk_free_rate=0.03))
    plan = InvestmentPlan(tau=6, alpha=np.ones(6), p=0.05)
    ledgers = sweep_stop_loss(panel, params, plan, [0.50, 0.85, 0.90, 0.95])
    wealth = [led.terminal_wealth for led in ledgers]
    returns = [led.total_return_pct for led in ledgers]
    recon = max(led.reconstruction_error(panel) for led in ledgers)
    ok = all(led.error is None for led in ledgers)
    ok &= all(a >= b - 1e-12 for a, b in zip(wealth, wealth[1:]))
    ok &= all(a >= b - 1e-12 for a, b in zip(returns, returns[1:]))
    ok &= recon <= 1e-10
    _line(7, ok,
          f"terminal wealth over k* in {{0.50, 0.85, 0.90, 0.95}}: "
          f"{[round(w, 4) for w in wealth]} (non-increasing), "
          f"ledger reconstruction error = {recon:.3g}")


def test_criterion_8_seeded_determinism(tmp_path):
    params = ModelParams(r=0.03, mu=[0.05, 0.03], sigma=[0.2, 0.3],
                         rho=[[1.0, 1.0 / 6.0], [1.0 / 6.0, 1.0]])
    from jumpfolio.io import save_params
    pfile = tmp_path / "params.json"
    save_params(params, pfile)
    sample = load_sample_panel()
    prices = tmp_path / "prices.csv"
    lines = ["date,AAA,BBB"] + [f"{d.isoformat()},{fmt(r[0])},{fmt(r[1])}"
                                for d, r in zip(sample.dates, sample.prices)]
    prices.write_text("\n".join(lines) + "\n")

    sim_bytes = []
    bt_bytes = []
    for tag, workers in (("w1", "1"), ("wN", "4")):
        sim_out = tmp_path / f"sim_{tag}"
        code = cli_dispatch(["simulate", "--params", str(pfile), "--tau", "6",
                             "--p", "0.05", "--k-star", "0.9", "--c0", "0.08",
                             "--paths", "20000", "--seed", "11",
                             "--workers", workers, "--out", str(sim_out)])
        assert code == 0
        sim_bytes.append((sim_out / "paths.csv").read_bytes()
                         + (sim_out / "risk_measures.csv").read_bytes())
        bt_out = tmp_path / f"bt_{tag}"
        code = cli_dispatch(["backtest", "--prices", str(prices),
                             "--params", str(pfile),
                             "--k-star", "0.5,0.85,0.9,0.95",
                             "--workers", workers, "--out", str(bt_out)])
        assert code == 0
        bt_bytes.append((bt_out / "summary.csv").read_bytes()
                        + (bt_out / "ledger_k0p95.csv").read_bytes()
                        + (bt_out / "ledger_k0p95.json").read_bytes())
    ok = sim_bytes[0] == sim_bytes[1] and bt_bytes[0] == bt_bytes[1]
    _line(8, ok, "simulate and backtest outputs byte-identical for "
                 "1 vs 4 workers at a fixed seed")
