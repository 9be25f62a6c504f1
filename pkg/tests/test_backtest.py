import datetime as dt
import math

import numpy as np
import pytest

from jumpfolio import (
    InvestmentPlan,
    ModelParams,
    PricePanel,
    run_backtest,
    sweep_stop_loss,
)
from jumpfolio.io import load_sample_panel


def business_days(n, start=dt.date(2021, 1, 4)):
    out, day = [], start
    while len(out) < n:
        if day.weekday() < 5:
            out.append(day)
        day += dt.timedelta(days=1)
    return out


def uniform_panel(prices, days_per_period=21, tickers=("A", "B")):
    prices = np.atleast_2d(np.asarray(prices, dtype=float))
    bounds = np.arange(0, prices.shape[0] + 1, days_per_period)
    return PricePanel(dates=business_days(prices.shape[0]), prices=prices,
                      tickers=tickers[: prices.shape[1]], boundaries=bounds)


@pytest.fixture(scope="module")
def trending_market():
    return ModelParams(r=0.03, mu=[0.05, 0.03], sigma=[0.2, 0.3],
                       rho=[[1.0, 1.0 / 6.0], [1.0 / 6.0, 1.0]])


class TestPricePanel:
    def test_monthly_boundaries(self):
        dates = [dt.date(2021, 1, 28), dt.date(2021, 1, 29),
                 dt.date(2021, 2, 1), dt.date(2021, 2, 2), dt.date(2021, 3, 1)]
        prices = np.arange(1.0, 11.0).reshape(5, 2)
        panel = PricePanel.from_daily(dates, prices, ("A", "B"))
        assert panel.n_periods == 3
        assert panel.boundaries.tolist() == [0, 2, 4, 5]
        assert np.array_equal(panel.s_begin(1), prices[2])
        assert np.array_equal(panel.s_end(0), prices[1])
        # period close and next open are adjacent trading days
        assert panel.boundaries[1] == 2

    def test_validation(self):
        days = business_days(4)
        good = np.full((4, 1), 2.0)
        with pytest.raises(ValueError, match="positive"):
            PricePanel(dates=days, prices=np.array([[1.0], [0.0], [1], [1]]),
                       tickers=("A",), boundaries=[0, 4])
        with pytest.raises(ValueError, match="increasing"):
            PricePanel(dates=[days[0]] * 4, prices=good, tickers=("A",),
                       boundaries=[0, 4])
        with pytest.raises(ValueError, match="cover"):
            PricePanel(dates=days, prices=good, tickers=("A",), boundaries=[0, 3])


class TestWealthRecursion:
    def test_constant_prices_add_endowments(self, trending_market):
        # flat prices: risky legs neither gain nor lose, so W_l = W_{l-1} + 1
        # no matter what allocation the solver picks
        panel = uniform_panel(np.tile([50.0, 20.0], (126, 1)))
        plan = InvestmentPlan(tau=6, alpha=np.ones(6), p=0.05, k_star=0.5)
        ledger = run_backtest(panel, trending_market, plan)
        assert ledger.error is None
        # endowments arrive at the start of periods 1..5; the final period
        # has no inflow, so W_6 = W_5 = sum(alpha)
        assert np.allclose(ledger.wealth, [1, 2, 3, 4, 5, 6, 6], atol=1e-12)
        assert any(np.any(rec.x != 0) for rec in ledger.records)

    def test_zero_drift_market_accumulates_endowments(self):
        flat = ModelParams(r=0.03, mu=[0.0, 0.0], sigma=[0.2, 0.3], rho=np.eye(2))
        panel = uniform_panel(np.tile([50.0, 20.0], (126, 1)))
        plan = InvestmentPlan(tau=6, alpha=np.ones(6), p=0.05)
        ledger = run_backtest(panel, flat, plan)
        assert all(np.array_equal(rec.x, np.zeros(2)) for rec in ledger.records)
        assert ledger.terminal_wealth == pytest.approx(6.0, abs=1e-12)

    def test_ledger_reconstruction(self, trending_market):
        panel = load_sample_panel()
        plan = InvestmentPlan(tau=6, alpha=np.ones(6), p=0.05, k_star=0.9)
        ledger = run_backtest(panel, trending_market, plan)
        assert ledger.error is None
        assert ledger.reconstruction_error(panel) <= 1e-10
        # volumes satisfy f = W * x / S_b elementwise
        for rec in ledger.records:
            t = rec.period - 1
            expected = rec.wealth_start * rec.x / panel.s_begin(t)
            assert np.max(np.abs(rec.volumes - expected)) <= 1e-12

    def test_cash_accounting_identity(self, trending_market):
        rng = np.random.default_rng(44)
        prices = 50.0 * np.exp(np.cumsum(rng.normal(0.002, 0.02, (42, 2)), axis=0))
        panel = uniform_panel(prices)
        plan = InvestmentPlan(tau=2, alpha=[1.0, 1.0], p=0.05, k_star=0.8)
        for cash_interest in (False, True):
            ledger = run_backtest(panel, trending_market, plan,
                                  cash_interest=cash_interest)
            for rec in ledger.records:
                t = rec.period - 1
                profit = rec.wealth_end - rec.alpha_next - rec.wealth_start
                expected = float(rec.volumes @ (panel.s_end(t) - panel.s_begin(t)))
                expected += rec.cash * (rec.cash_growth - 1.0)
                assert abs(profit - expected) <= 1e-10
                if cash_interest:
                    assert rec.cash_growth == pytest.approx(
                        math.exp(trending_market.r / plan.tau), rel=1e-15)
                else:
                    assert rec.cash_growth == 1.0

    def test_wealth_exhaustion_truncates(self):
        # a hot market makes the solver lever up; an in-period collapse
        # then drives marked wealth negative and the ledger stops cleanly
        hot = ModelParams(r=0.03, mu=[0.5], sigma=[0.2], rho=[[1.0]])
        prices = np.concatenate([np.linspace(100.0, 20.0, 21),
                                 np.full(21, 20.0)]).reshape(-1, 1)
        panel = uniform_panel(prices, tickers=("A",))
        plan = InvestmentPlan(tau=2, alpha=[1.0, 1.0], p=0.05)
        ledger = run_backtest(panel, hot, plan)
        assert len(ledger.records) == 1
        assert ledger.records[0].cash < 0  # borrowed against the position
        assert ledger.wealth[1] < 0
        assert "wealth exhausted" in ledger.error

    def test_infeasible_floor_truncates(self, trending_market):
        panel = load_sample_panel()
        plan = InvestmentPlan(tau=6, alpha=np.ones(6), p=0.05, K=50.0)
        ledger = run_backtest(panel, trending_market, plan)
        assert ledger.error is not None
        assert "period 1" in ledger.error
        assert not ledger.records

    def test_periodic_rate_reproduces_terminal_wealth(self, trending_market):
        panel = load_sample_panel()
        plan = InvestmentPlan(tau=6, alpha=np.ones(6), p=0.05, k_star=0.9)
        ledger = run_backtest(panel, trending_market, plan)
        rho = ledger.periodic_rate_pct / 100.0
        acc = sum(plan.alpha[i] * (1 + rho) ** (plan.tau - i) for i in range(6))
        assert acc == pytest.approx(ledger.terminal_wealth, rel=1e-10)

    def test_rolling_params_source_called_per_period(self, trending_market):
        panel = load_sample_panel()
        plan = InvestmentPlan(tau=6, alpha=np.ones(6), p=0.05, k_star=0.5)
        calls = []

        def source(a_panel, l):
            calls.append(l)
            return trending_market

        run_backtest(panel, source, plan)
        assert calls == [1, 2, 3, 4, 5, 6]


class TestStopLossSweep:
    def test_monotone_on_sample_panel(self):
        from jumpfolio import CalibrationConfig, calibrate
        panel = load_sample_panel()
        params = calibrate(panel, CalibrationConfig(risk_free_rate=0.03))
        plan = InvestmentPlan(tau=6, alpha=np.ones(6), p=0.05)
        ledgers = sweep_stop_loss(panel, params, plan, [0.50, 0.85, 0.90, 0.95])
        assert all(led.error is None for led in ledgers)
        tw = [led.terminal_wealth for led in ledgers]
        ret = [led.total_return_pct for led in ledgers]
        assert all(a >= b - 1e-12 for a, b in zip(tw, tw[1:]))
        assert all(a >= b - 1e-12 for a, b in zip(ret, ret[1:]))
        # the floor actually binds somewhere in the sweep
        assert any(rec.binding == "risk-floor"
                   for led in ledgers for rec in led.records)

    def test_sweep_workers_deterministic(self, trending_market):
        panel = load_sample_panel()
        plan = InvestmentPlan(tau=6, alpha=np.ones(6), p=0.05)
        ks = [0.5, 0.85, 0.9, 0.95]
        seq = sweep_stop_loss(panel, trending_market, plan, ks, workers=1)
        par = sweep_stop_loss(panel, trending_market, plan, ks, workers=4)
        assert [l.k_star for l in seq] == ks
        for a, b in zip(seq, par):
            assert np.array_equal(a.wealth, b.wealth)
