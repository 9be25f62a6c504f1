import numpy as np
import pytest

from jumpfolio import (
    CalibrationConfig,
    ModelParams,
    NormalJumpLaw,
    calibrate,
    sample_price_panel,
)
from jumpfolio.calibrate import flag_jumps


@pytest.fixture(scope="module")
def identifiable_market():
    """Jump magnitudes several daily sigmas wide, so detection is reliable."""
    return ModelParams(
        r=0.03, mu=[0.07, 0.06], sigma=[0.13, 0.16],
        rho=[[1.0, 0.35], [0.35, 1.0]],
        lambda_common=0.3, lambda_idio=[0.25, 0.2],
        common_jump_laws=(NormalJumpLaw(-0.25, 0.0016), NormalJumpLaw(-0.22, 0.0016)),
        idio_jump_laws=(NormalJumpLaw(0.18, 0.0016), NormalJumpLaw(-0.18, 0.0016)),
    )


@pytest.fixture(scope="module")
def quiet_market():
    return ModelParams(r=0.03, mu=[0.07, 0.06], sigma=[0.15, 0.18],
                       rho=[[1.0, 0.35], [0.35, 1.0]])


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            CalibrationConfig(jump_threshold=0.0)
        with pytest.raises(ValueError):
            CalibrationConfig(window=10)
        with pytest.raises(ValueError):
            CalibrationConfig(common_jump_rule=0.0)
        with pytest.raises(ValueError):
            CalibrationConfig(days_per_period=-1)


class TestFlagJumps:
    def test_spike_is_flagged(self):
        rng = np.random.default_rng(0)
        rets = rng.normal(0.0, 0.01, (120, 1))
        rets[60, 0] = 0.2
        flags = flag_jumps(rets, kappa=3.0, window=21)
        assert flags[60, 0]
        assert flags.sum() <= 3  # at most a couple of stray flags

    def test_neighbor_not_masked_by_earlier_jump(self):
        rng = np.random.default_rng(1)
        rets = rng.normal(0.0, 0.01, (120, 1))
        rets[60, 0] = 0.25
        rets[65, 0] = -0.22  # inside the trailing window of the first jump
        flags = flag_jumps(rets, kappa=3.0, window=21)
        assert flags[60, 0] and flags[65, 0]


class TestRoundTrip:
    @pytest.mark.parametrize("seed", [100, 101, 102, 103, 104])
    def test_simulate_then_recover(self, identifiable_market, seed):
        truth = identifiable_market
        panel = sample_price_panel(truth, n_periods=24, days_per_period=21,
                                   s0=(250.0, 100.0), seed=seed)
        est = calibrate(panel, CalibrationConfig(risk_free_rate=0.03))
        rel = np.abs(est.sigma - truth.sigma) / truth.sigma
        assert np.max(rel) <= 0.15
        assert abs(est.lambda_common - truth.lambda_common) <= 0.2
        # consistency invariant: stored A matches its recomputation exactly
        est.check_consistency(est.A)
        np.linalg.cholesky(est.Sigma)
        assert np.allclose(est.Sigma, est.Sigma.T)

    @pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
    def test_false_positive_rate_on_jump_free_panel(self, quiet_market, seed):
        panel = sample_price_panel(quiet_market, n_periods=24, days_per_period=21,
                                   s0=(100.0, 100.0), seed=seed)
        est = calibrate(panel, CalibrationConfig(risk_free_rate=0.03))
        assert est.lambda_common <= 0.05
        assert np.max(est.lambda_idio) <= 0.05

    def test_drift_recovery(self, quiet_market):
        # no jumps: estimated A should track the generator's net excess drift
        errs = []
        for seed in (21, 22, 23):
            panel = sample_price_panel(quiet_market, n_periods=48,
                                       days_per_period=21, seed=seed)
            est = calibrate(panel, CalibrationConfig(risk_free_rate=0.03))
            errs.append(np.abs(est.A - quiet_market.A))
        # monthly drift is noisy (sd ~ sigma / sqrt(48)) but unbiased
        assert np.median(np.vstack(errs)) < 0.08


class TestDegenerateInputs:
    def test_constant_prices_error(self):
        prices = np.full((200, 2), 10.0)
        with pytest.raises(ValueError, match="singular|jump-free"):
            calibrate(prices, CalibrationConfig())

    def test_duplicated_asset_error(self):
        rng = np.random.default_rng(3)
        col = 10.0 * np.exp(np.cumsum(rng.normal(0, 0.01, 300)))
        with pytest.raises(ValueError, match="singular"):
            calibrate(np.column_stack([col, col]), CalibrationConfig())

    def test_too_short_panel(self):
        rng = np.random.default_rng(4)
        prices = 10.0 * np.exp(np.cumsum(rng.normal(0, 0.01, (20, 1)), axis=0))
        with pytest.raises(ValueError, match="30"):
            calibrate(prices, CalibrationConfig())


class TestInvariance:
    def test_scale_equivariance(self, identifiable_market):
        panel = sample_price_panel(identifiable_market, n_periods=24,
                                   days_per_period=21, seed=9)
        est1 = calibrate(panel.prices, CalibrationConfig(risk_free_rate=0.03))
        est2 = calibrate(panel.prices * 1000.0, CalibrationConfig(risk_free_rate=0.03))
        assert np.allclose(est1.sigma, est2.sigma, rtol=1e-12)
        assert est1.lambda_common == est2.lambda_common
        assert np.allclose(est1.A, est2.A, rtol=0, atol=1e-12)

    def test_window_restricts_sample(self, identifiable_market):
        panel = sample_price_panel(identifiable_market, n_periods=48,
                                   days_per_period=21, seed=10)
        full = calibrate(panel, CalibrationConfig(risk_free_rate=0.03))
        tail = calibrate(panel, CalibrationConfig(window=200, risk_free_rate=0.03))
        assert not np.allclose(full.sigma, tail.sigma)
