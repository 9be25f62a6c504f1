import numpy as np
import pytest

from jumpfolio import InvestmentPlan, ModelParams, NormalJumpLaw


@pytest.fixture(scope="session")
def jumpy_market():
    """Two risky assets with both jump streams active (per-period units)."""
    return ModelParams(
        r=0.03,
        mu=[0.08, 0.06],
        sigma=[0.20, 0.25],
        rho=[[1.0, 0.3], [0.3, 1.0]],
        lambda_common=0.3,
        lambda_idio=[0.2, 0.2],
        common_jump_laws=(NormalJumpLaw(-0.04, 0.01), NormalJumpLaw(-0.03, 0.008)),
        idio_jump_laws=(NormalJumpLaw(0.02, 0.005), NormalJumpLaw(-0.01, 0.008)),
    )


@pytest.fixture(scope="session")
def diffusion_market():
    """Same diffusion part, no jumps."""
    return ModelParams(
        r=0.03,
        mu=[0.08, 0.06],
        sigma=[0.20, 0.25],
        rho=[[1.0, 0.3], [0.3, 1.0]],
    )


@pytest.fixture(scope="session")
def single_asset_market():
    return ModelParams(r=0.03, mu=[0.07], sigma=[0.2], rho=[[1.0]])


@pytest.fixture
def six_period_plan():
    """Unit endowments over six periods, p = 0.05, no caps."""
    return InvestmentPlan(tau=6, alpha=np.ones(6), p=0.05)
