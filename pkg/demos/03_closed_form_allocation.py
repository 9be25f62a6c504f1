"""The closed-form allocation and its three candidate scales.

The linearized objective is maximized on the ray x = q * Sigma^{-1} A, and
the chosen scale is the smallest of three candidates:

    q1  where the terminal-wealth floor (a CVaR constraint on the
        linearized bound) becomes active,
    q2  the unconstrained stationary point of the ray objective,
    q3  where the portfolio drift cap binds.

This script solves a small market, shows which constraint wins as the
stop-loss rate moves, and cross-checks the solution against a dense grid
search of the same problem.

Run from the repository root:  python demos/03_closed_form_allocation.py
"""

import numpy as np

from jumpfolio import (
    InvestmentPlan,
    ModelParams,
    grid_oracle,
    solve,
    stop_loss_floor,
)

market = ModelParams(r=0.03, mu=[0.05, 0.03], sigma=[0.2, 0.3],
                     rho=[[1.0, 1.0 / 6.0], [1.0 / 6.0, 1.0]])

# ---------------------------------------------------------------------------
# 1. One solve, all diagnostics
# ---------------------------------------------------------------------------
plan = InvestmentPlan(tau=6, alpha=np.ones(6), p=0.05, k_star=0.9, c0=0.08)
rep = solve(market, plan)
print(f"base direction Sigma^-1 A: {np.round(rep.x_star, 4)}")
print(f"candidates: q1 = {rep.q1:.4f} (floor), q2 = {rep.q2:.4f} "
      f"(stationary), q3 = {rep.q3:.4f} (drift cap)")
print(f"chosen q = {rep.q:.4f}, binding: {rep.binding}")
print(f"allocation x = {np.round(rep.x, 4)}, cash fraction "
      f"{rep.allocation.cash_fraction:+.4f}")
print(f"objective (expected linearized wealth) = {rep.objective:.6f}")
print(f"slacks: risk floor {rep.constraint_residuals[0]:.2e}, "
      f"drift cap {rep.constraint_residuals[1]:.2e}")

# ---------------------------------------------------------------------------
# 2. The stop-loss rate dials risk down
# ---------------------------------------------------------------------------
print("\nk_star |   floor K |      q | binding")
for k in (0.0, 0.5, 0.85, 0.9, 0.95, 0.98):
    r = solve(market, InvestmentPlan(tau=6, alpha=np.ones(6), p=0.05,
                                     k_star=k, c0=0.08))
    K = stop_loss_floor(InvestmentPlan(tau=6, alpha=np.ones(6), p=0.05,
                                       k_star=k), market.r)
    print(f"{k:6.2f} | {K:9.4f} | {r.q:6.4f} | {r.binding}")

print("\nlow floors leave the drift cap or the stationary point in charge; "
      "raising k_star hands control to the risk floor and shrinks q.")

# ---------------------------------------------------------------------------
# 3. Independent verification by exhaustive search
# ---------------------------------------------------------------------------
half = float(np.max(np.abs(rep.x))) * 0.6 + 0.05
box = [(v - half, v + half) for v in rep.x]
x_grid, obj_grid = grid_oracle(market, plan, box, 201)
print(f"grid best over a 201x201 box: objective {obj_grid:.8f} at "
      f"{np.round(x_grid, 4)}")
print(f"closed form:                  objective {rep.objective:.8f} at "
      f"{np.round(rep.x, 4)}")
print(f"closed form >= grid best - 1e-6: "
      f"{rep.objective >= obj_grid - 1e-6 * abs(obj_grid)}")
