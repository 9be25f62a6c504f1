"""Regenerate the bundled sample price panel.

The package ships a small two-asset daily panel (six calendar months of
business days) used by the backtest demos and tests.  It is synthetic:
drawn from the jump-diffusion market below, rounded to cents, and frozen.
The generating market has strong positive drift with occasional downward
common jumps, so the stop-loss sweep on it reproduces the qualitative
pattern of interest: terminal wealth falls as the stop-loss rate rises.

Run from the repository root:

    python demos/regenerate_sample_data.py
"""

import csv
from pathlib import Path

import numpy as np

from jumpfolio import ModelParams, NormalJumpLaw, PricePanel, sample_price_panel

OUT = Path(__file__).resolve().parent.parent / "src" / "jumpfolio" / "data" / "sample_prices.csv"

GENERATOR = ModelParams(
    r=0.03,
    mu=[0.113, 0.165],
    sigma=[0.20, 0.26],
    rho=[[1.0, 0.35], [0.35, 1.0]],
    lambda_common=0.35,
    lambda_idio=[0.25, 0.30],
    common_jump_laws=(NormalJumpLaw(-0.12, 0.002), NormalJumpLaw(-0.10, 0.002)),
    idio_jump_laws=(NormalJumpLaw(0.09, 0.0015), NormalJumpLaw(-0.11, 0.0015)),
)
SEED = 34


def main():
    panel = sample_price_panel(GENERATOR, n_periods=6, days_per_period=21,
                               s0=(250.0, 140.0), seed=SEED, boundary="month")
    prices = np.round(panel.prices, 2)
    # sanity: rounding must keep the panel valid and six months long
    check = PricePanel.from_daily(panel.dates, prices, ("AAA", "BBB"))
    assert check.n_periods == 6

    with open(OUT, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "AAA", "BBB"])
        for date, row in zip(panel.dates, prices):
            writer.writerow([date.isoformat(), f"{row[0]:.2f}", f"{row[1]:.2f}"])
    print(f"wrote {OUT} ({len(panel.dates)} rows, "
          f"{panel.dates[0]} .. {panel.dates[-1]})")


if __name__ == "__main__":
    main()
