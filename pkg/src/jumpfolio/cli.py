"""Command-line surface: calibrate, optimize, simulate, backtest, bound-check.

Configuration comes from an optional JSON file plus flags; flags always
win.  Outputs are deterministic functions of (config, seed): reruns with
the same inputs produce byte-identical files.  Failures print a
machine-readable JSON error on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np
from scipy.stats import norm

from . import bounds, io, risk
from .backtest import sweep_stop_loss
from .calibrate import calibrate
from .model import ModelParams
from .optimizer import solve
from .simulate import sample_terminal_wealth

__all__ = ["main", "cli_dispatch"]


def _add_plan_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tau", type=int, default=None, help="horizon in periods")
    p.add_argument("--alpha", default=None,
                   help="comma-separated endowment schedule (default: ones)")
    p.add_argument("--p", type=float, default=None, dest="risk_p",
                   help="risk probability level (default 0.05)")
    p.add_argument("--k-star", default=None,
                   help="stop-loss rate (a comma list sweeps backtests)")
    p.add_argument("--floor", type=float, default=None,
                   help="explicit wealth floor K (overrides --k-star)")
    p.add_argument("--c0", type=float, default=None, help="portfolio drift cap")
    p.add_argument("--period", type=int, default=None,
                   help="current period index l (1-based)")
    p.add_argument("--wealth", type=float, default=None,
                   help="wealth at the start of the current period")
    p.add_argument("--weighting", choices=["endowment", "wealth"], default=None)
    p.add_argument("--c9", choices=["stationary", "unweighted"], default=None,
                   dest="c9_convention")


def _add_market_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="run-configuration JSON file")
    p.add_argument("--params", default=None, help="model-parameters JSON file")
    p.add_argument("--prices", default=None, help="daily price CSV")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jumpfolio",
        description="Multi-period allocation under a jump-diffusion market "
                    "with a comonotonic CVaR floor.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="estimate model parameters from prices")
    _add_market_flags(p)
    p.add_argument("--kappa", type=float, default=None, help="jump threshold multiplier")
    p.add_argument("--window", type=int, default=None, help="trailing days used")
    p.add_argument("--days-per-period", type=float, default=None)
    p.add_argument("--common-rule", type=float, default=None,
                   help="min fraction of assets flagged together for a common jump")
    p.add_argument("--r", type=float, default=None, help="per-period risk-free rate")
    p.add_argument("--out", default=None, help="output params JSON path")

    p = sub.add_parser("optimize", help="closed-form allocation for the current period")
    _add_market_flags(p)
    _add_plan_flags(p)

    p = sub.add_parser("simulate", help="Monte Carlo terminal wealth at a fixed mix")
    _add_market_flags(p)
    _add_plan_flags(p)
    p.add_argument("--x", default=None, help="comma-separated allocation (default: solver's)")
    p.add_argument("--paths", type=int, default=None, help="number of paths")
    p.add_argument("--seed", type=int, required=True, help="RNG seed (required)")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("backtest", help="periodic-rebalancing backtest over a price CSV")
    _add_market_flags(p)
    _add_plan_flags(p)
    p.add_argument("--cash-interest", action="store_true", default=None,
                   help="accrue exp(r/tau) on the cash sleeve")
    p.add_argument("--timing", choices=["fixed", "rolling"], default=None,
                   help="calibration timing (default fixed)")
    p.add_argument("--calibration-prices", default=None,
                   help="separate price CSV for calibration")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("bound-check", help="convex-order and additivity batteries")
    _add_market_flags(p)
    _add_plan_flags(p)
    p.add_argument("--x", default=None, help="comma-separated allocation (default: solver's)")
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)

    return parser


def _csv_floats(text: str) -> np.ndarray:
    return np.array([float(t) for t in str(text).split(",") if t.strip() != ""])


def _merge(cfg: dict, section: str, **flags) -> dict:
    merged = dict(cfg.get(section, {}))
    for key, value in flags.items():
        if value is not None:
            merged[key] = value
    return merged


def _load_cfg(args) -> dict:
    return io.load_run_config(args.config) if args.config else {}


def _plan(args, cfg: dict):
    k_star = args.k_star
    if k_star is not None:
        k_star = float(_csv_floats(k_star)[0])
    d = _merge(cfg, "plan", tau=args.tau,
               alpha=None if args.alpha is None else _csv_floats(args.alpha).tolist(),
               p=args.risk_p, k_star=k_star, K=args.floor, c0=args.c0,
               l=args.period, w_prev=args.wealth)
    return io.plan_from_dict(d)


def _conventions(args, cfg: dict) -> dict:
    d = _merge(cfg, "conventions", weighting=args.weighting,
               c9_convention=args.c9_convention)
    return {"weighting": d.get("weighting", "endowment"),
            "c9_convention": d.get("c9_convention", "stationary")}


def _market(args, cfg: dict) -> ModelParams:
    """Explicit params (flag or config), else calibration from prices."""
    if args.params:
        return io.load_params(args.params)
    if cfg.get("params"):
        return io.params_from_dict(cfg["params"])
    prices = args.prices or cfg.get("prices")
    if prices is None:
        raise ValueError("no model parameters: give --params, a config with "
                         "'params', or --prices to calibrate from")
    panel = io.load_prices(prices)
    return calibrate(panel, io.calibration_from_dict(cfg.get("calibration", {})))


def _out_dir(args, cfg: dict) -> Path:
    out = Path(args.out) if getattr(args, "out", None) else \
        Path(cfg.get("output_dir", io.default_output_dir()))
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# command handlers

def _cmd_calibrate(args) -> int:
    cfg = _load_cfg(args)
    prices = args.prices or cfg.get("prices")
    if prices is None:
        raise ValueError("calibrate needs --prices or a config with 'prices'")
    cal = _merge(cfg, "calibration", jump_threshold=args.kappa, window=args.window,
                 days_per_period=args.days_per_period,
                 common_jump_rule=args.common_rule, risk_free_rate=args.r)
    params = calibrate(io.load_prices(prices), io.calibration_from_dict(cal))
    text = json.dumps(io.params_to_dict(params), indent=2, sort_keys=True)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return 0


def _cmd_optimize(args) -> int:
    cfg = _load_cfg(args)
    params = _market(args, cfg)
    plan = _plan(args, cfg)
    rep = solve(params, plan, **_conventions(args, cfg))

    def scrub(v):  # degenerate candidates are NaN/inf; keep the JSON strict
        return None if isinstance(v, float) and not math.isfinite(v) else v

    doc = {
        "q1": scrub(rep.q1), "q2": scrub(rep.q2), "q3": scrub(rep.q3),
        "q": rep.q, "binding": rep.binding,
        "x": rep.x.tolist(), "x_star": rep.x_star.tolist(),
        "objective": rep.objective,
        "risk_slack": scrub(rep.constraint_residuals[0]),
        "drift_slack": scrub(rep.constraint_residuals[1]),
        "b1": scrub(rep.b1), "b2": scrub(rep.b2), "b3": scrub(rep.b3),
        "warning": rep.warning,
    }
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def _resolve_x(args, cfg, params, plan, conventions) -> np.ndarray:
    if args.x is not None:
        return _csv_floats(args.x)
    if cfg.get("x") is not None:
        return np.asarray(cfg["x"], dtype=float)
    return solve(params, plan, **conventions).x


def _cmd_simulate(args) -> int:
    cfg = _load_cfg(args)
    params = _market(args, cfg)
    plan = _plan(args, cfg)
    conventions = _conventions(args, cfg)
    x = _resolve_x(args, cfg, params, plan, conventions)
    sim = _merge(cfg, "simulation", paths=args.paths, workers=args.workers)
    n_paths = int(sim.get("paths", 10000))
    workers = int(sim.get("workers", 1))

    batch = sample_terminal_wealth(params, plan, x, n_paths, seed=args.seed,
                                   workers=workers,
                                   weighting=conventions["weighting"])
    out = _out_dir(args, cfg)
    io.write_paths_csv(batch, out / "paths.csv")

    w = batch.terminal_wealth
    coeffs = bounds.bound_coefficients(params, plan, x,
                                       weighting=conventions["weighting"])
    entries = [
        ("paths", None, float(n_paths)),
        ("ruined", None, float(batch.ruin_count)),
        ("mean", None, float(np.mean(w))),
        ("sd", None, float(np.std(w, ddof=1))),
        ("analytic_bound_mean", None, bounds.lower_bound_mean(coeffs, plan)),
    ]
    for level in (plan.p, 0.5, 1.0 - plan.p):
        entries.append(("var", level, risk.var(w, level)))
    entries.append(("cvar", 1.0 - plan.p, risk.cvar(w, 1.0 - plan.p)))
    entries.append(("clvar", plan.p, risk.clvar(w, plan.p)))
    io.write_risk_csv(entries, out / "risk_measures.csv")
    print(f"wrote {out / 'paths.csv'} and {out / 'risk_measures.csv'} "
          f"({n_paths} paths, {batch.ruin_count} ruined)")
    return 0


def _params_source(args, cfg, panel):
    """Fixed ModelParams, or a rolling per-period calibration callable."""
    timing = args.timing or cfg.get("backtest", {}).get("calibration_timing", "fixed")
    if args.params or cfg.get("params"):
        if args.params:
            return io.load_params(args.params)
        return io.params_from_dict(cfg["params"])
    cal_cfg = io.calibration_from_dict(cfg.get("calibration", {}))
    cal_prices = args.calibration_prices or cfg.get("calibration_prices")
    cal_panel = io.load_prices(cal_prices) if cal_prices else None
    if timing == "fixed":
        return calibrate(cal_panel if cal_panel is not None else panel, cal_cfg)

    def rolling(a_panel, l):
        head = a_panel.prices[: a_panel.boundaries[l - 1]]
        parts = [cal_panel.prices, head] if cal_panel is not None else [head]
        parts = [p for p in parts if len(p)]
        n_rows = sum(p.shape[0] for p in parts)
        if n_rows < 31:
            raise ValueError(f"rolling calibration at period {l}: only "
                             f"{n_rows} prior rows")
        return calibrate(np.vstack(parts), cal_cfg)

    return rolling


def _cmd_backtest(args) -> int:
    cfg = _load_cfg(args)
    prices = args.prices or cfg.get("prices")
    if prices is None:
        raise ValueError("backtest needs --prices or a config with 'prices'")
    panel = io.load_prices(prices)
    plan = _plan(args, cfg)
    conventions = _conventions(args, cfg)
    bt = _merge(cfg, "backtest", cash_interest=args.cash_interest,
                workers=args.workers)
    cash_interest = bool(bt.get("cash_interest", False))
    workers = int(bt.get("workers", 1))
    source = _params_source(args, cfg, panel)

    if args.k_star is not None:
        k_list = _csv_floats(args.k_star).tolist()
    else:
        k_list = bt.get("k_star_list") or [plan.k_star]

    ledgers = sweep_stop_loss(panel, source, plan, k_list,
                              cash_interest=cash_interest, workers=workers,
                              **conventions)
    out = _out_dir(args, cfg)
    for led in ledgers:
        tag = io.fmt(led.k_star).replace(".", "p")
        io.write_ledger_csv(led, out / f"ledger_k{tag}.csv")
        io.write_ledger_json(led, out / f"ledger_k{tag}.json")
    io.write_summary_csv(ledgers, plan.tau, out / "summary.csv")

    header = ["k_star"] + [f"W_{l}" for l in range(1, plan.tau + 1)] + ["return_pct"]
    print(",".join(header))
    for led in ledgers:
        wealth = [f"{w:.4f}" for w in led.wealth[1:]]
        wealth += ["-"] * (plan.tau - len(wealth))
        line = [f"{led.k_star:g}"] + wealth + [f"{led.total_return_pct:.4f}"]
        print(",".join(line))
        if led.error:
            print(f"  error: {led.error}")
    print(f"wrote {out / 'summary.csv'}")
    return 0


def _cmd_bound_check(args) -> int:
    cfg = _load_cfg(args)
    params = _market(args, cfg)
    plan = _plan(args, cfg)
    conventions = _conventions(args, cfg)
    x = _resolve_x(args, cfg, params, plan, conventions)
    sim = _merge(cfg, "simulation", paths=args.paths)
    n_paths = int(sim.get("paths", 20000))
    seed = args.seed if args.seed is not None else int(sim.get("seed", 0))

    failures = 0
    weighting = conventions["weighting"]
    coeffs = bounds.bound_coefficients(params, plan, x, weighting=weighting)
    batch = sample_terminal_wealth(params, plan, x, n_paths, seed=seed,
                                   weighting=weighting)
    w = batch.terminal_wealth
    lb = bounds.sample_lower_bound(coeffs, plan, n_paths, seed=seed + 1)

    def report(name, ok, detail):
        nonlocal failures
        failures += 0 if ok else 1
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")

    # convex-order mean equality
    se = float(np.std(w, ddof=1)) / np.sqrt(n_paths)
    diff = abs(float(np.mean(w)) - bounds.lower_bound_mean(coeffs, plan))
    report("convex-order-mean", diff <= 3 * se,
           f"|mc_mean - analytic_bound_mean| = {diff:.6g}, 3*SE = {3 * se:.6g}")

    # stop-loss dominance on an 11-point quantile grid
    grid = np.quantile(w, np.linspace(0.02, 0.98, 11))
    worst = -np.inf
    ok = True
    for d in grid:
        a = np.maximum(lb - d, 0.0)
        b = np.maximum(w - d, 0.0)
        se_ab = np.sqrt(np.var(a, ddof=1) / len(a) + np.var(b, ddof=1) / len(b))
        gap = float(np.mean(a) - np.mean(b))
        worst = max(worst, gap - 3 * se_ab)
        ok &= gap <= 3 * se_ab
    report("stop-loss-dominance", ok,
           f"max(E[(L-d)+] - E[(W-d)+] - 3*SE) = {worst:.6g} over 11 grid points")

    # comonotonic additivity of the bound's tranches on a deterministic grid
    n_grid = 10000
    u = (np.arange(1, n_grid + 1) - 0.5) / n_grid
    z = norm.ppf(u)
    tranche_w = np.concatenate([[plan.w_prev], plan.alpha[plan.l:]])
    expo = coeffs.c1 + coeffs.c2 + np.multiply.outer(z, coeffs.c3 * coeffs.x_vol)
    tranches = tranche_w * np.exp(expo)
    total = tranches.sum(axis=1)
    worst = 0.0
    for level in (plan.p, 0.5, 1 - plan.p):
        gap = abs(risk.var(total, level)
                  - sum(risk.var(tranches[:, k], level) for k in range(tranches.shape[1])))
        worst = max(worst, gap)
    report("comonotonic-additivity", worst <= 1e-9,
           f"max |VaR(sum) - sum VaR| = {worst:.3g} on the {n_grid}-point grid")

    # empirical duality spot check
    rng = np.random.default_rng(seed + 2)
    sample = rng.standard_normal(5001)
    level = 0.1937
    gap = abs(risk.clvar(sample, level) + risk.cvar(-sample, 1 - level))
    report("clvar-duality", gap == 0.0, f"|clvar(X,p) + cvar(-X,1-p)| = {gap:.3g}")

    print(f"{4 - failures}/4 checks passed")
    return 0 if failures == 0 else 1


def cli_dispatch(argv) -> int:
    """Parse argv and run the selected subcommand; returns the exit status."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "calibrate": _cmd_calibrate,
        "optimize": _cmd_optimize,
        "simulate": _cmd_simulate,
        "backtest": _cmd_backtest,
        "bound-check": _cmd_bound_check,
    }
    try:
        return handlers[args.command](args)
    except BrokenPipeError:
        return 1
    except Exception as exc:
        sys.stderr.write(json.dumps(
            {"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1


def main() -> int:
    return cli_dispatch(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
