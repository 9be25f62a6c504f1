"""Data ingestion, serialization and report emission.

All numeric output goes through :func:`fmt`, which uses Python's shortest
round-tripping float representation, so every value written to a report
can be parsed back bit-exactly and repeated runs produce byte-identical
files.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime
import json
import os
from pathlib import Path

import numpy as np

from .model import ModelParams, NormalJumpLaw, PointJumpLaw
from .bounds import InvestmentPlan
from .backtest import BacktestLedger, PricePanel
from .calibrate import CalibrationConfig

__all__ = [
    "fmt",
    "load_prices",
    "load_sample_panel",
    "params_to_dict",
    "params_from_dict",
    "save_params",
    "load_params",
    "plan_from_dict",
    "calibration_from_dict",
    "load_run_config",
    "default_output_dir",
    "write_ledger_csv",
    "write_ledger_json",
    "write_summary_csv",
    "write_paths_csv",
    "write_risk_csv",
]

OUTPUT_DIR_ENV = "JUMPFOLIO_OUTPUT_DIR"


def fmt(v) -> str:
    """Shortest decimal text that parses back to exactly the same float."""
    return repr(float(v))


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "."))


# ---------------------------------------------------------------------------
# price panels

def load_prices(path) -> PricePanel:
    """Read a daily price CSV with header ``date,<ticker1>,<ticker2>,...``.

    Dates must be ISO-8601 and strictly increasing; prices must be
    positive decimals.  Offending rows are reported with their 1-based
    line numbers.  Periods are calendar months.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if len(header) < 2 or header[0].strip().lower() != "date":
            raise ValueError(f"{path}: header must be 'date,<ticker>,...', got {header}")
        tickers = [t.strip() for t in header[1:]]

        dates, rows = [], []
        bad_lines = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            if any(not c.strip() for c in row[1:]):
                bad_lines.append(lineno)
                continue
            try:
                values = [float(c) for c in row[1:]]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric price in {row[1:]}") from None
            if any(v <= 0 for v in values):
                raise ValueError(f"{path}:{lineno}: non-positive price in {row[1:]}")
            dates.append((lineno, row[0].strip()))
            rows.append(values)

        if bad_lines:
            raise ValueError(f"{path}: rows with missing prices at lines {bad_lines}")
        if not rows:
            raise ValueError(f"{path}: no data rows")

    parsed = []
    for lineno, text in dates:
        try:
            parsed.append(datetime.date.fromisoformat(text))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: invalid ISO date {text!r}") from None
    for i in range(1, len(parsed)):
        if parsed[i] <= parsed[i - 1]:
            raise ValueError(
                f"{path}:{dates[i][0]}: date {parsed[i]} out of order (follows {parsed[i - 1]})")

    return PricePanel.from_daily(parsed, np.array(rows), tickers)


def load_sample_panel() -> PricePanel:
    """Bundled two-asset daily sample panel (six monthly periods)."""
    from importlib.resources import files

    return load_prices(files("jumpfolio").joinpath("data/sample_prices.csv"))


# ---------------------------------------------------------------------------
# model parameters

def _law_to_dict(law) -> dict:
    if isinstance(law, NormalJumpLaw):
        return {"family": "normal", "mean": law.mean, "var": law.var}
    if isinstance(law, PointJumpLaw):
        return {"family": "point", "value": law.value}
    raise TypeError(f"unsupported jump law {type(law).__name__}")


def _law_from_dict(d: dict):
    family = d.get("family")
    if family == "normal":
        return NormalJumpLaw(float(d["mean"]), float(d["var"]))
    if family == "point":
        return PointJumpLaw(float(d["value"]))
    raise ValueError(f"unknown jump-law family {family!r}")


def params_to_dict(params: ModelParams) -> dict:
    return {
        "r": params.r,
        "mu": params.mu.tolist(),
        "sigma": params.sigma.tolist(),
        "rho": params.rho.tolist(),
        "lambda_common": params.lambda_common,
        "lambda_idio": params.lambda_idio.tolist(),
        "common_jump_laws": [_law_to_dict(l) for l in params.common_jump_laws],
        "idio_jump_laws": [_law_to_dict(l) for l in params.idio_jump_laws],
        "A": params.A.tolist(),
        "h": params.h.tolist(),
    }


def params_from_dict(d: dict) -> ModelParams:
    params = ModelParams(
        r=float(d["r"]),
        mu=np.array(d["mu"], dtype=float),
        sigma=np.array(d["sigma"], dtype=float),
        rho=np.array(d["rho"], dtype=float),
        lambda_common=float(d.get("lambda_common", 0.0)),
        lambda_idio=np.array(d["lambda_idio"], dtype=float) if "lambda_idio" in d else None,
        common_jump_laws=tuple(_law_from_dict(x) for x in d.get("common_jump_laws", [])),
        idio_jump_laws=tuple(_law_from_dict(x) for x in d.get("idio_jump_laws", [])),
    )
    if "A" in d:
        params.check_consistency(np.array(d["A"], dtype=float))
    return params


def save_params(params: ModelParams, path) -> None:
    Path(path).write_text(json.dumps(params_to_dict(params), indent=2, sort_keys=True) + "\n")


def load_params(path) -> ModelParams:
    return params_from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# plans and run configuration

PLAN_DEFAULTS = {"tau": 6, "alpha": None, "p": 0.05, "k_star": 0.0,
                 "K": None, "c0": None, "l": 1, "w_prev": None}


def plan_from_dict(d: dict) -> InvestmentPlan:
    """Investment plan from a config mapping; defaults mirror a six-period
    unit-endowment schedule with p = 0.05."""
    cfg = {**PLAN_DEFAULTS, **d}
    tau = int(cfg["tau"])
    alpha = np.ones(tau) if cfg["alpha"] is None else np.asarray(cfg["alpha"], dtype=float)
    w_prev = float(alpha[0]) if cfg["w_prev"] is None else float(cfg["w_prev"])
    c0 = np.inf if cfg["c0"] is None else float(cfg["c0"])
    return InvestmentPlan(tau=tau, alpha=alpha, p=float(cfg["p"]),
                          k_star=float(cfg["k_star"]),
                          K=None if cfg["K"] is None else float(cfg["K"]),
                          c0=c0, l=int(cfg["l"]), w_prev=w_prev)


def calibration_from_dict(d: dict) -> CalibrationConfig:
    known = {f.name for f in dataclasses.fields(CalibrationConfig)}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown calibration settings {sorted(unknown)}")
    return CalibrationConfig(**d)


def load_run_config(path) -> dict:
    """Read and validate a run-configuration JSON file.

    Exactly one of ``params`` (inline model parameters or a path to a
    params JSON) and ``calibration`` may be present; any referenced file
    must exist.
    """
    path = Path(path)
    cfg = json.loads(path.read_text())
    if not isinstance(cfg, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    if ("params" in cfg) and ("calibration" in cfg):
        raise ValueError(f"{path}: give either explicit params or calibration settings, not both")
    if isinstance(cfg.get("params"), str):
        ref = Path(cfg["params"])
        if not ref.is_absolute():
            ref = path.parent / ref
        if not ref.exists():
            raise ValueError(f"{path}: referenced params file {ref} does not exist")
        cfg["params"] = json.loads(ref.read_text())
    if isinstance(cfg.get("prices"), str):
        ref = Path(cfg["prices"])
        if not ref.is_absolute():
            ref = path.parent / ref
        if not ref.exists():
            raise ValueError(f"{path}: referenced prices file {ref} does not exist")
        cfg["prices"] = str(ref)
    return cfg


# ---------------------------------------------------------------------------
# report writers

def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_ledger_csv(ledger: BacktestLedger, path) -> None:
    m = len(ledger.records[0].x) if ledger.records else 0
    header = ["period", "wealth", "return_pct"] + \
        [f"x_{j + 1}" for j in range(m)] + ["q", "binding"]
    rows = []
    for rec in ledger.records:
        rows.append([rec.period, fmt(rec.wealth_end), fmt(rec.return_pct)]
                    + [fmt(v) for v in rec.x] + [fmt(rec.q), rec.binding])
    _write_csv(path, header, rows)


def write_ledger_json(ledger: BacktestLedger, path) -> None:
    doc = {
        "k_star": ledger.k_star,
        "cash_interest": ledger.cash_interest,
        "wealth": ledger.wealth.tolist(),
        "terminal_wealth": ledger.terminal_wealth,
        "total_return_pct": ledger.total_return_pct,
        "periodic_rate_pct": ledger.periodic_rate_pct,
        "error": ledger.error,
        "periods": [
            {
                "period": rec.period,
                "wealth_start": rec.wealth_start,
                "wealth_end": rec.wealth_end,
                "return_pct": rec.return_pct,
                "x": rec.x.tolist(),
                "q": rec.q,
                "binding": rec.binding,
                "volumes": rec.volumes.tolist(),
                "cash": rec.cash,
                "cash_growth": rec.cash_growth,
                "alpha_next": rec.alpha_next,
            }
            for rec in ledger.records
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_summary_csv(ledgers, tau: int, path) -> None:
    """Stop-loss sweep summary: one row per rate, wealth by period."""
    header = ["k_star"] + [f"W_{l}" for l in range(1, tau + 1)] + ["return_pct"]
    rows = []
    for led in ledgers:
        wealth = [fmt(w) for w in led.wealth[1:]]
        wealth += [""] * (tau - len(wealth))
        rows.append([fmt(led.k_star)] + wealth + [fmt(led.total_return_pct)])
    _write_csv(path, header, rows)


def write_paths_csv(batch, path) -> None:
    header = ["path", "terminal_wealth", "lambda_std", "ruined"]
    rows = [
        [i, fmt(batch.terminal_wealth[i]), fmt(batch.lambda_std[i]),
         int(batch.ruined[i])]
        for i in range(len(batch))
    ]
    _write_csv(path, header, rows)


def write_risk_csv(entries, path) -> None:
    """Rows of (measure, level, value); level may be empty for moments."""
    rows = [[name, "" if level is None else fmt(level), fmt(value)]
            for name, level, value in entries]
    _write_csv(path, ["measure", "level", "value"], rows)
