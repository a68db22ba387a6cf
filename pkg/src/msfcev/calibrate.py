"""Fit model parameters to an option chain by mean squared price error.

Protocol: minimize the mean of (model price - mid price)^2 over the
quotes, either jointly (one parameter set for all maturities) or per
maturity.  Mixed drivers keep beta = gamma = 1 fixed; the free parameters
per model are

    bs            sigma
    mfbs, msfbs   sigma, hurst
    cev           sigma, alpha
    mfcev, msfcev sigma, alpha, hurst

The optimizer is multi-start Nelder-Mead on a logistic reparameterization
of the bounded box, with low-discrepancy starting points, deterministic
for a given seed.
"""

from __future__ import annotations

import csv
import json
import os
import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.special import expit, logit
from scipy.stats import qmc

from .errors import CalibrationError, ChainFormatError, DomainError
from .pricing import MODEL_NAMES, Driver, MarketEnv, ModelSpec, call_prices

__all__ = [
    "MarketQuote",
    "OptionChain",
    "OptimizerConfig",
    "CalibrationReport",
    "ComparisonRow",
    "PARAM_BOUNDS",
    "free_parameters",
    "build_model",
    "load_chain",
    "mse_objective",
    "fit",
    "compare_models",
    "synthetic_chain",
    "write_chain_csv",
]

log = logging.getLogger(__name__)

CHAIN_HEADER = ["quote_date", "spot", "rate", "strike", "maturity_years",
                "mid_price"]
PARAM_BOUNDS = {
    "sigma": (1e-4, 5.0),
    "alpha": (0.0, 1.999),
    "hurst": (0.5, 0.999),
}
_MATURITY_DECIMALS = 6  # grouping key resolution in years


@dataclass(frozen=True)
class MarketQuote:
    strike: float
    maturity: float
    mid_price: float
    spot: float
    rate: float


@dataclass(frozen=True)
class OptionChain:
    quote_date: str
    quotes: tuple

    def __post_init__(self) -> None:
        if not self.quotes:
            raise ChainFormatError("option chain is empty")
        spots = {q.spot for q in self.quotes}
        if len(spots) > 1:
            raise ChainFormatError(
                f"inconsistent spot values for {self.quote_date}: {sorted(spots)}")

    @property
    def spot(self) -> float:
        return self.quotes[0].spot

    def maturities(self) -> list:
        return sorted({round(q.maturity, _MATURITY_DECIMALS) for q in self.quotes})


@dataclass(frozen=True)
class OptimizerConfig:
    n_starts: int = 8
    seed: int = 0
    maxiter: int = 400
    polish_maxiter: int = 1500
    xatol: float = 1e-8
    fatol: float = 1e-13

    def __post_init__(self) -> None:
        if self.n_starts < 1:
            raise DomainError("n_starts must be >= 1")


@dataclass(frozen=True)
class CalibrationReport:
    mode: str
    fitted: dict
    mse_per_maturity: dict
    total_mse: float
    iterations: int
    converged: bool

    def to_json(self) -> str:
        return json.dumps({
            "mode": self.mode,
            "fitted": self.fitted,
            "mse_per_maturity": self.mse_per_maturity,
            "total_mse": self.total_mse,
            "iterations": self.iterations,
            "converged": self.converged,
        }, indent=2)


@dataclass(frozen=True)
class ComparisonRow:
    model: str
    failed: bool
    total_mse: float
    mse_per_maturity: dict
    fitted: dict
    error: str = ""


def free_parameters(model_name: str) -> tuple:
    """Names of the calibrated parameters for a short model name."""
    if model_name not in MODEL_NAMES:
        raise DomainError(f"unknown model {model_name!r}")
    family, driver = MODEL_NAMES[model_name]
    names = ["sigma"]
    if family.value == "cev":
        names.append("alpha")
    if driver != Driver.CLASSICAL:
        names.append("hurst")
    return tuple(names)


def build_model(model_name: str, values: dict) -> ModelSpec:
    """ModelSpec from fitted values; beta = gamma = 1 for mixed drivers."""
    return ModelSpec.make(
        model_name,
        sigma=values["sigma"],
        alpha=values.get("alpha", 1.0),
        hurst=values.get("hurst", 0.5),
        beta=1.0,
        gamma=1.0 if MODEL_NAMES[model_name][1] != Driver.CLASSICAL else 0.0,
    )


# ---------------------------------------------------------------------------
# chain ingestion
# ---------------------------------------------------------------------------

def load_chain(source, moneyness_filter: bool = False) -> OptionChain:
    """Parse a ChainCsv stream or path into an OptionChain.

    Header (required, comma separated):
    ``quote_date,spot,rate,strike,maturity_years,mid_price``.
    Rows violating the quote invariants raise with their row number.  With
    ``moneyness_filter`` set, quotes deeper than 5% in the money
    (strike < 0.95 * spot) are dropped.
    """
    if isinstance(source, (str, bytes)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return load_chain(fh, moneyness_filter)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise ChainFormatError("empty chain file") from None
    header = [h.strip() for h in header]
    if header != CHAIN_HEADER:
        raise ChainFormatError(
            f"bad header {header!r}; expected {','.join(CHAIN_HEADER)}")
    quotes = []
    dates = set()
    for row_no, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(CHAIN_HEADER):
            raise ChainFormatError(f"row {row_no}: expected "
                                   f"{len(CHAIN_HEADER)} fields, got {len(row)}")
        date = row[0].strip()
        try:
            spot, rate, strike, maturity, mid = (float(v) for v in row[1:])
        except ValueError as exc:
            raise ChainFormatError(f"row {row_no}: {exc}") from None
        if strike <= 0.0:
            raise ChainFormatError(f"row {row_no}: strike must be positive")
        if maturity <= 0.0:
            raise ChainFormatError(f"row {row_no}: maturity must be positive")
        if mid <= 0.0:
            raise ChainFormatError(f"row {row_no}: mid price must be positive")
        if spot <= 0.0:
            raise ChainFormatError(f"row {row_no}: spot must be positive")
        if rate < 0.0:
            raise ChainFormatError(f"row {row_no}: rate must be >= 0")
        dates.add(date)
        if moneyness_filter and strike < 0.95 * spot:
            continue
        quotes.append(MarketQuote(strike=strike, maturity=maturity,
                                  mid_price=mid, spot=spot, rate=rate))
    if len(dates) > 1:
        raise ChainFormatError(f"multiple quote dates in one chain: {sorted(dates)}")
    if not quotes:
        raise ChainFormatError("no quotes after parsing/filtering")
    return OptionChain(quote_date=next(iter(dates)), quotes=tuple(quotes))


def write_chain_csv(chain: OptionChain, target) -> None:
    if isinstance(target, (str, bytes, os.PathLike)):
        with open(target, "w", encoding="utf-8", newline="") as fh:
            write_chain_csv(chain, fh)
        return
    writer = csv.writer(target)
    writer.writerow(CHAIN_HEADER)
    for q in chain.quotes:
        writer.writerow([chain.quote_date, f"{q.spot:.10g}", f"{q.rate:.10g}",
                         f"{q.strike:.10g}", f"{q.maturity:.10g}",
                         f"{q.mid_price:.10g}"])


# ---------------------------------------------------------------------------
# objective
# ---------------------------------------------------------------------------

def _groups(quotes) -> list:
    """Quotes bucketed by (maturity, rate); strikes vectorized per bucket.

    Quotes are sorted inside each bucket so the objective is bit-identical
    under reordering of the input chain.
    """
    keyed = {}
    for q in quotes:
        key = (round(q.maturity, _MATURITY_DECIMALS), q.rate)
        keyed.setdefault(key, []).append(q)
    out = []
    for (t_key, rate), qs in sorted(keyed.items()):
        qs = sorted(qs, key=lambda q: (q.strike, q.mid_price))
        strikes = np.array([q.strike for q in qs])
        mids = np.array([q.mid_price for q in qs])
        out.append((qs[0].maturity, MarketEnv(rate=rate, spot=qs[0].spot),
                    strikes, mids))
    return out


def _objective(model_name: str, names, vector, groups, n_quotes: int) -> float:
    values = dict(zip(names, vector))
    for name, val in values.items():
        lo, hi = PARAM_BOUNDS[name]
        if not lo <= val <= hi:
            return math.inf
    try:
        model = build_model(model_name, values)
        sse = 0.0
        for maturity, env, strikes, mids in groups:
            prices = call_prices(model, env, maturity, strikes)
            sse += float(np.sum((prices - mids) ** 2))
        return sse / n_quotes
    except (DomainError, FloatingPointError) as exc:
        log.warning("objective rejected %s at %s: %s", model_name, values, exc)
        return math.inf


def mse_objective(model_name: str, params, chain: OptionChain) -> float:
    """Mean squared error of the model against the chain's mid prices."""
    names = free_parameters(model_name)
    vector = np.asarray(params, dtype=float)
    if vector.shape != (len(names),):
        raise DomainError(
            f"{model_name} takes parameters {names}, got vector of "
            f"shape {vector.shape}")
    return _objective(model_name, names, vector, _groups(chain.quotes),
                      len(chain.quotes))


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

def _box(names):
    lo = np.array([PARAM_BOUNDS[n][0] for n in names])
    hi = np.array([PARAM_BOUNDS[n][1] for n in names])
    return lo, hi


def _fit_vector(model_name: str, names, groups, n_quotes: int,
                cfg: OptimizerConfig):
    """Multi-start Nelder-Mead in logistic coordinates; returns best fit."""
    lo, hi = _box(names)
    span = hi - lo

    def to_params(u):
        return lo + span * expit(u)

    def objective_u(u):
        return _objective(model_name, names, to_params(u), groups, n_quotes)

    sampler = qmc.Sobol(d=len(names), scramble=True, seed=cfg.seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # Sobol balance warning for odd counts
        unit = sampler.random(cfg.n_starts)
    unit = 0.02 + 0.96 * unit  # keep logits finite
    starts = logit(unit)

    best = None
    iterations = 0
    for u0 in starts:
        res = optimize.minimize(objective_u, u0, method="Nelder-Mead",
                                options={"maxiter": cfg.maxiter,
                                         "xatol": cfg.xatol,
                                         "fatol": cfg.fatol,
                                         "adaptive": len(names) > 2})
        iterations += res.nit
        if math.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise CalibrationError(
            f"no optimizer start produced a finite objective for {model_name}")
    polish = optimize.minimize(objective_u, best.x, method="Nelder-Mead",
                               options={"maxiter": cfg.polish_maxiter,
                                        "xatol": cfg.xatol,
                                        "fatol": cfg.fatol,
                                        "adaptive": len(names) > 2})
    iterations += polish.nit
    if math.isfinite(polish.fun) and polish.fun <= best.fun:
        best = polish
    params = np.clip(to_params(best.x), lo, hi)
    return params, float(best.fun), iterations, bool(best.success)


def _per_maturity_mse(model_name, values, groups) -> dict:
    model = build_model(model_name, values)
    out = {}
    for maturity, env, strikes, mids in groups:
        prices = call_prices(model, env, maturity, strikes)
        out[f"{maturity:.6f}"] = float(np.mean((prices - mids) ** 2))
    return out


def fit(chain: OptionChain, model_name: str, mode: str = "joint",
        cfg: OptimizerConfig = OptimizerConfig()) -> CalibrationReport:
    """Calibrate one model to the chain.

    ``mode`` is ``joint`` (one parameter set for every maturity) or
    ``per_maturity`` (independent fits; maturities with fewer than two
    quotes are skipped with a warning).  ``total_mse`` is the mean of
    squared errors over all quotes in scope, equivalently the
    quote-count-weighted combination of the per-maturity values.
    """
    names = free_parameters(model_name)
    if mode == "joint":
        groups = _groups(chain.quotes)
        params, total, iters, ok = _fit_vector(model_name, names, groups,
                                               len(chain.quotes), cfg)
        values = dict(zip(names, (float(v) for v in params)))
        return CalibrationReport(
            mode=mode,
            fitted={"joint": values},
            mse_per_maturity=_per_maturity_mse(model_name, values, groups),
            total_mse=total,
            iterations=iters,
            converged=ok,
        )
    if mode != "per_maturity":
        raise DomainError(f"mode must be 'joint' or 'per_maturity', got {mode!r}")
    fitted = {}
    mse_map = {}
    iterations = 0
    converged = True
    sse = 0.0
    n_scope = 0
    for t_key in chain.maturities():
        quotes = [q for q in chain.quotes
                  if round(q.maturity, _MATURITY_DECIMALS) == t_key]
        if len(quotes) < 2:
            warnings.warn(f"maturity {t_key}: fewer than two quotes, skipped",
                          RuntimeWarning, stacklevel=2)
            continue
        groups = _groups(quotes)
        params, group_mse, iters, ok = _fit_vector(model_name, names, groups,
                                                   len(quotes), cfg)
        key = f"{quotes[0].maturity:.6f}"
        fitted[key] = dict(zip(names, (float(v) for v in params)))
        mse_map[key] = group_mse
        iterations += iters
        converged = converged and ok
        sse += group_mse * len(quotes)
        n_scope += len(quotes)
    if not fitted:
        raise CalibrationError("per-maturity fit found no usable maturity group")
    return CalibrationReport(mode=mode, fitted=fitted, mse_per_maturity=mse_map,
                             total_mse=sse / n_scope, iterations=iterations,
                             converged=converged)


def compare_models(chain: OptionChain, catalog, mode: str = "joint",
                   cfg: OptimizerConfig = OptimizerConfig()) -> list:
    """Fit every model in the catalog; failures become marked rows."""
    catalog = list(catalog)
    if not catalog:
        raise DomainError("catalog must be non-empty")
    rows = []
    for name in catalog:
        try:
            report = fit(chain, name, mode, cfg)
            rows.append(ComparisonRow(model=name, failed=False,
                                      total_mse=report.total_mse,
                                      mse_per_maturity=report.mse_per_maturity,
                                      fitted=report.fitted))
        except (CalibrationError, ChainFormatError, DomainError) as exc:
            rows.append(ComparisonRow(model=name, failed=True,
                                      total_mse=math.nan, mse_per_maturity={},
                                      fitted={}, error=str(exc)))
    return rows


def synthetic_chain(model: ModelSpec, env: MarketEnv, maturities,
                    n_strikes: int = 10, width: float = 1.3,
                    noise: float = 0.0, seed: int | None = None,
                    quote_date: str = "2024-01-02") -> OptionChain:
    """Model-generated chain for self-tests and demos.

    Strikes per maturity span the forward +/- ``width`` terminal standard
    deviations (never below 95% of spot, so the moneyness filter is a
    no-op).  Optional additive Gaussian price noise; noisy mids are
    floored at 0.01 to keep the quote invariants, which matters only for
    strikes placed far enough out that the floor is a tail event.
    """
    from .pricing import call_prices as _prices
    from .pricing import driver_variance as _dvar
    rng = np.random.default_rng(seed) if noise > 0.0 else None
    rel_vol = model.sigma * env.spot ** (0.5 * model.alpha - 1.0)
    quotes = []
    for t in maturities:
        sd = env.spot * rel_vol * math.sqrt(
            _dvar(model.driver, model.driver_params, t))
        fwd = env.spot * math.exp(env.rate * t)
        lo = max(0.95 * env.spot, fwd - width * sd)
        strikes = np.linspace(lo, fwd + width * sd, n_strikes)
        prices = _prices(model, env, t, strikes)
        if rng is not None:
            prices = np.maximum(prices + rng.normal(0.0, noise, prices.shape),
                                0.01)
        for k, p in zip(strikes, prices):
            quotes.append(MarketQuote(strike=float(k), maturity=float(t),
                                      mid_price=float(p), spot=env.spot,
                                      rate=env.rate))
    return OptionChain(quote_date=quote_date, quotes=tuple(quotes))


def comparison_to_json(rows) -> str:
    return json.dumps([{
        "model": r.model,
        "failed": r.failed,
        "total_mse": None if math.isnan(r.total_mse) else r.total_mse,
        "mse_per_maturity": r.mse_per_maturity,
        "fitted": r.fitted,
        "error": r.error,
    } for r in rows], indent=2)
