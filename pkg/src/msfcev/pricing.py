"""Closed-form pricing under CEV dynamics with mixed (sub-)fractional drivers.

Six models are covered, the cross product of two families and three
drivers:

* family ``BS``  -- log-linear dynamics, price from the Black-Scholes
  formula with the driver's variance at maturity as total variance;
* family ``CEV`` -- ``dS = r S dt + sigma S^(alpha/2) dM`` with elasticity
  ``alpha`` in [0, 2), priced through a Feller-type transition density and
  the non-central chi-squared survival function.

Drivers: ``classical`` (Brownian), ``mixed_fractional`` and
``mixed_sub_fractional`` (Brownian plus an independent fractional or
sub-fractional component, weights beta and gamma, Hurst index H in
[1/2, 1)).

The whole non-Brownian effect enters through one scalar function of
maturity, the effective variance Phi(T):

    Phi(T) = sigma^2 (2-alpha)^2 * integral_0^T [beta^2/2
             + gamma^2 * lambda(T-u)] * exp((2-alpha) r u) du

where ``lambda`` is the driver's diffusion kernel (see
:func:`diffusion_kernel`).  The closed form used at runtime evaluates the
integral exactly in terms of Kummer M functions; quadrature of the
integrand is kept as an independent oracle.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy import integrate

from . import specfun
from .errors import DomainError
from .process import MixedDriverParams
from .specfun import Tolerance

__all__ = [
    "Family",
    "Driver",
    "ModelSpec",
    "MarketEnv",
    "PricingIntermediates",
    "MODEL_NAMES",
    "diffusion_kernel",
    "driver_variance",
    "effective_variance",
    "effective_variance_quadrature",
    "cev_intermediates",
    "transition_density",
    "call_price",
    "call_prices",
    "price_curve",
    "write_price_curve_csv",
    "black_scholes_call",
]

_ALPHA_MAX = 2.0 - 1e-6
# chi-squared mixtures near alpha -> 2 need wide Poisson windows
_CHI2_TOL = Tolerance(abs_tol=1e-13, rel_tol=1e-12, max_terms=2_000_000)


class Family(str, Enum):
    BS = "bs"
    CEV = "cev"


class Driver(str, Enum):
    CLASSICAL = "classical"
    MIXED_FRACTIONAL = "mixed_fractional"
    MIXED_SUB_FRACTIONAL = "mixed_sub_fractional"


# short model names used by the CLI, calibration catalog and CSV output
MODEL_NAMES = {
    "bs": (Family.BS, Driver.CLASSICAL),
    "mfbs": (Family.BS, Driver.MIXED_FRACTIONAL),
    "msfbs": (Family.BS, Driver.MIXED_SUB_FRACTIONAL),
    "cev": (Family.CEV, Driver.CLASSICAL),
    "mfcev": (Family.CEV, Driver.MIXED_FRACTIONAL),
    "msfcev": (Family.CEV, Driver.MIXED_SUB_FRACTIONAL),
}


@dataclass(frozen=True)
class ModelSpec:
    """Full model identity: family x driver plus parameters.

    A classical driver is canonicalized to (beta_eff, gamma=0) with
    ``beta_eff = sqrt(beta^2 + gamma^2)``; mixed drivers require
    ``1/2 <= H < 1`` (H = 1/2 being the admitted classical limit).  The
    BS family ignores ``alpha`` and stores it as 2.
    """

    family: Family
    driver: Driver
    sigma: float
    alpha: float
    driver_params: MixedDriverParams

    def __post_init__(self) -> None:
        if self.sigma <= 0.0:
            raise DomainError(f"sigma must be positive, got {self.sigma!r}")
        if self.family == Family.CEV:
            if not 0.0 <= self.alpha <= _ALPHA_MAX:
                raise DomainError(
                    f"alpha must lie in [0, {_ALPHA_MAX}], got {self.alpha!r}")
        else:
            object.__setattr__(self, "alpha", 2.0)
        p = self.driver_params
        if self.driver == Driver.CLASSICAL:
            beta_eff = math.hypot(p.beta, p.gamma)
            object.__setattr__(
                self, "driver_params",
                MixedDriverParams(hurst=0.5, beta=beta_eff, gamma=0.0))
        else:
            if not 0.5 <= p.hurst < 1.0:
                raise DomainError(
                    f"mixed drivers require 1/2 <= hurst < 1, got {p.hurst!r}")

    @staticmethod
    def make(name: str, sigma: float, alpha: float = 1.0, hurst: float = 0.7,
             beta: float | None = None,
             gamma: float | None = None) -> "ModelSpec":
        """Build a model from its short name (bs, mfbs, msfbs, cev, mfcev, msfcev).

        Unspecified weights default to beta = 1 and, for the classical
        names, gamma = 0 (plain Brownian driver); mixed names default to
        gamma = 1.
        """
        try:
            family, driver = MODEL_NAMES[name]
        except KeyError:
            raise DomainError(
                f"unknown model {name!r}; choose from {sorted(MODEL_NAMES)}") from None
        if beta is None:
            beta = 1.0
        if gamma is None:
            gamma = 0.0 if driver == Driver.CLASSICAL else 1.0
        params = MixedDriverParams(hurst=hurst if driver != Driver.CLASSICAL else 0.5,
                                   beta=beta, gamma=gamma)
        return ModelSpec(family=family, driver=driver, sigma=sigma,
                         alpha=alpha, driver_params=params)

    def with_(self, **kwargs) -> "ModelSpec":
        """Copy with replaced fields (driver params may be passed flat)."""
        flat = {k: kwargs.pop(k) for k in ("hurst", "beta", "gamma")
                if k in kwargs}
        if flat:
            kwargs["driver_params"] = replace(self.driver_params, **flat)
        return replace(self, **kwargs)


@dataclass(frozen=True)
class MarketEnv:
    """Risk-free rate (continuous compounding, per year) and spot."""

    rate: float
    spot: float

    def __post_init__(self) -> None:
        if self.rate < 0.0:
            raise DomainError(f"rate must be >= 0, got {self.rate!r}")
        if self.spot <= 0.0:
            raise DomainError(f"spot must be positive, got {self.spot!r}")


@dataclass(frozen=True)
class PricingIntermediates:
    """Scale constants of one (model, maturity, strike) evaluation.

    ``k_s = 1/Phi(T)``; ``y_s``, ``z_s`` are the spot and strike mapped to
    chi-squared coordinates; ``w_s`` is filled only when a terminal price
    is involved (density evaluation).
    """

    phi: float
    k_s: float
    y_s: float
    z_s: float
    w_s: float | None = None


def diffusion_kernel(driver: Driver, hurst: float, t: float) -> float:
    """Second-order kernel lambda(t) of the driver's Ito correction.

    classical              : 1/2
    mixed_fractional       : H t^(2H-1)
    mixed_sub_fractional   : H t^(2H-1) (2 - 2^(2H-1))

    All three coincide (= 1/2) at H = 1/2.  Defined for t >= 0 by
    continuity (value 0 at t = 0 when H > 1/2).
    """
    if not 0.5 <= hurst < 1.0:
        raise DomainError(f"hurst must lie in [1/2, 1), got {hurst!r}")
    if t < 0.0:
        raise DomainError(f"time must be >= 0, got {t!r}")
    if driver == Driver.CLASSICAL:
        return 0.5
    value = hurst * t ** (2.0 * hurst - 1.0)
    if driver == Driver.MIXED_SUB_FRACTIONAL:
        value *= 2.0 - 2.0 ** (2.0 * hurst - 1.0)
    return value


def _subfractional_weight(driver: Driver, hurst: float) -> float:
    """Weight of the t^(2H-1) kernel: 2 - 2^(2H-1) sub-fractional, 1 fractional."""
    if driver == Driver.MIXED_SUB_FRACTIONAL:
        return 2.0 - 2.0 ** (2.0 * hurst - 1.0)
    return 1.0


def driver_variance(driver: Driver, params: MixedDriverParams, t: float) -> float:
    """Marginal variance of the driver at time t (the BS total-variance input)."""
    if t < 0.0:
        raise DomainError(f"time must be >= 0, got {t!r}")
    out = params.beta ** 2 * t
    if params.gamma != 0.0 and driver != Driver.CLASSICAL:
        out += (params.gamma ** 2 * _subfractional_weight(driver, params.hurst)
                * t ** (2.0 * params.hurst))
    return out


def _check_cev(model: ModelSpec) -> None:
    if model.family != Family.CEV:
        raise DomainError("operation defined for the CEV family only")


def effective_variance(model: ModelSpec, env: MarketEnv, maturity: float) -> float:
    """Effective variance Phi(T) of the CEV transition density.

    Closed form.  With z = (2-alpha) r T and the Kummer function M,

        Phi(T) = sigma^2 (2-alpha)^2 * [ beta^2/2 * T * M(1, 2, z)
                 + gamma^2/2 * w_H * T^(2H) * M(1, 1+2H, z) ]

    where w_H = 2 - 2^(2H-1) for the sub-fractional driver and 1 for the
    fractional one.  This is the Whittaker-function form of the integral
    with the z^(-H) prefactor absorbed analytically, so it is regular at
    r = 0 (where both M terms equal 1) and needs no series switch.
    """
    _check_cev(model)
    if maturity <= 0.0:
        raise DomainError(f"maturity must be positive, got {maturity!r}")
    p = model.driver_params
    a = model.alpha
    z = (2.0 - a) * env.rate * maturity
    total = 0.5 * p.beta ** 2 * maturity * specfun.kummer_m(1.0, 2.0, z)
    if p.gamma != 0.0 and model.driver != Driver.CLASSICAL:
        h = p.hurst
        total += (0.5 * p.gamma ** 2 * _subfractional_weight(model.driver, h)
                  * maturity ** (2.0 * h)
                  * specfun.kummer_m(1.0, 1.0 + 2.0 * h, z))
    return model.sigma ** 2 * (2.0 - a) ** 2 * total


def effective_variance_quadrature(model: ModelSpec, env: MarketEnv,
                                  maturity: float) -> float:
    """Phi(T) by adaptive quadrature of its defining integral (oracle path)."""
    _check_cev(model)
    if maturity <= 0.0:
        raise DomainError(f"maturity must be positive, got {maturity!r}")
    p = model.driver_params
    a = model.alpha
    c = (2.0 - a) * env.rate

    def integrand(u: float) -> float:
        kern = 0.5 * p.beta ** 2
        if p.gamma != 0.0 and model.driver != Driver.CLASSICAL:
            kern += p.gamma ** 2 * diffusion_kernel(model.driver, p.hurst,
                                                    maturity - u)
        return kern * math.exp(c * u)

    value, _ = integrate.quad(integrand, 0.0, maturity,
                              epsabs=0.0, epsrel=1e-12, limit=500)
    return model.sigma ** 2 * (2.0 - a) ** 2 * value


def cev_intermediates(model: ModelSpec, env: MarketEnv, maturity: float,
                      strike: float) -> PricingIntermediates:
    """Chi-squared coordinates k_s, y_s, z_s for one evaluation."""
    if strike <= 0.0:
        raise DomainError(f"strike must be positive, got {strike!r}")
    phi = effective_variance(model, env, maturity)
    a = model.alpha
    k_s = 1.0 / phi
    y_s = k_s * env.spot ** (2.0 - a) * math.exp(env.rate * (2.0 - a) * maturity)
    z_s = k_s * strike ** (2.0 - a)
    return PricingIntermediates(phi=phi, k_s=k_s, y_s=y_s, z_s=z_s)


def transition_density(model: ModelSpec, env: MarketEnv, maturity: float,
                       terminal_price):
    """Transition density of S_T at ``terminal_price`` (scalar or array).

    With w = k_s S_T^(2-alpha), nu = 1/(2-alpha):

        P(S_T) = (2-alpha) k_s^nu (y_s w^(1-2 alpha))^(nu/2)
                 * exp(-y_s - w) * I_nu(2 sqrt(y_s w))

    evaluated through the scaled Bessel function so the product stays
    finite even where exp(-y-w) underflows and I_nu overflows.
    """
    _check_cev(model)
    if maturity <= 0.0:
        raise DomainError(f"maturity must be positive, got {maturity!r}")
    s_t = np.asarray(terminal_price, dtype=np.float64)
    if np.any(s_t <= 0.0):
        raise DomainError("terminal price must be positive")
    ints = cev_intermediates(model, env, maturity, strike=1.0)
    a = model.alpha
    nu = 1.0 / (2.0 - a)
    k_s, y_s = ints.k_s, ints.y_s
    w = k_s * s_t ** (2.0 - a)
    sqrt_y = math.sqrt(y_s)
    sqrt_w = np.sqrt(w)
    arg = 2.0 * sqrt_y * sqrt_w
    ive = np.array([specfun.bessel_i_scaled(nu, float(v)) for v in np.atleast_1d(arg)])
    ive = ive.reshape(np.shape(arg)) if np.ndim(arg) else float(ive[0])
    log_pref = (math.log(2.0 - a) + nu * math.log(k_s)
                + 0.5 * nu * (math.log(y_s) + (1.0 - 2.0 * a) * np.log(w)))
    # exp(-y - w) I_nu(2 sqrt(y w)) = ive * exp(-(sqrt y - sqrt w)^2)
    out = np.exp(log_pref - (sqrt_y - sqrt_w) ** 2) * ive
    return float(out) if np.ndim(terminal_price) == 0 else out


def black_scholes_call(spot: float, strike: float, rate: float,
                       maturity: float, total_variance: float) -> float:
    """Black-Scholes call from total variance v = sigma^2 * driver variance."""
    if total_variance <= 0.0:
        return max(spot - strike * math.exp(-rate * maturity), 0.0)
    sv = math.sqrt(total_variance)
    d1 = (math.log(spot / strike) + rate * maturity) / sv + 0.5 * sv
    d2 = d1 - sv
    ncdf = lambda v: 0.5 * math.erfc(-v / math.sqrt(2.0))
    return spot * ncdf(d1) - strike * math.exp(-rate * maturity) * ncdf(d2)


def _assemble_call(spot: float, discounted_strike, sf1, cdf1, sf2, cdf2):
    """Stable assembly of S0 Q1 - E' (1 - Q2) by moneyness.

    Both expressions are algebraically the same price.  In the money the
    complementary form keeps the tiny tail corrections on top of intrinsic
    value at full relative accuracy; out of the money the direct form adds
    two small positive tails.
    """
    itm_form = (spot - discounted_strike) + discounted_strike * sf2 - spot * cdf1
    otm_form = spot * sf1 - discounted_strike * cdf2
    price = np.where(spot >= discounted_strike, itm_form, otm_form)
    lower = np.maximum(spot - discounted_strike, 0.0)
    return np.minimum(np.maximum(price, lower), spot)


def call_prices(model: ModelSpec, env: MarketEnv, maturity: float,
                strikes) -> np.ndarray:
    """European call prices for an array of strikes at one maturity."""
    if maturity <= 0.0:
        raise DomainError(f"maturity must be positive, got {maturity!r}")
    ks = np.atleast_1d(np.asarray(strikes, dtype=np.float64))
    if np.any(ks <= 0.0):
        raise DomainError("strikes must be positive")
    disc = math.exp(-env.rate * maturity)
    if model.family == Family.BS:
        v = model.sigma ** 2 * driver_variance(model.driver,
                                               model.driver_params, maturity)
        out = np.array([black_scholes_call(env.spot, float(e), env.rate,
                                           maturity, v) for e in ks])
        return out
    a = model.alpha
    ints = cev_intermediates(model, env, maturity, strike=float(ks[0]))
    k_s, y_s = ints.k_s, ints.y_s
    z = k_s * ks ** (2.0 - a)
    df0 = 2.0 / (2.0 - a)
    df1 = 2.0 + df0
    # Q1 side: argument varies with strike, non-centrality shared
    sf1, cdf1 = specfun.chi2_noncentral_sf_cdf(2.0 * z, df1, 2.0 * y_s,
                                               tol=_CHI2_TOL)
    # Q2 side: argument shared, non-centrality varies with strike
    sf2, cdf2 = specfun.chi2_noncentral_sf_cdf(2.0 * y_s, df0, 2.0 * z,
                                               tol=_CHI2_TOL)
    return _assemble_call(env.spot, disc * ks, sf1, cdf1, sf2, cdf2)


def call_price(model: ModelSpec, env: MarketEnv, maturity: float,
               strike: float) -> float:
    """European call price; dispatches on the model family."""
    return float(call_prices(model, env, maturity, [strike])[0])


def price_curve(model_template: ModelSpec, env: MarketEnv, maturity: float,
                strike: float, alpha_grid, hurst_set) -> list:
    """Price table over (alpha, hurst) for both mixed drivers.

    Rows are ordered alpha-major, then hurst, then driver name
    (``mfcev`` before ``msfcev``).  Returns tuples
    ``(alpha, hurst, driver_name, price)``.
    """
    alphas = [float(a) for a in alpha_grid]
    hursts = [float(h) for h in hurst_set]
    if not alphas or not hursts:
        raise DomainError("alpha and hurst grids must be non-empty")
    rows = []
    for a in alphas:
        for h in hursts:
            for name, driver in (("mfcev", Driver.MIXED_FRACTIONAL),
                                 ("msfcev", Driver.MIXED_SUB_FRACTIONAL)):
                model = ModelSpec(family=Family.CEV, driver=driver,
                                  sigma=model_template.sigma, alpha=a,
                                  driver_params=replace(
                                      model_template.driver_params, hurst=h))
                rows.append((a, h, name, call_price(model, env, maturity, strike)))
    return rows


def write_price_curve_csv(rows, target) -> None:
    """Emit the curve table as ``alpha,hurst,driver,price`` CSV."""
    if isinstance(target, (str, bytes, os.PathLike)):
        with open(target, "w", encoding="utf-8") as fh:
            write_price_curve_csv(rows, fh)
        return
    target.write("alpha,hurst,driver,price\n")
    for a, h, name, price in rows:
        target.write(f"{a:.12g},{h:.12g},{name},{price:.12g}\n")


def price_curve_csv_string(rows) -> str:
    buf = io.StringIO()
    write_price_curve_csv(rows, buf)
    return buf.getvalue()
