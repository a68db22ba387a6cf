"""Independent oracles for the closed-form engine.

Three routes that do not share code with the analytic pricing path:

* a Crank-Nicolson solver for the forward (Fokker-Planck) equation of the
  transformed variable x = S^(2-alpha), checked against the closed-form
  transition density;
* Monte Carlo pricers (exact terminal sampling for the BS family, an
  Euler scheme for the classical CEV) checked against the closed forms;
* adaptive quadrature of the discounted payoff against the transition
  density, checked against the chi-squared price formula.

Pathwise Euler stepping is deliberately not offered for the mixed
(sub-)fractional CEV: the calculus behind those dynamics is not the one a
naive Euler scheme discretizes, so the PDE route is the valid dynamic
oracle there.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.linalg import solve_banded

from .errors import DomainError, NumericalError
from .pricing import (Driver, Family, MarketEnv, ModelSpec, cev_intermediates,
                      diffusion_kernel, driver_variance, transition_density)
from .process import block_rng

__all__ = [
    "FpeGrid",
    "FpeSolution",
    "McConfig",
    "McResult",
    "solve_fpe",
    "mc_price_msfbs",
    "mc_price_cev_classical",
    "quadrature_price",
    "write_density_csv",
]

_MC_BLOCK = 65536


@dataclass(frozen=True)
class FpeGrid:
    """Uniform grid in the transformed variable x = S^(2-alpha)."""

    x_min: float
    x_max: float
    n_space: int
    n_time: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.x_min < self.x_max:
            raise DomainError("need 0 <= x_min < x_max")
        if self.n_space < 50 or self.n_time < 50:
            raise DomainError("n_space and n_time must be >= 50")


@dataclass(frozen=True)
class FpeSolution:
    """Discretized terminal density, in x and mapped back to S."""

    x: np.ndarray
    density_x: np.ndarray
    s: np.ndarray
    density_s: np.ndarray
    mass: float
    absorbed: float
    conservation_drift: float


@dataclass(frozen=True)
class McConfig:
    n_paths: int
    n_steps: int = 10
    seed: int = 0
    antithetic: bool = False

    def __post_init__(self) -> None:
        if self.n_paths < 1000:
            raise DomainError("n_paths must be >= 1000")
        if self.n_steps < 10:
            raise DomainError("n_steps must be >= 10")


@dataclass(frozen=True)
class McResult:
    price: float
    se: float
    n_paths: int
    seed: int

    def to_json(self) -> str:
        return json.dumps({"price": self.price, "se": self.se,
                           "n_paths": self.n_paths, "seed": self.seed})


def solve_fpe(model: ModelSpec, env: MarketEnv, maturity: float,
              grid: FpeGrid, initial_spot: float | None = None) -> FpeSolution:
    """Crank-Nicolson solution of the forward equation in x = S^(2-alpha).

        dP/dt = d^2/dx^2 [ D(t) x P ] - d/dx [ ((2-a) r x + c(t)) P ]

    with D(t) = (beta^2/2 + gamma^2 lambda(t)) (2-a)^2 sigma^2 and
    c(t) = D(t) (1-a)/(2-a).  Absorbing boundary at the left edge, zero
    density at the right edge; the initial delta is mollified to a
    Gaussian of width two grid cells.  Absorbed mass is tracked from the
    boundary flux so that mass + absorbed stays at 1.
    """
    if model.family != Family.CEV:
        raise DomainError("the forward-equation oracle covers the CEV family only")
    if maturity <= 0.0:
        raise DomainError("maturity must be positive")
    spot = env.spot if initial_spot is None else float(initial_spot)
    a = model.alpha
    p = model.driver_params
    x0 = spot ** (2.0 - a)
    n = grid.n_space
    h = (grid.x_max - grid.x_min) / n
    x = grid.x_min + h * np.arange(n + 1)
    if not (grid.x_min + 10 * h < x0 < grid.x_max - 10 * h):
        raise DomainError(
            f"grid does not cover x0 = {x0:.6g} with margin; "
            f"x range is [{grid.x_min}, {grid.x_max}]")

    def dcoef(t: float) -> float:
        kern = 0.5 * p.beta ** 2
        if p.gamma != 0.0 and model.driver != Driver.CLASSICAL:
            kern += p.gamma ** 2 * diffusion_kernel(model.driver, p.hurst, t)
        return kern * (2.0 - a) ** 2 * model.sigma ** 2

    r2a = (2.0 - a) * env.rate

    def bands(t: float):
        """Tridiagonal of the spatial operator L(t) on interior nodes."""
        d = dcoef(t)
        c = d * (1.0 - a) / (2.0 - a)
        v = r2a * x + c
        diag = -2.0 * d * x[1:-1] / h ** 2
        lower = d * x[1:-2] / h ** 2 + v[1:-2] / (2.0 * h)   # couples to i-1
        upper = d * x[2:-1] / h ** 2 - v[2:-1] / (2.0 * h)   # couples to i+1
        return lower, diag, upper

    # mollified delta, normalized to discrete mass 1
    width = 2.0 * h
    dens = np.exp(-0.5 * ((x - x0) / width) ** 2)
    dens[0] = dens[-1] = 0.0
    dens /= np.trapezoid(dens, dx=h)

    def boundary_outflow(dens_now: np.ndarray, t: float) -> float:
        d = dcoef(t)
        c = d * (1.0 - a) / (2.0 - a)
        left = d * x[1] * dens_now[1] / h - 0.5 * (r2a * x[1] + c) * dens_now[1]
        right = d * x[-2] * dens_now[-2] / h + 0.5 * (r2a * x[-2] + c) * dens_now[-2]
        return left + right

    dt = maturity / grid.n_time
    absorbed = 0.0
    drift_max = 0.0
    ident = np.ones(n - 1)
    for step in range(grid.n_time):
        t_now = step * dt
        t_next = t_now + dt
        lo_n, di_n, up_n = bands(t_now)
        lo_p, di_p, up_p = bands(t_next)
        rhs = (dens[1:-1] * (1.0 + 0.5 * dt * di_n)
               + 0.5 * dt * (np.append(up_n, 0.0) * np.append(dens[2:-1], 0.0)
                             + np.append(0.0, lo_n) * np.append(0.0, dens[1:-2])))
        ab = np.zeros((3, n - 1))
        ab[0, 1:] = -0.5 * dt * up_p
        ab[1, :] = ident - 0.5 * dt * di_p
        ab[2, :-1] = -0.5 * dt * lo_p
        new_interior = solve_banded((1, 1), ab, rhs)
        out_rate = 0.5 * (boundary_outflow(dens, t_now)
                          + boundary_outflow(
                              np.concatenate(([0.0], new_interior, [0.0])), t_next))
        dens = np.concatenate(([0.0], new_interior, [0.0]))
        absorbed += out_rate * dt
        mass = float(np.trapezoid(dens, dx=h))
        drift = abs(mass + absorbed - 1.0)
        drift_max = max(drift_max, drift)
        if drift > 1e-3:
            raise NumericalError(
                f"mass conservation drifted to {drift:.3e} at step {step + 1}; "
                "refine the grid or widen the x range")
    s = np.zeros_like(x)
    np.power(x, 1.0 / (2.0 - a), out=s, where=x > 0.0)
    jac = np.zeros_like(s)
    np.power(s, 1.0 - a, out=jac, where=s > 0.0)
    density_s = dens * (2.0 - a) * jac
    return FpeSolution(x=x, density_x=dens, s=s, density_s=density_s,
                       mass=mass, absorbed=absorbed,
                       conservation_drift=drift_max)


def _mc_payoff_stats(payoffs_per_block, disc: float, n_units: int):
    total = 0.0
    total_sq = 0.0
    for block in payoffs_per_block:
        total += float(block.sum())
        total_sq += float((block ** 2).sum())
    mean = total / n_units
    var = max(total_sq / n_units - mean ** 2, 0.0)
    se = disc * math.sqrt(var / n_units)
    return disc * mean, se


def mc_price_msfbs(model: ModelSpec, env: MarketEnv, maturity: float,
                   strike: float, cfg: McConfig) -> McResult:
    """Exact-terminal-sampling price for the BS family.

    S_T = S0 exp(r T - v/2 + sigma M_T) with M_T drawn from the driver's
    exact normal law at T; unbiased, so the estimate is a clean oracle for
    the closed form.
    """
    if model.family != Family.BS:
        raise DomainError("mc_price_msfbs covers the BS family only")
    if maturity <= 0.0 or strike <= 0.0:
        raise DomainError("maturity and strike must be positive")
    v = model.sigma ** 2 * driver_variance(model.driver, model.driver_params,
                                           maturity)
    sd = math.sqrt(v)
    drift = env.rate * maturity - 0.5 * v
    disc = math.exp(-env.rate * maturity)
    n_units = cfg.n_paths // 2 if cfg.antithetic else cfg.n_paths
    if cfg.antithetic and cfg.n_paths % 2:
        raise DomainError("antithetic sampling needs an even n_paths")

    def blocks():
        done = 0
        b = 0
        while done < n_units:
            take = min(_MC_BLOCK, n_units - done)
            z = block_rng(cfg.seed, b).standard_normal(take)
            if cfg.antithetic:
                up = np.maximum(env.spot * np.exp(drift + sd * z) - strike, 0.0)
                dn = np.maximum(env.spot * np.exp(drift - sd * z) - strike, 0.0)
                yield 0.5 * (up + dn)
            else:
                yield np.maximum(env.spot * np.exp(drift + sd * z) - strike, 0.0)
            done += take
            b += 1

    price, se = _mc_payoff_stats(blocks(), disc, n_units)
    return McResult(price=price, se=se, n_paths=cfg.n_paths, seed=cfg.seed)


def mc_price_cev_classical(model: ModelSpec, env: MarketEnv, maturity: float,
                           strike: float, cfg: McConfig) -> McResult:
    """Euler-Maruyama price for the classical-driver CEV model.

    Paths hitting zero are frozen there (absorption).  Weak order one;
    n_steps below 200 * T triggers a bias warning.
    """
    if model.family != Family.CEV or model.driver != Driver.CLASSICAL:
        raise DomainError("the Euler oracle covers the classical-driver CEV only")
    if maturity <= 0.0 or strike <= 0.0:
        raise DomainError("maturity and strike must be positive")
    if cfg.n_steps < 200 * maturity:
        warnings.warn(
            f"n_steps = {cfg.n_steps} is below the 200 * T = {200 * maturity:.0f} "
            "guidance; the Euler estimate may carry visible bias",
            RuntimeWarning, stacklevel=2)
    sig = model.sigma * model.driver_params.beta
    half_alpha = 0.5 * model.alpha
    dt = maturity / cfg.n_steps
    sq_dt = math.sqrt(dt)
    disc = math.exp(-env.rate * maturity)
    n_units = cfg.n_paths // 2 if cfg.antithetic else cfg.n_paths
    if cfg.antithetic and cfg.n_paths % 2:
        raise DomainError("antithetic sampling needs an even n_paths")

    def evolve(z: np.ndarray) -> np.ndarray:
        s = np.full(z.shape[0], env.spot)
        alive = np.ones(z.shape[0], dtype=bool)
        for step in range(cfg.n_steps):
            s_a = s[alive]
            s_a = s_a + env.rate * s_a * dt + sig * s_a ** half_alpha * sq_dt * z[alive, step]
            dead = s_a <= 0.0
            s_a[dead] = 0.0
            s[alive] = s_a
            if np.any(dead):
                idx = np.flatnonzero(alive)
                alive[idx[dead]] = False
        return s

    def blocks():
        done = 0
        b = 0
        while done < n_units:
            take = min(16384, n_units - done)
            z = block_rng(cfg.seed, b).standard_normal((take, cfg.n_steps))
            if cfg.antithetic:
                up = np.maximum(evolve(z) - strike, 0.0)
                dn = np.maximum(evolve(-z) - strike, 0.0)
                yield 0.5 * (up + dn)
            else:
                yield np.maximum(evolve(z) - strike, 0.0)
            done += take
            b += 1

    price, se = _mc_payoff_stats(blocks(), disc, n_units)
    return McResult(price=price, se=se, n_paths=cfg.n_paths, seed=cfg.seed)


def quadrature_price(model: ModelSpec, env: MarketEnv, maturity: float,
                     strike: float) -> float:
    """Discounted payoff integrated against the transition density."""
    if model.family != Family.CEV:
        raise DomainError("quadrature_price covers the CEV family only")
    if maturity <= 0.0 or strike < 0.0:
        raise DomainError("need maturity > 0 and strike >= 0")
    ints = cev_intermediates(model, env, maturity, strike=max(strike, 1e-12))
    a = model.alpha
    nu = 1.0 / (2.0 - a)
    # upper cutoff from the chi-squared tail of w = k S^(2-alpha)
    two_w_hi = (2.0 * ints.y_s + 2.0 * nu + 2.0
                + 40.0 * math.sqrt(2.0 * (2.0 + 2.0 * nu + 4.0 * ints.y_s))
                + 200.0)
    s_hi = (0.5 * two_w_hi / ints.k_s) ** (1.0 / (2.0 - a))
    if s_hi <= strike:
        return 0.0

    def integrand(s_t: float) -> float:
        return (s_t - strike) * transition_density(model, env, maturity, s_t)

    mode = env.spot * math.exp(env.rate * maturity)
    pts = [p for p in (mode,) if strike < p < s_hi]
    value, err = integrate.quad(integrand, strike, s_hi, epsabs=1e-12,
                                epsrel=1e-9, limit=800,
                                points=pts or None)
    if not math.isfinite(value) or (value > 1e-8 and err > 1e-6 * value):
        raise NumericalError(
            f"payoff quadrature did not converge: value={value!r}, err={err!r}")
    return math.exp(-env.rate * maturity) * value


def write_density_csv(s_values, densities, target) -> None:
    """Emit ``S_T,density`` rows for external inspection."""
    if isinstance(target, (str, bytes, os.PathLike)):
        with open(target, "w", encoding="utf-8") as fh:
            write_density_csv(s_values, densities, fh)
        return
    target.write("S_T,density\n")
    for s_t, d in zip(s_values, densities):
        target.write(f"{s_t:.12g},{d:.12g}\n")
