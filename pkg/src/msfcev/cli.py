"""Command-line interface.

Subcommands: price, density, curve, simulate, verify, calibrate, compare.
stdout carries data only (numbers, CSV, JSON); diagnostics go to stderr.
Randomized commands require --seed and are reproducible bit for bit.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import calibrate as cal
from . import pricing, process, verify
from .errors import (CalibrationError, ChainFormatError, ConvergenceError,
                     DomainError, NumericalError)

_USAGE_ERRORS = (DomainError, ChainFormatError, ConvergenceError,
                 NumericalError, CalibrationError, OSError)


def _model_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", required=True, choices=sorted(pricing.MODEL_NAMES),
                        help="model short name")
    parser.add_argument("--sigma", type=float, required=True)
    parser.add_argument("--alpha", type=float, default=1.0,
                        help="CEV elasticity in [0, 2); ignored by the BS family")
    parser.add_argument("--hurst", type=float, default=0.7)
    parser.add_argument("--beta", type=float, default=None,
                        help="Brownian weight (default 1)")
    parser.add_argument("--gamma", type=float, default=None,
                        help="(sub-)fractional weight (default 1 for mixed "
                             "drivers, 0 for classical)")


def _market_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--rate", type=float, required=True)
    parser.add_argument("--spot", type=float, required=True)


def _build_model(args) -> pricing.ModelSpec:
    return pricing.ModelSpec.make(args.model, sigma=args.sigma, alpha=args.alpha,
                                  hurst=args.hurst, beta=args.beta,
                                  gamma=args.gamma)


def _out_stream(path):
    return open(path, "w", encoding="utf-8") if path else sys.stdout


def _float_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise DomainError(f"cannot parse float list {text!r}") from None


def _cmd_price(args) -> int:
    model = _build_model(args)
    env = pricing.MarketEnv(rate=args.rate, spot=args.spot)
    price = pricing.call_price(model, env, args.maturity, args.strike)
    if args.json:
        print(json.dumps({"price": price}))
    else:
        print(f"{price:.12g}")
    return 0


def _cmd_density(args) -> int:
    model = _build_model(args)
    env = pricing.MarketEnv(rate=args.rate, spot=args.spot)
    s_max = args.s_max if args.s_max is not None else 3.0 * args.spot * math.exp(
        args.rate * args.maturity)
    s_min = args.s_min if args.s_min is not None else 0.05 * args.spot
    if not 0.0 < s_min < s_max:
        raise DomainError("need 0 < s-min < s-max")
    grid = np.linspace(s_min, s_max, args.points)
    dens = pricing.transition_density(model, env, args.maturity, grid)
    out = _out_stream(args.out)
    try:
        verify.write_density_csv(grid, dens, out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_curve(args) -> int:
    model = _build_model(args)
    env = pricing.MarketEnv(rate=args.rate, spot=args.spot)
    rows = pricing.price_curve(model, env, args.maturity, args.strike,
                               _float_list(args.alphas), _float_list(args.hursts))
    out = _out_stream(args.out)
    try:
        pricing.write_price_curve_csv(rows, out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_simulate(args) -> int:
    params = process.MixedDriverParams(hurst=args.hurst, beta=args.beta,
                                       gamma=args.gamma)
    grid = process.TimeGrid(_float_list(args.times))
    batch = process.sample_msfbm(grid, params, args.n_paths, args.seed)
    out = _out_stream(args.out)
    try:
        batch.to_csv(out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_verify(args) -> int:
    model = _build_model(args)
    env = pricing.MarketEnv(rate=args.rate, spot=args.spot)
    rows = []

    def add(name, value, tol, ok):
        rows.append((name, value, tol, ok))

    if model.family == pricing.Family.CEV:
        phi_c = pricing.effective_variance(model, env, args.maturity)
        phi_q = pricing.effective_variance_quadrature(model, env, args.maturity)
        rel = abs(phi_c - phi_q) / phi_q
        add("phi_closed_vs_quadrature_rel", rel, 1e-9, rel <= 1e-9)

        price = pricing.call_price(model, env, args.maturity, args.strike)
        quad = verify.quadrature_price(model, env, args.maturity, args.strike)
        rel = abs(price - quad) / max(quad, 1e-300)
        add("price_closed_vs_quadrature_rel", rel, 1e-6, rel <= 1e-6)

        mass = verify.quadrature_price(model, env, args.maturity, 0.0)
        lhs = mass / (env.spot)
        add("discounted_mean_over_spot", lhs, 1.001, 0.0 <= lhs <= 1.0 + 1e-6)

        if model.driver == pricing.Driver.CLASSICAL and args.with_mc:
            cfg = verify.McConfig(n_paths=args.mc_paths,
                                  n_steps=max(10, int(200 * args.maturity)),
                                  seed=args.seed)
            mc = verify.mc_price_cev_classical(model, env, args.maturity,
                                               args.strike, cfg)
            zsc = abs(mc.price - price) / mc.se if mc.se > 0 else 0.0
            add("euler_mc_z_score", zsc, 3.0, zsc <= 3.0)
        if args.with_fpe:
            ints = pricing.cev_intermediates(model, env, args.maturity,
                                             args.strike)
            x0 = env.spot ** (2.0 - model.alpha)
            x_hi = (ints.y_s + 12.0 * math.sqrt(ints.y_s) + 60.0) / ints.k_s
            grid = verify.FpeGrid(x_min=0.0, x_max=max(x_hi, 1.5 * x0),
                                  n_space=2400, n_time=600)
            sol = verify.solve_fpe(model, env, args.maturity, grid)
            keep = sol.s > 0
            closed = pricing.transition_density(model, env, args.maturity,
                                                sol.s[keep])
            l1 = float(np.trapezoid(np.abs(sol.density_s[keep] - closed),
                                    sol.s[keep]))
            add("fpe_l1_distance", l1, 1e-2, l1 <= 1e-2)
    else:
        price = pricing.call_price(model, env, args.maturity, args.strike)
        cfg = verify.McConfig(n_paths=args.mc_paths, seed=args.seed)
        mc = verify.mc_price_msfbs(model, env, args.maturity, args.strike, cfg)
        zsc = abs(mc.price - price) / mc.se if mc.se > 0 else 0.0
        add("exact_mc_z_score", zsc, 3.0, zsc <= 3.0)

    lower = max(env.spot - args.strike * math.exp(-args.rate * args.maturity), 0.0)
    price = pricing.call_price(model, env, args.maturity, args.strike)
    in_bounds = lower - 1e-9 <= price <= env.spot + 1e-9
    add("price_within_rational_bounds", price, env.spot, in_bounds)

    width = max(len(r[0]) for r in rows)
    print(f"{'check'.ljust(width)}  {'value':>14}  {'tolerance':>12}  status")
    all_ok = True
    for name, value, tol, ok in rows:
        all_ok &= ok
        print(f"{name.ljust(width)}  {value:14.6e}  {tol:12.3e}  "
              f"{'PASS' if ok else 'FAIL'}")
    return 0 if all_ok else 2


def _cmd_calibrate(args) -> int:
    chain = cal.load_chain(args.input, moneyness_filter=args.filter_moneyness)
    cfg = cal.OptimizerConfig(n_starts=args.starts, seed=args.seed,
                              maxiter=args.maxiter)
    report = cal.fit(chain, args.model, args.mode, cfg)
    out = _out_stream(args.out)
    try:
        out.write(report.to_json() + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0 if report.converged else 2


def _cmd_compare(args) -> int:
    chain = cal.load_chain(args.input, moneyness_filter=args.filter_moneyness)
    catalog = [m.strip() for m in args.models.split(",") if m.strip()]
    cfg = cal.OptimizerConfig(n_starts=args.starts, seed=args.seed,
                              maxiter=args.maxiter)
    rows = cal.compare_models(chain, catalog, args.mode, cfg)
    out = _out_stream(args.out)
    try:
        out.write(cal.comparison_to_json(rows) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 2 if any(r.failed for r in rows) else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msfcev",
        description="Pricing, simulation, verification and calibration for "
                    "CEV models with mixed (sub-)fractional drivers.")
    parser.add_argument("--threads", type=int, default=1,
                        help="cap on worker parallelism (current build runs "
                             "single-threaded; values >= 1 accepted)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", help="price one European call")
    _model_args(p)
    _market_args(p)
    p.add_argument("--strike", type=float, required=True)
    p.add_argument("--maturity", type=float, required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_price)

    p = sub.add_parser("density", help="terminal-density CSV (S_T,density)")
    _model_args(p)
    _market_args(p)
    p.add_argument("--maturity", type=float, required=True)
    p.add_argument("--s-min", type=float, default=None)
    p.add_argument("--s-max", type=float, default=None)
    p.add_argument("--points", type=int, default=400)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_density)

    p = sub.add_parser("curve", help="price table over (alpha, hurst) for "
                                     "both mixed drivers")
    _model_args(p)
    _market_args(p)
    p.add_argument("--strike", type=float, required=True)
    p.add_argument("--maturity", type=float, required=True)
    p.add_argument("--alphas", required=True, help="comma-separated alphas")
    p.add_argument("--hursts", required=True, help="comma-separated Hurst values")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_curve)

    p = sub.add_parser("simulate", help="exact driver paths as CSV")
    p.add_argument("--times", required=True,
                   help="comma-separated times starting at 0")
    p.add_argument("--hurst", type=float, required=True)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--n-paths", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("verify", help="run the oracle suite at one parameter "
                                      "point and print a pass/fail table")
    _model_args(p)
    _market_args(p)
    p.add_argument("--strike", type=float, required=True)
    p.add_argument("--maturity", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--with-mc", action="store_true",
                   help="include the Euler Monte Carlo check (classical CEV)")
    p.add_argument("--with-fpe", action="store_true",
                   help="include the forward-equation check (slower)")
    p.add_argument("--mc-paths", type=int, default=200_000)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("calibrate", help="fit one model to a chain CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True, choices=sorted(pricing.MODEL_NAMES))
    p.add_argument("--mode", choices=["joint", "per_maturity"], default="joint")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--starts", type=int, default=8)
    p.add_argument("--maxiter", type=int, default=400)
    p.add_argument("--filter-moneyness", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("compare", help="fit several models and tabulate MSEs")
    p.add_argument("--input", required=True)
    p.add_argument("--models", required=True,
                   help="comma-separated model short names")
    p.add_argument("--mode", choices=["joint", "per_maturity"], default="joint")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--starts", type=int, default=8)
    p.add_argument("--maxiter", type=int, default=400)
    p.add_argument("--filter-moneyness", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
