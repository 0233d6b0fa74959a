"""Command-line front end tying the pricing engine together.

Exit codes: 0 success, 1 computational or validation failure, 2 usage
error. All randomness flows through --seed (fixed default, never the
clock), so repeated runs with identical inputs produce identical bytes.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from . import diagnostics, gbm_lattice, market_sim, montecarlo, sv_lattice
from .contracts import GbmParams, OptionContract, StrikeBasis, SvParams

DEFAULT_SEED = 42
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

GBM_METHODS = ("crr", "tian-bin", "haahtela", "boyle-trin", "kr-trin", "tian-trin")
ALL_METHODS = ("closed",) + GBM_METHODS + ("sv-lattice", "mc-euler", "mc-milstein")


class UsageError(Exception):
    pass


def _fmt(value: float) -> float:
    """Round-trip a float through 12 significant digits for stable output."""
    return float(f"{value:.12g}")


def _json_dump(payload: dict, path: Path | None) -> None:
    text = json.dumps(payload, indent=2)
    if path is not None:
        path.write_text(text + "\n")
    print(text)


def _add_contract_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--spot", type=float, required=True, help="current CPM of the underlying")
    p.add_argument("--strike", type=float, required=True, help="strike price")
    p.add_argument(
        "--strike-basis",
        choices=["per-click", "per-mille"],
        default="per-click",
        help="quote basis of the strike",
    )
    p.add_argument("--ctr", type=float, default=0.03, help="click-through rate")
    p.add_argument("--expiry", type=float, required=True, help="time to expiry in years")
    p.add_argument("--rate", type=float, default=0.05, help="continuous risk-free rate")
    p.add_argument("--steps", type=int, default=500, help="lattice steps")


def _add_sv_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sigma0", type=float, help="initial volatility")
    p.add_argument("--kappa", type=float, help="mean-reversion speed")
    p.add_argument("--theta", type=float, help="long-run volatility")
    p.add_argument("--delta", type=float, help="volatility of volatility")


def _contract(args: argparse.Namespace) -> OptionContract:
    return OptionContract(
        strike=args.strike,
        expiry_T=args.expiry,
        rate_r=args.rate,
        steps_n=args.steps,
        ctr=args.ctr,
        strike_basis=StrikeBasis(args.strike_basis),
    )


def _sv_params(args: argparse.Namespace) -> SvParams:
    missing = [
        name for name in ("sigma0", "kappa", "theta", "delta") if getattr(args, name) is None
    ]
    if missing:
        raise UsageError(f"missing required SV parameters: {', '.join('--' + m for m in missing)}")
    return SvParams(
        spot_M0=args.spot,
        sigma0=args.sigma0,
        kappa=args.kappa,
        theta=args.theta,
        delta=args.delta,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="firstlook",
        description="Price first-look ad options and analyse ad markets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    price = sub.add_parser("price", help="price one contract with one method")
    price.add_argument("--method", choices=ALL_METHODS, required=True)
    _add_contract_args(price)
    price.add_argument("--sigma", type=float, help="constant annual volatility")
    _add_sv_args(price)
    price.add_argument(
        "--stretch", type=float, default=gbm_lattice.DEFAULT_STRETCH,
        help="grid stretch for the Boyle and Kamrad-Ritchken grids",
    )
    price.add_argument("--paths", type=int, default=100_000, help="Monte Carlo paths")
    price.add_argument("--seed", type=int, default=DEFAULT_SEED)
    price.add_argument("--output", type=Path, help="also write the JSON report here")

    conv = sub.add_parser("converge", help="lattice convergence study against the closed form")
    _add_contract_args(conv)
    conv.add_argument("--sigma", type=float, required=True)
    conv.add_argument(
        "--methods",
        default=",".join(GBM_METHODS),
        help="comma-separated lattice methods",
    )
    conv.add_argument("--n-values", required=True, help="comma-separated ascending step counts")
    conv.add_argument(
        "--stretch", type=float, default=gbm_lattice.DEFAULT_STRETCH,
        help="grid stretch for the Boyle and Kamrad-Ritchken grids",
    )
    conv.add_argument("--output", type=Path, required=True, help="CSV destination")

    diag = sub.add_parser("diagnose", help="test a price series for the constant-vol assumption")
    diag.add_argument("--input", type=Path, required=True, help="date,price CSV")
    diag.add_argument("--alpha", type=float, default=0.05)
    diag.add_argument("--lags", type=int, help="Ljung-Box lag count")
    diag.add_argument("--window", type=int, default=7, help="realized-volatility window")
    diag.add_argument("--output-dir", type=Path, required=True)

    val = sub.add_parser("validate", help="check the SV lattice against Monte Carlo intervals")
    _add_contract_args(val)
    _add_sv_args(val)
    val.add_argument("--param", choices=["sigma0", "kappa", "theta", "delta"], required=True)
    val.add_argument("--lo", type=float, required=True)
    val.add_argument("--hi", type=float, required=True)
    val.add_argument("--points", type=int, required=True)
    val.add_argument("--scheme", choices=["euler", "milstein"], default="euler")
    val.add_argument("--paths", type=int, default=100_000)
    val.add_argument("--mc-steps", type=int, default=200)
    val.add_argument("--seed", type=int, default=DEFAULT_SEED)
    val.add_argument("--output", type=Path, required=True, help="CSV destination")

    sim = sub.add_parser("simulate", help="replay delivery and revenue under option selling")
    sim.add_argument("--config", type=Path, help="JSON scenario config; flags override it")
    sim.add_argument("--market", type=Path, help="date,price CSV of daily average prices")
    sim.add_argument("--scenario", choices=["bull", "bear"], help="synthetic market flavour")
    sim.add_argument("--days", type=int, help="synthetic market length")
    sim.add_argument("--spot-cpm", type=float, help="synthetic market starting CPM")
    sim.add_argument("--sigma", type=float, help="volatility for pricing and synthesis")
    sim.add_argument("--drift", type=float, help="annual drift of the synthetic market")
    sim.add_argument("--supply", type=int, help="base daily impressions")
    sim.add_argument("--budget", type=float, help="advertiser daily budget")
    sim.add_argument("--strike-cpc", type=float, help="per-click strike")
    sim.add_argument("--ctr", type=float, help="click-through rate")
    sim.add_argument("--sell-ratio", type=float, help="fraction of supply pre-sold")
    sim.add_argument("--option-price", type=float, help="override the computed premium")
    sim.add_argument("--rate", type=float, help="risk-free rate for premium pricing")
    sim.add_argument("--seed", type=int, help="synthetic market seed")
    sim.add_argument("--output-dir", type=Path, required=True)

    return parser


def _echo_inputs(args: argparse.Namespace, names: list[str]) -> dict:
    out = {}
    for name in names:
        value = getattr(args, name.replace("-", "_"))
        if isinstance(value, float):
            value = _fmt(value)
        out[name] = value
    return out


def cmd_price(args: argparse.Namespace) -> int:
    contract = _contract(args)
    method = args.method
    report: dict = {
        "method": method,
        "inputs": _echo_inputs(
            args, ["spot", "strike", "strike-basis", "ctr", "expiry", "rate", "steps"]
        ),
    }

    if method == "closed" or method in GBM_METHODS:
        if args.sigma is None:
            raise UsageError("--sigma is required for constant-volatility methods")
        params = GbmParams(spot_M0=args.spot, sigma=args.sigma)
        report["inputs"]["sigma"] = _fmt(args.sigma)
        if method == "closed":
            price = gbm_lattice.closed_form_price(params, contract)
        else:
            lm = gbm_lattice.LatticeMethod(gbm_lattice.MethodKind(method), args.stretch)
            price = gbm_lattice.lattice_price(params, contract, lm)
        report["price"] = _fmt(price)
    elif method == "sv-lattice":
        sv = _sv_params(args)
        report["inputs"].update(
            sigma0=_fmt(sv.sigma0), kappa=_fmt(sv.kappa), theta=_fmt(sv.theta), delta=_fmt(sv.delta)
        )
        lattice = sv_lattice.build_censored_lattice(sv, contract)
        report["price"] = _fmt(sv_lattice.price_sv_option(lattice).price)
    else:
        sv = _sv_params(args)
        report["inputs"].update(
            sigma0=_fmt(sv.sigma0), kappa=_fmt(sv.kappa), theta=_fmt(sv.theta), delta=_fmt(sv.delta)
        )
        scheme = montecarlo.Scheme.EULER if method == "mc-euler" else montecarlo.Scheme.MILSTEIN
        cfg = montecarlo.McConfig(
            scheme=scheme, n_paths=args.paths, steps=contract.steps_n, seed=args.seed
        )
        result = montecarlo.mc_price(sv, contract, cfg)
        report["price"] = _fmt(result.price)
        report["std_error"] = _fmt(result.std_error)
        report["ci_low"] = _fmt(result.ci_low)
        report["ci_high"] = _fmt(result.ci_high)
        report["paths"] = result.n_paths
        report["seed"] = args.seed

    _json_dump(report, args.output)
    return EXIT_OK


def cmd_converge(args: argparse.Namespace) -> int:
    names = [m for m in args.methods.split(",") if m.strip()]
    if not names:
        raise UsageError("--methods must name at least one lattice method")
    try:
        methods = [
            gbm_lattice.LatticeMethod(gbm_lattice.MethodKind(name.strip()), args.stretch)
            for name in names
        ]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        n_values = [int(v) for v in args.n_values.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --n-values: {exc}") from None
    if not n_values:
        raise UsageError("--n-values must contain at least one step count")
    contract = _contract(args)
    params = GbmParams(spot_M0=args.spot, sigma=args.sigma)
    rows = gbm_lattice.convergence_report(params, contract, methods, n_values)
    with open(args.output, "w", newline="") as fh:
        gbm_lattice.report_to_csv(rows, fh)
    return EXIT_OK


def cmd_diagnose(args: argparse.Namespace) -> int:
    if not args.input.exists():
        raise UsageError(f"input file not found: {args.input}")
    series = diagnostics.PriceSeries.from_csv(args.input)
    verdict = diagnostics.gbm_test(series, alpha=args.alpha, lags=args.lags)
    out = args.output_dir
    out.mkdir(parents=True, exist_ok=True)

    payload: dict = {
        "observations": len(series),
        "alpha": _fmt(args.alpha),
        "shapiro_w": _fmt(verdict.shapiro_w),
        "shapiro_p": _fmt(verdict.shapiro_p),
        "ljung_q": _fmt(verdict.ljung_q),
        "ljung_p": _fmt(verdict.ljung_p),
        "is_gbm": verdict.is_gbm,
    }
    gbm = diagnostics.estimate_gbm(series) if len(series) >= 10 else None
    payload["gbm_estimate"] = (
        None if gbm is None else {"sigma": _fmt(gbm.sigma), "mu": _fmt(gbm.mu)}
    )
    try:
        sv = diagnostics.estimate_sv(series, window=args.window)
        payload["sv_estimate"] = {
            "sigma0": _fmt(sv.sigma0),
            "kappa": _fmt(sv.kappa),
            "theta": _fmt(sv.theta),
            "delta": _fmt(sv.delta),
        }
    except ValueError:
        payload["sv_estimate"] = None

    (out / "verdict.json").write_text(json.dumps(payload, indent=2) + "\n")

    ratios = diagnostics.log_ratios(series)
    with open(out / "acf.csv", "w", newline="") as fh:
        fh.write("lag,value,band\n")
        for lag, value, band in verdict.acf.rows():
            fh.write(f"{lag},{value:.12g},{band:.12g}\n")

    ordered = np.sort(ratios)
    std = ordered.std(ddof=1)
    standardized = (ordered - ordered.mean()) / (std if std > 0 else 1.0)
    grid = (np.arange(1, ordered.size + 1) - 0.5) / ordered.size
    with open(out / "qq.csv", "w", newline="") as fh:
        fh.write("theoretical,sample\n")
        for t, s in zip(ndtri(grid), standardized):
            fh.write(f"{t:.12g},{s:.12g}\n")

    counts, edges = np.histogram(ratios, bins=10)
    with open(out / "hist.csv", "w", newline="") as fh:
        fh.write("bin_left,bin_right,count\n")
        for i, c in enumerate(counts):
            fh.write(f"{edges[i]:.12g},{edges[i + 1]:.12g},{int(c)}\n")

    print(json.dumps(payload, indent=2))
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    if args.points < 1:
        raise UsageError(f"--points must be >= 1, got {args.points}")
    contract = _contract(args)
    sv = _sv_params(args)
    cfg = montecarlo.McConfig(
        scheme=montecarlo.Scheme(args.scheme),
        n_paths=args.paths,
        steps=args.mc_steps,
        seed=args.seed,
    )
    values = np.linspace(args.lo, args.hi, args.points)
    rows = montecarlo.containment_sweep(sv, contract, cfg, args.param, list(values))
    with open(args.output, "w", newline="") as fh:
        montecarlo.sweep_to_csv(rows, fh)
    contained = all(r.verdict is montecarlo.Containment.CONTAINED for r in rows)
    for row in rows:
        print(f"{row.param}={row.value:.6g}: lattice={row.lattice_price:.6g} {row.verdict.value}")
    return EXIT_OK if contained else EXIT_FAILURE


def _sim_setting(args: argparse.Namespace, config: dict, key: str, default=None):
    flag = getattr(args, key.replace("-", "_"))
    if flag is not None:
        return flag
    if key in config:
        return config[key]
    return default


def cmd_simulate(args: argparse.Namespace) -> int:
    config: dict = {}
    if args.config is not None:
        if not args.config.exists():
            raise UsageError(f"config file not found: {args.config}")
        config = json.loads(args.config.read_text())

    ctr = float(_sim_setting(args, config, "ctr", 0.03))
    budget = _sim_setting(args, config, "budget")
    strike_cpc = _sim_setting(args, config, "strike-cpc", config.get("strike_cpc"))
    sell_ratio = float(_sim_setting(args, config, "sell-ratio", config.get("sell_ratio", 0.2)))
    seed = int(_sim_setting(args, config, "seed", DEFAULT_SEED))
    rate = float(_sim_setting(args, config, "rate", 0.05))
    supply = int(_sim_setting(args, config, "supply", 8000))
    if budget is None:
        raise UsageError("--budget is required (flag or config)")
    if strike_cpc is None:
        raise UsageError("--strike-cpc is required (flag or config)")
    budget = float(budget)
    strike_cpc = float(strike_cpc)

    market_path = _sim_setting(args, config, "market")
    scenario = _sim_setting(args, config, "scenario")
    sigma = _sim_setting(args, config, "sigma")

    if market_path is not None:
        market_path = Path(market_path)
        if not market_path.exists():
            raise UsageError(f"market file not found: {market_path}")
        series = diagnostics.PriceSeries.from_csv(market_path)
        spot = series.prices[0]
        if sigma is None:
            sigma = diagnostics.estimate_gbm(series).sigma
        days = [
            market_sim.MarketDay(day=d, avg_cpm=p, supply=supply)
            for d, p in zip(series.dates[1:], series.prices[1:])
        ]
        horizon_days = len(days)
    elif scenario is not None:
        n_days = int(_sim_setting(args, config, "days", 30))
        spot = float(_sim_setting(args, config, "spot-cpm", config.get("spot_cpm", 1.0)))
        sigma = float(sigma if sigma is not None else 0.5)
        drift = _sim_setting(args, config, "drift")
        if drift is None:
            drift = 3.0 if scenario == "bull" else -3.0
        sv = SvParams(spot_M0=spot, sigma0=sigma, kappa=0.0, theta=sigma, delta=0.0)
        days = market_sim.synthetic_market(sv, float(drift), n_days, supply, seed)
        horizon_days = n_days
    else:
        raise UsageError("either --market or --scenario is required")

    option_price = _sim_setting(args, config, "option-price", config.get("option_price"))
    if option_price is None:
        contract = OptionContract(
            strike=strike_cpc,
            expiry_T=horizon_days / 365.0,
            rate_r=rate,
            steps_n=max(horizon_days, 1),
            ctr=ctr,
        )
        option_price = gbm_lattice.closed_form_price(
            GbmParams(spot_M0=spot, sigma=float(sigma)), contract
        )
    option_price = float(option_price)

    out = args.output_dir
    out.mkdir(parents=True, exist_ok=True)
    rtb = market_sim.simulate_rtb(budget, days, ctr)
    options = market_sim.simulate_options(budget, days, ctr, option_price, strike_cpc)
    revenue = market_sim.revenue_analysis(days, ctr, sell_ratio, option_price, strike_cpc)

    with open(out / "rtb.csv", "w", newline="") as fh:
        market_sim.ledger_to_csv(rtb, fh)
    with open(out / "options.csv", "w", newline="") as fh:
        market_sim.ledger_to_csv(options, fh)
    with open(out / "revenue.csv", "w", newline="") as fh:
        market_sim.revenue_to_csv(revenue, fh)

    summary = {
        "option_price": _fmt(option_price),
        "bull_market": market_sim.is_bull(days, spot),
        "rtb_clicks": rtb.total_clicks,
        "option_clicks": options.total_clicks,
        "rtb_cost_per_click": _fmt(rtb.cost_per_click) if rtb.total_clicks else None,
        "option_cost_per_click": _fmt(options.cost_per_click) if options.total_clicks else None,
        "mean_revenue": _fmt(revenue.mean_revenue),
        "std_revenue": _fmt(revenue.std_revenue),
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


_DISPATCH = {
    "price": cmd_price,
    "converge": cmd_converge,
    "diagnose": cmd_diagnose,
    "validate": cmd_validate,
    "simulate": cmd_simulate,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    try:
        return _DISPATCH[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
