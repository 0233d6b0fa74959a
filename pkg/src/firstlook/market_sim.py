"""Advertiser delivery and publisher revenue under option-based selling.

Days are abstracted to an average winning CPM and an impression supply;
clicks follow deterministically from a constant CTR. The option strategy
pre-pays a premium per covered click out of each delivery day's budget
and exercises only on days where the spot per-click value exceeds the
strike.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date, timedelta
from typing import IO, Sequence

import numpy as np

from . import montecarlo
from .contracts import SvParams, per_click_value
from .montecarlo import Scheme


@dataclass(frozen=True)
class MarketDay:
    """One trading day: average winning payment CPM and available supply."""

    day: date
    avg_cpm: float
    supply: int
    reserve_floor: bool = False

    def __post_init__(self) -> None:
        if self.avg_cpm <= 0 or not math.isfinite(self.avg_cpm):
            raise ValueError(f"avg_cpm must be > 0, got {self.avg_cpm}")
        if self.supply < 0:
            raise ValueError(f"supply must be >= 0, got {self.supply}")


@dataclass(frozen=True)
class LedgerRow:
    """Advertiser-side record of one delivery day."""

    day: date
    avg_cpm: float
    supply: int
    budget: float
    premium_paid: float
    options_held: int
    options_exercised: int
    impressions: int
    clicks: int
    spend: float


@dataclass(frozen=True)
class SimulationLedger:
    """Day-by-day delivery record with exact totals."""

    rows: tuple[LedgerRow, ...]
    degenerate_rtb: bool = False

    @property
    def total_budget(self) -> float:
        return sum(r.budget for r in self.rows)

    @property
    def total_premium(self) -> float:
        return sum(r.premium_paid for r in self.rows)

    @property
    def total_spend(self) -> float:
        """Premium plus delivery-day spend."""
        return sum(r.premium_paid + r.spend for r in self.rows)

    @property
    def total_impressions(self) -> int:
        return sum(r.impressions for r in self.rows)

    @property
    def total_clicks(self) -> int:
        return sum(r.clicks for r in self.rows)

    @property
    def cost_per_click(self) -> float:
        clicks = self.total_clicks
        return self.total_spend / clicks if clicks else math.inf


def _rtb_fill(budget: float, day: MarketDay, ctr: float) -> tuple[int, int, float]:
    """Impressions, clicks and spend when a budget meets the spot market."""
    price_per_impression = day.avg_cpm / 1000.0
    affordable = int(math.floor(budget / price_per_impression)) if budget > 0 else 0
    impressions = min(day.supply, affordable)
    spend = impressions * price_per_impression
    clicks = int(math.floor(impressions * ctr))
    return impressions, clicks, spend


def simulate_rtb(
    budget_per_day: float, days: Sequence[MarketDay], ctr: float
) -> SimulationLedger:
    """Spot-market-only delivery with a fixed daily budget."""
    if budget_per_day < 0:
        raise ValueError(f"budget_per_day must be >= 0, got {budget_per_day}")
    if not 0 < ctr <= 1:
        raise ValueError(f"ctr must be in (0, 1], got {ctr}")
    rows = []
    for day in days:
        impressions, clicks, spend = _rtb_fill(budget_per_day, day, ctr)
        rows.append(
            LedgerRow(
                day=day.day,
                avg_cpm=day.avg_cpm,
                supply=day.supply,
                budget=budget_per_day,
                premium_paid=0.0,
                options_held=0,
                options_exercised=0,
                impressions=impressions,
                clicks=clicks,
                spend=spend,
            )
        )
    return SimulationLedger(rows=tuple(rows))


def simulate_options(
    budget_per_day: float,
    days: Sequence[MarketDay],
    ctr: float,
    option_price: float,
    strike_cpc: float,
    clicks_per_option: int = 1,
) -> SimulationLedger:
    """Delivery when each day's budget first buys per-click options.

    The advertiser buys as many options as the day's budget can both pay
    for upfront and exercise later, then on the delivery day exercises
    them whenever the spot per-click value strictly exceeds the strike;
    leftover budget goes to the spot market either way.
    """
    if budget_per_day <= 0:
        raise ValueError(f"budget_per_day must be > 0, got {budget_per_day}")
    if not 0 < ctr <= 1:
        raise ValueError(f"ctr must be in (0, 1], got {ctr}")
    if option_price < 0 or strike_cpc < 0:
        raise ValueError("option_price and strike_cpc must be >= 0")
    if clicks_per_option < 1:
        raise ValueError(f"clicks_per_option must be >= 1, got {clicks_per_option}")

    if option_price >= budget_per_day:
        base = simulate_rtb(budget_per_day, days, ctr)
        return SimulationLedger(rows=base.rows, degenerate_rtb=True)

    cost_per_option = option_price + strike_cpc * clicks_per_option
    rows = []
    for day in days:
        held = (
            int(math.floor(budget_per_day / cost_per_option)) if cost_per_option > 0 else 0
        )
        premium = held * option_price
        remaining = budget_per_day - premium

        exercised = 0
        clicks_opt = 0
        impressions_opt = 0
        strike_spend = 0.0
        market_per_click = per_click_value(day.avg_cpm, ctr)
        if market_per_click > strike_cpc:
            click_capacity = int(math.floor(day.supply * ctr))
            by_supply = click_capacity // clicks_per_option
            by_budget = (
                int(math.floor(remaining / (strike_cpc * clicks_per_option)))
                if strike_cpc > 0
                else held
            )
            exercised = min(held, by_supply, by_budget)
            clicks_opt = exercised * clicks_per_option
            impressions_opt = int(math.floor(clicks_opt / ctr))
            strike_spend = clicks_opt * strike_cpc
            remaining -= strike_spend

        spot_day = MarketDay(
            day=day.day,
            avg_cpm=day.avg_cpm,
            supply=day.supply - impressions_opt,
            reserve_floor=day.reserve_floor,
        )
        impressions_rtb, clicks_rtb, rtb_spend = _rtb_fill(remaining, spot_day, ctr)

        rows.append(
            LedgerRow(
                day=day.day,
                avg_cpm=day.avg_cpm,
                supply=day.supply,
                budget=budget_per_day,
                premium_paid=premium,
                options_held=held,
                options_exercised=exercised,
                impressions=impressions_opt + impressions_rtb,
                clicks=clicks_opt + clicks_rtb,
                spend=strike_spend + rtb_spend,
            )
        )
    return SimulationLedger(rows=tuple(rows))


@dataclass(frozen=True)
class RevenueDay:
    """Publisher-side revenue decomposition of one day."""

    day: date
    premium_income: float
    strike_income: float
    rtb_income: float

    @property
    def total(self) -> float:
        return self.premium_income + self.strike_income + self.rtb_income


@dataclass(frozen=True)
class RevenueReport:
    mean_revenue: float
    std_revenue: float
    series: tuple[RevenueDay, ...]


def revenue_analysis(
    days: Sequence[MarketDay],
    ctr: float,
    sell_ratio: float,
    option_price: float,
    strike_cpc: float,
) -> RevenueReport:
    """Publisher revenue when a fraction of daily supply is pre-sold.

    Each day's pre-sold impressions back per-click options; exercised
    options earn the strike while the rest of the supply clears at the
    spot CPM. Premium income is attributed to the day it covers.
    """
    if not 0 <= sell_ratio <= 1:
        raise ValueError(f"sell_ratio must be in [0, 1], got {sell_ratio}")
    if not 0 < ctr <= 1:
        raise ValueError(f"ctr must be in (0, 1], got {ctr}")
    series = []
    for day in days:
        sold_impressions = int(math.floor(day.supply * sell_ratio))
        options_sold = int(math.floor(sold_impressions * ctr))
        premium_income = options_sold * option_price
        exercised = per_click_value(day.avg_cpm, ctr) > strike_cpc
        if exercised and options_sold > 0:
            strike_income = options_sold * strike_cpc
            rtb_income = (day.supply - sold_impressions) * day.avg_cpm / 1000.0
        else:
            strike_income = 0.0
            rtb_income = day.supply * day.avg_cpm / 1000.0
        series.append(
            RevenueDay(
                day=day.day,
                premium_income=premium_income,
                strike_income=strike_income,
                rtb_income=rtb_income,
            )
        )
    totals = np.array([d.total for d in series])
    mean = float(totals.mean()) if series else 0.0
    std = float(totals.std(ddof=1)) if len(series) > 1 else 0.0
    return RevenueReport(mean_revenue=mean, std_revenue=std, series=tuple(series))


def is_bull(days: Sequence[MarketDay], spot_cpm: float) -> bool:
    """A test period is bull when its average price exceeds the pricing-date spot."""
    usable = [d.avg_cpm for d in days if not d.reserve_floor]
    if not usable:
        return False
    return float(np.mean(usable)) > spot_cpm


def synthetic_market(
    sv: SvParams,
    mu: float,
    n_days: int,
    base_supply: int,
    seed: int,
    start: date = date(2013, 2, 8),
    scheme: Scheme = Scheme.EULER,
) -> list[MarketDay]:
    """Seeded synthetic daily market from the SV path sampler.

    Constant-vol scenarios use kappa = delta = 0. Supply jitters +-10%
    around the base level, deterministically for a given seed.
    """
    if n_days < 1:
        raise ValueError(f"n_days must be >= 1, got {n_days}")
    if base_supply < 1:
        raise ValueError(f"base_supply must be >= 1, got {base_supply}")
    path = montecarlo.sample_paths(
        sv, mu, 1.0 / 365.0, n_days, 1, scheme, seed
    )[0]
    rng = np.random.default_rng(seed + 1)
    jitter = rng.integers(-base_supply // 10, base_supply // 10 + 1, size=n_days)
    days = []
    for i in range(n_days):
        days.append(
            MarketDay(
                day=start + timedelta(days=i),
                avg_cpm=float(path[i + 1]),
                supply=int(base_supply + jitter[i]),
            )
        )
    return days


def ledger_to_csv(ledger: SimulationLedger, stream: IO[str]) -> None:
    writer = csv.writer(stream)
    writer.writerow(
        [
            "date",
            "avg_cpm",
            "supply",
            "budget",
            "premium_paid",
            "options_held",
            "options_exercised",
            "impressions",
            "clicks",
            "spend",
        ]
    )
    for r in ledger.rows:
        writer.writerow(
            [
                r.day.isoformat(),
                f"{r.avg_cpm:.12g}",
                r.supply,
                f"{r.budget:.12g}",
                f"{r.premium_paid:.12g}",
                r.options_held,
                r.options_exercised,
                r.impressions,
                r.clicks,
                f"{r.spend:.12g}",
            ]
        )
    writer.writerow(
        [
            "total",
            "",
            sum(r.supply for r in ledger.rows),
            f"{ledger.total_budget:.12g}",
            f"{ledger.total_premium:.12g}",
            sum(r.options_held for r in ledger.rows),
            sum(r.options_exercised for r in ledger.rows),
            ledger.total_impressions,
            ledger.total_clicks,
            f"{sum(r.spend for r in ledger.rows):.12g}",
        ]
    )


def revenue_to_csv(report: RevenueReport, stream: IO[str]) -> None:
    writer = csv.writer(stream)
    writer.writerow(["date", "premium_income", "strike_income", "rtb_income", "total"])
    for d in report.series:
        writer.writerow(
            [
                d.day.isoformat(),
                f"{d.premium_income:.12g}",
                f"{d.strike_income:.12g}",
                f"{d.rtb_income:.12g}",
                f"{d.total:.12g}",
            ]
        )
    writer.writerow(
        ["summary", f"{report.mean_revenue:.12g}", f"{report.std_revenue:.12g}", "", ""]
    )
