"""Contract and unit model shared by every pricing method.

Monetary quantities are plain floats carrying an explicit quote basis
(per-click or per-mille) so CPM-quoted underlying prices and CPC-quoted
strikes are never compared on different scales.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class StrikeBasis(Enum):
    """Quote basis of an option strike."""

    PER_CLICK = "per-click"
    PER_MILLE = "per-mille"


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class OptionContract:
    """European call on future ad inventory at a fixed strike.

    The underlying is the winning payment CPM of the targeted inventory;
    the click-through rate bridges it to a per-click strike.
    """

    strike: float
    expiry_T: float
    rate_r: float
    steps_n: int
    ctr: float = 0.03
    strike_basis: StrikeBasis = StrikeBasis.PER_CLICK

    def __post_init__(self) -> None:
        _require_finite("strike", self.strike)
        _require_finite("expiry_T", self.expiry_T)
        _require_finite("rate_r", self.rate_r)
        _require_finite("ctr", self.ctr)
        if self.strike < 0:
            raise ValueError(f"strike must be >= 0, got {self.strike}")
        if not 0 < self.ctr <= 1:
            raise ValueError(f"ctr must be in (0, 1], got {self.ctr}")
        if self.expiry_T <= 0:
            raise ValueError(f"expiry_T must be > 0, got {self.expiry_T}")
        if not isinstance(self.steps_n, int) or self.steps_n < 1:
            raise ValueError(f"steps_n must be an integer >= 1, got {self.steps_n}")

    @property
    def dt(self) -> float:
        """Length of one lattice step in years."""
        return self.expiry_T / self.steps_n

    def growth_per_step(self) -> float:
        """Risk-less gross return over one step, e^(r*dt)."""
        return math.exp(self.rate_r * self.dt)


@dataclass(frozen=True)
class GbmParams:
    """Constant-volatility underlying: spot CPM, annual volatility, drift.

    The drift is kept for estimation and real-world simulation only;
    risk-neutral pricing replaces it with the risk-free rate.
    """

    spot_M0: float
    sigma: float
    mu: float = 0.0

    def __post_init__(self) -> None:
        _require_finite("spot_M0", self.spot_M0)
        _require_finite("sigma", self.sigma)
        _require_finite("mu", self.mu)
        if self.spot_M0 <= 0:
            raise ValueError(f"spot_M0 must be > 0, got {self.spot_M0}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class SvParams:
    """Mean-reverting stochastic-volatility underlying.

    Volatility reverts from sigma0 toward theta at speed kappa, with
    square-root noise scaled by delta.
    """

    spot_M0: float
    sigma0: float
    kappa: float
    theta: float
    delta: float

    def __post_init__(self) -> None:
        for name in ("spot_M0", "sigma0", "kappa", "theta", "delta"):
            _require_finite(name, getattr(self, name))
        if self.spot_M0 <= 0:
            raise ValueError(f"spot_M0 must be > 0, got {self.spot_M0}")
        if self.sigma0 <= 0:
            raise ValueError(f"sigma0 must be > 0, got {self.sigma0}")
        if self.kappa < 0 or self.theta < 0 or self.delta < 0:
            raise ValueError("kappa, theta and delta must all be >= 0")


def per_click_value(cpm: float, ctr: float):
    """Value of a CPM-quoted price per single click: M / (1000 * CTR).

    Accepts numpy arrays for ``cpm`` as well as scalars.
    """
    if ctr <= 0:
        raise ValueError(f"ctr must be > 0, got {ctr}")
    return cpm / (1000.0 * ctr)


def underlying_value(cpm: float, contract: OptionContract):
    """CPM price converted onto the strike's quote basis."""
    if contract.strike_basis is StrikeBasis.PER_CLICK:
        return per_click_value(cpm, contract.ctr)
    return cpm


def payoff(terminal_cpm: float, contract: OptionContract) -> float:
    """Exercise value at expiry: (underlying value - strike)^+."""
    return max(underlying_value(terminal_cpm, contract) - contract.strike, 0.0)


def discount(value: float, rate_r: float, horizon: float) -> float:
    """Present value of ``value`` received after ``horizon`` years."""
    if horizon < 0:
        raise ValueError(f"horizon must be >= 0, got {horizon}")
    return value * math.exp(-rate_r * horizon)
