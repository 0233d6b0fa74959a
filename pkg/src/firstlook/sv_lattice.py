"""Censored binomial lattice for the stochastic-volatility underlying.

The log price, measured relative to the spot, lives on a per-level grid
whose spacing follows the mean-reverting volatility path. The top node
of each level is snapped to the nearest grid point; the rest keep the
recombining pattern and the resulting displacement is absorbed into
censored transition probabilities, so node probability mass is conserved
exactly.

Anchoring the grid at the spot keeps grid indices small; anchored at
absolute zero instead, a large log spot scrambles the node displacements
whenever the spacing changes and the lattice loses terminal variance at
a rate that does not vanish with the step count.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Iterator

import numpy as np

from .contracts import OptionContract, SvParams, underlying_value


def vol_mean_path(params: SvParams, t: float) -> float:
    """Conditional mean of the volatility process at time t.

    The reversion drift is linear in sigma, so the conditional mean
    follows theta + (sigma0 - theta) * exp(-kappa * t) regardless of the
    noise scale.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    return params.theta + (params.sigma0 - params.theta) * math.exp(-params.kappa * t)


def nearest_grid_index(x: float, sigma_next: float, dt: float) -> int:
    """Integer J minimizing |J * sigma_next * sqrt(dt) - x|.

    Exact ties round toward the larger index.
    """
    if sigma_next <= 0:
        raise ValueError(f"sigma_next must be > 0, got {sigma_next}")
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    spacing = sigma_next * math.sqrt(dt)
    return int(math.floor(x / spacing + 0.5))


def censored_transition(
    q_mass: float, k_adjust: float, sigma_next: float, dt: float
) -> tuple[float, float]:
    """Split a node's probability mass between its two successors.

    The raw up-flow (q_mass/2) * (1 + K / (sigma*sqrt(dt))) keeps the
    expected log-price increment on its drift; it is censored into
    [0, q_mass] when the grid displacement K is too large. Censoring is
    defined behavior, not an error.
    """
    if sigma_next <= 0:
        raise ValueError(f"sigma_next must be > 0, got {sigma_next}")
    spacing = sigma_next * math.sqrt(dt)
    raw = 0.5 * q_mass * (1.0 + k_adjust / spacing)
    q_up = min(max(raw, 0.0), q_mass)
    return q_up, q_mass - q_up


@dataclass(frozen=True)
class SvNode:
    """One lattice node; transition fields are None on the terminal level.

    ``x`` is the log price relative to the spot, so the node's CPM is
    spot * exp(x).
    """

    x: float
    q_mass: float
    j: int | None
    k_adjust: float | None
    q_up: float | None
    q_down: float | None


class SvLattice:
    """Recombining censored binomial lattice, built level by level.

    Level k holds k+1 nodes as dense arrays. ``xs[k]`` are spot-relative
    log prices, ``qs[k]`` node probabilities; ``js``/``ks``/``q_ups``/
    ``q_downs`` describe the outgoing transitions of levels 0..n-1 (K is
    the node's signed displacement above its grid point,
    x - J*sigma*sqrt(dt)).
    """

    def __init__(
        self,
        params: SvParams,
        contract: OptionContract,
        vol_path: list[float],
        xs: list[np.ndarray],
        qs: list[np.ndarray],
        js: list[np.ndarray],
        ks: list[np.ndarray],
        q_ups: list[np.ndarray],
        q_downs: list[np.ndarray],
    ) -> None:
        self.params = params
        self.contract = contract
        self.dt = contract.dt
        self.vol_path = vol_path
        self.xs = xs
        self.qs = qs
        self.js = js
        self.ks = ks
        self.q_ups = q_ups
        self.q_downs = q_downs

    @property
    def n_steps(self) -> int:
        return self.contract.steps_n

    def level_nodes(self, k: int) -> list[SvNode]:
        terminal = k == self.n_steps
        nodes = []
        for i in range(k + 1):
            nodes.append(
                SvNode(
                    x=float(self.xs[k][i]),
                    q_mass=float(self.qs[k][i]),
                    j=None if terminal else int(self.js[k][i]),
                    k_adjust=None if terminal else float(self.ks[k][i]),
                    q_up=None if terminal else float(self.q_ups[k][i]),
                    q_down=None if terminal else float(self.q_downs[k][i]),
                )
            )
        return nodes

    @property
    def levels(self) -> Iterator[list[SvNode]]:
        for k in range(self.n_steps + 1):
            yield self.level_nodes(k)


def build_censored_lattice(params: SvParams, contract: OptionContract) -> SvLattice:
    """Construct the lattice over the contract's step count.

    Raises ValueError naming the level and node if any intermediate
    value turns non-finite.
    """
    n = contract.steps_n
    dt = contract.dt
    r = contract.rate_r
    vol_path = [vol_mean_path(params, k * dt) for k in range(n + 1)]

    xs = [np.array([0.0])]
    qs = [np.array([1.0])]
    js: list[np.ndarray] = []
    ks: list[np.ndarray] = []
    q_ups: list[np.ndarray] = []
    q_downs: list[np.ndarray] = []

    for k in range(n):
        sigma_next = vol_path[k + 1]
        spacing = sigma_next * math.sqrt(dt)
        drift = (r - 0.5 * sigma_next * sigma_next) * dt
        x = xs[k]
        q = qs[k]

        j_top = nearest_grid_index(float(x[0]), sigma_next, dt)
        j = j_top - 2 * np.arange(k + 1)
        k_adj = x - j * spacing
        raw = 0.5 * q * (1.0 + k_adj / spacing)
        q_up = np.clip(raw, 0.0, q)
        q_down = q - q_up

        grid = (j_top + 1) - 2 * np.arange(k + 2)
        x_next = grid * spacing + drift
        q_next = np.empty(k + 2)
        q_next[0] = q_up[0]
        q_next[1 : k + 1] = q_down[:-1] + q_up[1:]
        q_next[k + 1] = q_down[-1]

        for name, arr in (("x", x_next), ("Q", q_next), ("K", k_adj)):
            bad = np.flatnonzero(~np.isfinite(arr))
            if bad.size:
                raise ValueError(
                    f"non-finite {name} while building level {k + 1}, node {bad[0]}"
                )

        js.append(j)
        ks.append(k_adj)
        q_ups.append(q_up)
        q_downs.append(q_down)
        xs.append(x_next)
        qs.append(q_next)

    return SvLattice(params, contract, vol_path, xs, qs, js, ks, q_ups, q_downs)


@dataclass(frozen=True)
class SvPriceResult:
    """Option price plus the per-node value lattice for inspection.

    ``price`` is the discounted expected terminal payoff;
    ``backward_price`` re-derives it by per-step backward induction and
    agrees with ``price`` up to accumulation roundoff.
    """

    price: float
    backward_price: float
    values: list[np.ndarray]


def price_sv_option(lattice: SvLattice) -> SvPriceResult:
    """Discounted expected terminal payoff and the backward value lattice."""
    contract = lattice.contract
    n = lattice.n_steps
    dt = lattice.dt
    terminal_cpm = lattice.params.spot_M0 * np.exp(lattice.xs[n])
    intrinsic = np.maximum(underlying_value(terminal_cpm, contract) - contract.strike, 0.0)
    disc_total = math.exp(-contract.rate_r * contract.expiry_T)
    price = disc_total * float(np.dot(lattice.qs[n], intrinsic))

    values = [np.empty(0)] * (n + 1)
    values[n] = intrinsic
    step_disc = math.exp(-contract.rate_r * dt)
    for k in range(n - 1, -1, -1):
        q = lattice.qs[k]
        q_up = lattice.q_ups[k]
        # conditional up-probability; zero-mass nodes split evenly
        cond_up = np.where(q > 0, np.divide(q_up, q, out=np.full_like(q, 0.5), where=q > 0), 0.5)
        nxt = values[k + 1]
        values[k] = step_disc * (cond_up * nxt[:-1] + (1.0 - cond_up) * nxt[1:])
    backward = float(values[0][0])
    return SvPriceResult(price=price, backward_price=backward, values=values)


def lattice_to_csv(lattice: SvLattice, stream: IO[str], result: SvPriceResult | None = None) -> None:
    """Dump every node with header level,node,x,J,K,Q,q_up,q_down,option_value."""
    if result is None:
        result = price_sv_option(lattice)
    writer = csv.writer(stream)
    writer.writerow(["level", "node", "x", "J", "K", "Q", "q_up", "q_down", "option_value"])
    n = lattice.n_steps
    for k in range(n + 1):
        terminal = k == n
        for i in range(k + 1):
            writer.writerow(
                [
                    k,
                    i,
                    f"{lattice.xs[k][i]:.12g}",
                    "" if terminal else int(lattice.js[k][i]),
                    "" if terminal else f"{lattice.ks[k][i]:.12g}",
                    f"{lattice.qs[k][i]:.12g}",
                    "" if terminal else f"{lattice.q_ups[k][i]:.12g}",
                    "" if terminal else f"{lattice.q_downs[k][i]:.12g}",
                    f"{result.values[k][i]:.12g}",
                ]
            )
