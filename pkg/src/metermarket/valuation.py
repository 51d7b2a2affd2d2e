"""Cooperative valuation of forecast data and Shapley payment allocation.

A coalition is a set of consumers plus, possibly, the retailer. Only
coalitions containing the retailer create value: consumers hold data, the
retailer holds the procurement problem that turns data into profit. Several
candidate value functions are supported, from the profit ground truth to
Wasserstein proxies computable without the retailer's private prices, and a
metrics bundle scores any candidate against the ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .distributions import Distribution, dist_std, w1
from .newsvendor import MarketPrices, expected_profit, optimal_bid
from .procurement import HoeffdingConfig, hoeffding_bound

VALUE_KINDS = ("delta_pi", "delta_sigma", "dro", "w_ref", "w_target", "w_fin", "w_inf")

__all__ = [
    "VALUE_KINDS",
    "ValuationContext",
    "GameMetrics",
    "coalition_value",
    "build_game",
    "shapley_values",
    "game_metrics",
]


class ValuationContext:
    """Everything needed to price a coalition's data.

    demands[mask] is the demand forecast available when exactly the
    consumers in `mask` share their data (mask 0 is the no-data reference,
    the full mask the best forecast). Profits and forecast distances are
    measured against eval_demand, which defaults to the best forecast
    itself but can be the noiseless target when the forecasts carry privacy
    noise. The optional wd_to_best hook replaces the exact distance with a
    surrogate (used for the distribution-free upper-bound mode under
    privacy noise).
    """

    def __init__(
        self,
        prices: MarketPrices,
        demands: Sequence[Distribution],
        eval_demand: Distribution | None = None,
        k_lip: float | None = None,
        c_sigma: float | None = None,
        hoeffding: HoeffdingConfig | None = None,
        w_dp: np.ndarray | None = None,
        w_individual: np.ndarray | None = None,
        wd_to_best: Callable[[int], float] | None = None,
    ) -> None:
        n = (len(demands) - 1).bit_length()
        if len(demands) != 1 << n or len(demands) < 2:
            raise ValueError("demands must have length 2**n_consumers with n_consumers >= 1")
        self.prices = prices
        self.demands = list(demands)
        self.n_consumers = n
        self.full_mask = (1 << n) - 1
        self.eval_demand = self.demands[self.full_mask] if eval_demand is None else eval_demand
        self.k_lip = k_lip
        self.c_sigma = c_sigma
        self.hoeffding = hoeffding
        self.w_dp = None if w_dp is None else np.asarray(w_dp, dtype=float)
        self.w_individual = None if w_individual is None else np.asarray(w_individual, dtype=float)
        self._wd_to_best = wd_to_best
        self._profit: dict[int, float] = {}
        self._wd_best: dict[int, float] = {}

    def coalition_profit(self, mask: int) -> float:
        """Expected profit of the coalition-informed bid against eval_demand."""
        if mask not in self._profit:
            bid = optimal_bid(self.demands[mask], self.prices)
            self._profit[mask] = expected_profit(bid, self.eval_demand, self.prices)
        return self._profit[mask]

    def wd_to_best(self, mask: int) -> float:
        if mask not in self._wd_best:
            if self._wd_to_best is not None:
                self._wd_best[mask] = self._wd_to_best(mask)
            else:
                self._wd_best[mask] = w1(self.eval_demand, self.demands[mask])
        return self._wd_best[mask]

    def wd_to_reference(self, mask: int) -> float:
        return w1(self.demands[0], self.demands[mask])

    def profit_gap(self) -> float:
        """Best-forecast profit minus reference profit, the budget of the game."""
        return self.coalition_profit(self.full_mask) - self.coalition_profit(0)

    def _members(self, mask: int) -> np.ndarray:
        return (mask >> np.arange(self.n_consumers) & 1).astype(bool)

    def _require(self, name: str):
        val = getattr(self, name)
        if val is None:
            raise ValueError(f"this value kind needs context attribute {name!r}")
        return val


def coalition_value(kind: str, consumer_mask: int, ctx: ValuationContext) -> float:
    """Value of the coalition {retailer} + consumers in consumer_mask.

    Coalitions without the retailer are worth zero by definition and are
    handled by build_game; this function prices the retailer-containing
    ones. The w_target, w_fin, and w_inf kinds clip negative values to zero
    so the induced game keeps the Shapley axioms meaningful.
    """
    if kind not in VALUE_KINDS:
        raise ValueError(f"unknown value kind {kind!r}, expected one of {VALUE_KINDS}")
    ref_profit = ctx.coalition_profit(0)
    if kind == "delta_pi":
        return ctx.coalition_profit(consumer_mask) - ref_profit
    if kind == "delta_sigma":
        c_sigma = ctx._require("c_sigma")
        return c_sigma * (dist_std(ctx.demands[0]) - dist_std(ctx.demands[consumer_mask]))
    if kind == "dro":
        # in-sample profit of the coalition forecast, discounted by the
        # worst-case transport cost at the underage rate
        bid = optimal_bid(ctx.demands[consumer_mask], ctx.prices)
        inside = expected_profit(bid, ctx.demands[consumer_mask], ctx.prices)
        return inside - ctx.prices.underage * ctx.wd_to_best(consumer_mask) - ref_profit
    k_lip = ctx._require("k_lip")
    if kind == "w_ref":
        return k_lip * ctx.wd_to_reference(consumer_mask)
    gap = ctx.profit_gap()
    if kind == "w_target":
        return max(gap - k_lip * ctx.wd_to_best(consumer_mask), 0.0)
    # Hoeffding kinds; the retailer-alone coalition keeps the exact distance
    if consumer_mask == 0:
        w_hat = ctx.wd_to_best(0)
    else:
        cfg = ctx._require("hoeffding")
        cfg = HoeffdingConfig(confidence=cfg.confidence, n_population=cfg.n_population,
                              range_proxy=cfg.range_proxy, finite=(kind == "w_fin"))
        w_hat = hoeffding_bound(ctx._members(consumer_mask), ctx._require("w_dp"),
                                ctx._require("w_individual"), cfg)
    return max(gap - k_lip * w_hat, 0.0)


def build_game(kind: str, ctx: ValuationContext) -> np.ndarray:
    """Characteristic function over all subsets of {consumers..., retailer}.

    Player i < n_consumers is consumer i; player n_consumers is the
    retailer (highest bit). Retailer-free coalitions are worth zero.
    """
    n = ctx.n_consumers
    values = np.zeros(1 << (n + 1))
    retailer_bit = 1 << n
    for consumer_mask in range(1 << n):
        values[retailer_bit | consumer_mask] = coalition_value(kind, consumer_mask, ctx)
    return values


def shapley_values(values: np.ndarray) -> np.ndarray:
    """Exact Shapley values of a characteristic function given by subsets.

    values has length 2**p with values[0] == 0; player i's marginal
    contributions are weighted by |S|!(p-|S|-1)!/p! over subsets S not
    containing i. Exact enumeration, practical to p around 20.
    """
    size = values.size
    p = size.bit_length() - 1
    if 1 << p != size:
        raise ValueError("values length must be a power of two")
    if p > 21:
        raise ValueError("exact Shapley enumeration capped at 21 players")
    if abs(values[0]) > 1e-12:
        raise ValueError("empty coalition must have zero value")
    masks = np.arange(size, dtype=np.uint32)
    sizes = np.bitwise_count(masks).astype(int)
    fact = np.array([math.factorial(k) for k in range(p + 1)], dtype=float)
    weights = fact[np.arange(p)] * fact[p - 1 - np.arange(p)] / fact[p]
    phi = np.empty(p)
    for i in range(p):
        without = masks[(masks >> i & 1) == 0]
        gains = values[without | (1 << i)] - values[without]
        phi[i] = float(np.sum(weights[sizes[without]] * gains))
    return phi


@dataclass(frozen=True)
class GameMetrics:
    """How a candidate value function compares with the profit ground truth.

    pearson_rho correlates candidate and truth coalition values over the
    retailer-containing coalitions with at least one consumer (nan when a
    side is constant). frac_nonpositive is the share of those candidate
    values at or below zero. delta_total is candidate total payout minus
    truth total payout; delta_abs the summed absolute per-player payout
    difference, also reported as a fraction of the truth total payout.
    retailer_share is the retailer's cut of the candidate payout.
    """

    pearson_rho: float
    frac_nonpositive: float
    delta_total: float
    delta_abs: float
    delta_abs_frac: float
    retailer_share: float
    candidate_total: float
    truth_total: float


def game_metrics(candidate: np.ndarray, truth: np.ndarray) -> GameMetrics:
    if candidate.size != truth.size:
        raise ValueError("games must cover the same player set")
    p = candidate.size.bit_length() - 1
    n = p - 1  # consumers
    retailer_bit = 1 << n
    sel = [retailer_bit | m for m in range(1, 1 << n)]
    cand_vals = candidate[sel]
    truth_vals = truth[sel]
    if cand_vals.std() < 1e-15 or truth_vals.std() < 1e-15:
        rho = float("nan")
    else:
        rho = float(np.corrcoef(cand_vals, truth_vals)[0, 1])
    phi_c = shapley_values(candidate)
    phi_t = shapley_values(truth)
    cand_total = float(phi_c.sum())
    truth_total = float(phi_t.sum())
    delta_abs = float(np.abs(phi_c - phi_t).sum())
    return GameMetrics(
        pearson_rho=rho,
        frac_nonpositive=float(np.mean(cand_vals <= 0.0)),
        delta_total=cand_total - truth_total,
        delta_abs=delta_abs,
        delta_abs_frac=delta_abs / truth_total if abs(truth_total) > 1e-15 else float("nan"),
        retailer_share=float(phi_c[n]) / cand_total if abs(cand_total) > 1e-15 else float("nan"),
        candidate_total=cand_total,
        truth_total=truth_total,
    )
