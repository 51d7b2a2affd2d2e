"""Single-period electricity procurement as a newsvendor problem.

The retailer sells a random demand D at the retail rate, procures a bid
quantity q day-ahead at the wholesale rate, tops up shortfalls at the
balancing buy rate and spills surplus at the balancing sell rate. After
netting out the wholesale payment the expected profit is

    profit(q) = retail * E[D] - underage * E[(D - q)+] - overage * E[(q - D)+]

with underage = balance_buy - wholesale and overage = wholesale -
balance_sell. The maximizer is the critical fractile of the demand
distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .distributions import Dirac, Distribution, Empirical, Gaussian, dist_mean, quantile

__all__ = [
    "MarketPrices",
    "critical_fractile",
    "optimal_bid",
    "expected_profit",
    "profit_gradient",
    "realized_profit",
]


@dataclass(frozen=True)
class MarketPrices:
    """Price quadruple for one trading period, all per kWh.

    Requires balance_buy > wholesale > balance_sell >= 0 so that both
    imbalance directions are penalized relative to the day-ahead price; the
    derived underage and overage rates are then strictly positive and the
    critical fractile sits strictly inside (0, 1).
    """

    retail: float
    wholesale: float
    balance_sell: float
    balance_buy: float

    def __post_init__(self) -> None:
        if not (self.balance_buy > self.wholesale > self.balance_sell >= 0.0):
            raise ValueError(
                "prices must satisfy balance_buy > wholesale > balance_sell >= 0, got "
                f"buy={self.balance_buy} wholesale={self.wholesale} sell={self.balance_sell}"
            )
        for name in ("retail", "wholesale", "balance_sell", "balance_buy"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def underage(self) -> float:
        """Per-kWh cost of procuring one unit too few."""
        return self.balance_buy - self.wholesale

    @property
    def overage(self) -> float:
        """Per-kWh cost of procuring one unit too many."""
        return self.wholesale - self.balance_sell


def critical_fractile(prices: MarketPrices) -> float:
    """Profit-maximizing demand quantile, underage / (underage + overage)."""
    return prices.underage / (prices.underage + prices.overage)


def optimal_bid(demand: Distribution, prices: MarketPrices) -> float:
    """Quantity bid maximizing expected profit: the critical-fractile quantile."""
    return float(quantile(demand, critical_fractile(prices)))


def _gaussian_shortfall(bid: float, demand: Gaussian) -> float:
    # E[(D - q)+] for Gaussian D, the standard normal loss function
    z = (bid - demand.mu) / demand.sigma
    return demand.sigma * (float(np.exp(-0.5 * z * z)) / math.sqrt(2.0 * math.pi) - z * (1.0 - float(ndtr(z))))


def expected_profit(bid: float, demand: Distribution, prices: MarketPrices) -> float:
    """Expected single-period profit of bidding `bid` against `demand`.

    Gaussian demand uses the closed-form normal loss function; empirical
    demand is an exact weighted sum; a point mass is the degenerate case.
    """
    mean = dist_mean(demand)
    if isinstance(demand, Gaussian):
        shortfall = _gaussian_shortfall(bid, demand)
        surplus = shortfall + (bid - mean)  # E[(q-D)+] - E[(D-q)+] = q - E[D]
    elif isinstance(demand, Dirac):
        shortfall = max(mean - bid, 0.0)
        surplus = max(bid - mean, 0.0)
    else:
        shortfall = float(np.dot(demand.weights, np.maximum(demand.values - bid, 0.0)))
        surplus = float(np.dot(demand.weights, np.maximum(bid - demand.values, 0.0)))
    return prices.retail * mean - prices.underage * shortfall - prices.overage * surplus


def profit_gradient(bid: float, demand: Gaussian, prices: MarketPrices) -> float:
    """d(expected profit)/d(bid) for Gaussian demand.

    Equals underage - (underage + overage) * CDF(bid); zero exactly at the
    critical-fractile bid, positive below it, negative above it.
    """
    if not isinstance(demand, Gaussian):
        raise TypeError("profit_gradient is defined for Gaussian demand")
    z = (bid - demand.mu) / demand.sigma
    return prices.underage - (prices.underage + prices.overage) * float(ndtr(z))


def realized_profit(bid, actual, prices: MarketPrices):
    """Per-period profit for realized demand, elementwise over arrays.

    This is the piecewise-linear payoff whose expectation `expected_profit`
    computes; its slope in the demand argument is retail + overage below the
    bid and retail - underage above it.
    """
    bid_arr = np.asarray(bid, dtype=float)
    act = np.asarray(actual, dtype=float)
    out = (
        prices.retail * act
        - prices.underage * np.maximum(act - bid_arr, 0.0)
        - prices.overage * np.maximum(bid_arr - act, 0.0)
    )
    return out if out.ndim else float(out)
