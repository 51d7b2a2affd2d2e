"""Lipschitz constants linking Wasserstein distance to newsvendor profit loss.

Three tiers, from loosest to tightest: a distribution-free global constant
driven only by prices and the forecast model's own constant; an empirical
constant calibrated from decision regret between reference datasets; and a
local constant for Gaussian demand that is valid within a trust radius xi
of the optimal bid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .distributions import Distribution, Gaussian, w1
from .newsvendor import MarketPrices, critical_fractile, expected_profit, optimal_bid, profit_gradient

__all__ = [
    "EmpiricalCalibration",
    "global_constant",
    "empirical_constant",
    "local_constant",
    "bound_curves",
]


def global_constant(k_f: float, prices: MarketPrices) -> float:
    """Distribution-free constant 2 * k_f * max(underage, overage).

    k_f is the Lipschitz constant of the forecast model mapping data to
    bids; 1 when bids are read directly off the data distribution.
    """
    if k_f <= 0.0:
        raise ValueError("k_f must be positive")
    return 2.0 * k_f * max(prices.underage, prices.overage)


@dataclass(frozen=True)
class EmpiricalCalibration:
    """Decision-regret calibration over a set of reference datasets.

    max_ratio is the headline empirical constant: the largest regret per
    unit of Wasserstein distance over ordered dataset pairs. mean_ratio is
    reported alongside as a stability diagnostic.
    """

    max_ratio: float
    mean_ratio: float
    n_pairs: int


def empirical_constant(references: list[Distribution], prices: MarketPrices,
                       min_distance: float = 1e-12) -> EmpiricalCalibration:
    """Calibrate a constant from profit regret between reference datasets.

    For each ordered pair (i, j): take the bid optimal for dataset i, apply
    it to dataset j, and divide the profit shortfall against j's own optimal
    bid by w1(i, j). Pairs closer than min_distance are skipped; having no
    usable pair is an error.
    """
    bids = [optimal_bid(d, prices) for d in references]
    ratios = []
    for j, dj in enumerate(references):
        best = expected_profit(bids[j], dj, prices)
        for i, di in enumerate(references):
            if i == j:
                continue
            dist = w1(di, dj)
            if dist < min_distance:
                continue
            regret = best - expected_profit(bids[i], dj, prices)
            ratios.append(abs(regret) / dist)
    if not ratios:
        raise ValueError("no reference pair is farther apart than min_distance")
    arr = np.asarray(ratios)
    return EmpiricalCalibration(float(arr.max()), float(arr.mean()), arr.size)


def local_constant(prices: MarketPrices, sigma_demand: float, xi: float) -> float:
    """Lipschitz constant of Gaussian-demand profit within xi of the optimal bid.

    The profit gradient falls monotonically from underage to -overage, so
    the steepest slope on [q* - xi, q* + xi] sits at an endpoint. Which
    endpoint wins follows the sign of underage - overage; a tie takes the
    larger branch (they coincide there by symmetry).
    """
    if sigma_demand <= 0.0:
        raise ValueError("sigma_demand must be positive")
    if xi < 0.0:
        raise ValueError("xi must be nonnegative")
    total = prices.underage + prices.overage
    z_tau = float(ndtri(critical_fractile(prices)))
    x = xi / sigma_demand
    below = prices.underage - total * float(ndtr(z_tau - x))   # slope at q* - xi
    above = prices.overage - total * float(ndtr(-z_tau - x))   # |slope| at q* + xi
    return max(below, above)


def bound_curves(prices: MarketPrices, demand: Gaussian, q_grid: np.ndarray,
                 k_f: float = 1.0) -> dict[str, np.ndarray | float]:
    """Profit-loss curve against its Lipschitz bounds on a bid grid.

    Returns per-grid-point true loss profit(q*) - profit(q) plus the linear
    bounds K * |q - q*| for the global constant 2*k_f*max(underage, overage),
    the one-sided constant k_f*underage, the local constant at radius
    xi = max |q - q*|, and the realized constant (the largest gradient
    magnitude the grid actually reaches).
    """
    grid = np.asarray(q_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("q_grid must be nonempty")
    q_star = optimal_bid(demand, prices)
    offsets = grid - q_star
    best = expected_profit(q_star, demand, prices)
    loss = best - np.array([expected_profit(float(q), demand, prices) for q in grid])
    xi = float(np.max(np.abs(offsets)))
    constants = {
        "k_global": global_constant(k_f, prices),
        "k_underage": k_f * prices.underage,
        "k_local": local_constant(prices, demand.sigma, xi),
        "k_actual": float(np.max(np.abs([profit_gradient(float(q), demand, prices) for q in grid]))),
    }
    out: dict[str, np.ndarray | float] = {
        "offset": offsets,
        "true_loss": loss,
        "xi": xi,
        "q_star": q_star,
    }
    out.update(constants)
    for name, k in constants.items():
        out["bound_" + name.removeprefix("k_")] = k * np.abs(offsets)
    return out
