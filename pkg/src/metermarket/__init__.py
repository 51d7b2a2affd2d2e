"""Valuation and procurement of privacy-protected smart-meter data for retail electricity forecasting."""

from .distributions import (
    Dirac,
    Distribution,
    Empirical,
    Gaussian,
    individual_value,
    target_aggregate,
    w1,
)
from .newsvendor import (
    MarketPrices,
    critical_fractile,
    expected_profit,
    optimal_bid,
    profit_gradient,
    realized_profit,
)

__version__ = "0.1.0"
