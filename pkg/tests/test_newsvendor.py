import numpy as np
import pytest

from metermarket.distributions import Dirac, Empirical, Gaussian
from metermarket.newsvendor import (
    MarketPrices,
    critical_fractile,
    expected_profit,
    optimal_bid,
    profit_gradient,
    realized_profit,
)

PRICES = MarketPrices(retail=0.20, wholesale=0.10, balance_sell=0.04, balance_buy=0.18)


def _random_prices(rng):
    sell = float(rng.uniform(0.0, 0.05))
    wholesale = float(rng.uniform(sell + 0.02, sell + 0.15))
    buy = float(rng.uniform(wholesale + 0.02, wholesale + 0.15))
    return MarketPrices(retail=float(rng.uniform(0.05, 0.4)), wholesale=wholesale,
                        balance_sell=sell, balance_buy=buy)


def test_price_ordering_enforced():
    with pytest.raises(ValueError):
        MarketPrices(retail=0.2, wholesale=0.10, balance_sell=0.12, balance_buy=0.18)
    with pytest.raises(ValueError):
        MarketPrices(retail=0.2, wholesale=0.10, balance_sell=0.04, balance_buy=0.10)
    with pytest.raises(ValueError):
        MarketPrices(retail=0.2, wholesale=0.10, balance_sell=-0.01, balance_buy=0.18)


def test_critical_fractile_value():
    # underage 0.08, overage 0.06
    assert PRICES.underage == pytest.approx(0.08)
    assert PRICES.overage == pytest.approx(0.06)
    assert critical_fractile(PRICES) == pytest.approx(0.08 / 0.14)


def test_fractile_inside_unit_interval():
    rng = np.random.default_rng(1)
    for _ in range(50):
        tau = critical_fractile(_random_prices(rng))
        assert 0.0 < tau < 1.0


def test_gaussian_profit_matches_monte_carlo():
    rng = np.random.default_rng(42)
    for _ in range(10):
        p = _random_prices(rng)
        d = Gaussian(float(rng.uniform(5, 20)), float(rng.uniform(0.5, 4)))
        bid = float(rng.normal(d.mu, 2 * d.sigma))
        draws = rng.normal(d.mu, d.sigma, 100_000)
        samples = realized_profit(bid, draws, p)
        se = samples.std(ddof=1) / np.sqrt(samples.size)
        assert abs(expected_profit(bid, d, p) - samples.mean()) <= 3 * se


def test_empirical_profit_is_exact_weighted_mean():
    rng = np.random.default_rng(8)
    vals = rng.normal(10, 2, 200)
    d = Empirical(vals)
    bid = 10.3
    expect = realized_profit(bid, vals, PRICES).mean()
    assert expected_profit(bid, d, PRICES) == pytest.approx(expect, abs=1e-12)


def test_point_mass_profit():
    d = Dirac(10.0)
    assert expected_profit(10.0, d, PRICES) == pytest.approx(0.20 * 10.0)
    assert expected_profit(12.0, d, PRICES) == pytest.approx(0.20 * 10.0 - PRICES.overage * 2.0)
    assert expected_profit(9.0, d, PRICES) == pytest.approx(0.20 * 10.0 - PRICES.underage * 1.0)


def test_optimal_bid_beats_grid_search():
    rng = np.random.default_rng(3)
    for _ in range(10):
        p = _random_prices(rng)
        d = Gaussian(float(rng.uniform(5, 20)), float(rng.uniform(0.5, 4)))
        q = optimal_bid(d, p)
        grid = np.arange(d.mu - 5 * d.sigma, d.mu + 5 * d.sigma, 1e-3 * d.sigma)
        profits = np.array([expected_profit(float(g), d, p) for g in grid])
        assert expected_profit(q, d, p) >= profits.max() - 1e-12
        assert abs(q - grid[profits.argmax()]) <= 1.5e-3 * d.sigma


def test_optimal_bid_empirical_is_fractile_sample():
    d = Empirical(np.array([1.0, 2.0, 3.0, 4.0, 5.0]))
    tau = critical_fractile(PRICES)  # ~0.571 -> third of five samples
    assert optimal_bid(d, PRICES) == 3.0
    assert tau < 0.6


def test_gradient_matches_central_difference():
    rng = np.random.default_rng(12)
    h = 1e-5
    for _ in range(100):
        p = _random_prices(rng)
        d = Gaussian(float(rng.uniform(5, 20)), float(rng.uniform(0.5, 4)))
        q = float(rng.normal(d.mu, 2 * d.sigma))
        fd = (expected_profit(q + h, d, p) - expected_profit(q - h, d, p)) / (2 * h)
        g = profit_gradient(q, d, p)
        assert g == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_gradient_zero_at_optimum_and_profit_concave():
    d = Gaussian(10.0, 2.0)
    q = optimal_bid(d, PRICES)
    assert profit_gradient(q, d, PRICES) == pytest.approx(0.0, abs=1e-12)
    qs = np.linspace(4, 16, 41)
    vals = [expected_profit(float(x), d, PRICES) for x in qs]
    second = np.diff(vals, 2)
    assert np.all(second <= 1e-12)


def test_gradient_rejects_empirical():
    with pytest.raises(TypeError):
        profit_gradient(1.0, Empirical(np.array([1.0, 2.0])), PRICES)


def test_profit_change_bounded_by_wasserstein():
    # |profit(q, P) - profit(q, Q)| <= max(|retail - underage|, retail + overage) * w1(P, Q)
    from metermarket.distributions import w1

    rng = np.random.default_rng(77)
    for _ in range(200):
        p = _random_prices(rng)
        lip = max(abs(p.retail - p.underage), p.retail + p.overage)
        a = Empirical(rng.normal(10, 2, int(rng.integers(2, 80))))
        b = Empirical(rng.normal(11, 3, int(rng.integers(2, 80))))
        q = float(rng.uniform(5, 16))
        gap = abs(expected_profit(q, a, p) - expected_profit(q, b, p))
        assert gap <= lip * w1(a, b) + 1e-9


def test_realized_profit_slopes():
    # below the bid the payoff slope in demand is retail + overage, above it retail - underage
    p = PRICES
    lo = realized_profit(10.0, np.array([4.0, 5.0]), p)
    hi = realized_profit(10.0, np.array([14.0, 15.0]), p)
    assert lo[1] - lo[0] == pytest.approx(p.retail + p.overage)
    assert hi[1] - hi[0] == pytest.approx(p.retail - p.underage)
