import numpy as np
import pytest

from metermarket.distributions import Empirical, Gaussian
from metermarket.lipschitz import (
    bound_curves,
    empirical_constant,
    global_constant,
    local_constant,
)
from metermarket.newsvendor import MarketPrices, expected_profit, optimal_bid

PRICES = MarketPrices(retail=0.20, wholesale=0.10, balance_sell=0.04, balance_buy=0.18)
# underage 0.08 > overage 0.06
SYMMETRIC = MarketPrices(retail=0.20, wholesale=0.10, balance_sell=0.04, balance_buy=0.16)


def _random_prices(rng):
    sell = float(rng.uniform(0.0, 0.05))
    wholesale = float(rng.uniform(sell + 0.02, sell + 0.15))
    buy = float(rng.uniform(wholesale + 0.02, wholesale + 0.15))
    return MarketPrices(retail=float(rng.uniform(0.05, 0.4)), wholesale=wholesale,
                        balance_sell=sell, balance_buy=buy)


def test_global_constant_value():
    assert global_constant(1.0, PRICES) == pytest.approx(0.16)
    assert global_constant(2.5, PRICES) == pytest.approx(0.40)
    with pytest.raises(ValueError):
        global_constant(0.0, PRICES)


def test_empirical_constant_two_point_oracle():
    # datasets {0,1} and {1,2}: the fractile bid is the upper atom of each,
    # so regrets are 0.01 (bid 1 against {1,2}) and 0.06 (bid 2 against {0,1})
    a = Empirical(np.array([0.0, 1.0]))
    b = Empirical(np.array([1.0, 2.0]))
    cal = empirical_constant([a, b], PRICES)
    assert cal.n_pairs == 2
    assert cal.max_ratio == pytest.approx(0.06, abs=1e-12)
    assert cal.mean_ratio == pytest.approx(0.035, abs=1e-12)


def test_empirical_constant_skips_coincident_pairs():
    rng = np.random.default_rng(4)
    vals = rng.normal(10, 2, 50)
    a = Empirical(vals)
    b = Empirical(vals.copy())
    c = Empirical(vals + 1.0)
    cal = empirical_constant([a, b, c], PRICES)
    assert cal.n_pairs == 4  # the a-b pairs are skipped
    with pytest.raises(ValueError):
        empirical_constant([a, b], PRICES)


def test_empirical_constant_gaussian_shifts_below_global():
    # pure location shifts: regret per unit distance is capped by max(underage, overage)
    ds = [Gaussian(10.0 + c, 2.0) for c in (0.0, 0.5, 1.5, 3.0)]
    cal = empirical_constant(ds, PRICES)
    assert 0.0 < cal.mean_ratio <= cal.max_ratio
    assert cal.max_ratio <= max(PRICES.underage, PRICES.overage) + 1e-12
    assert cal.max_ratio <= global_constant(1.0, PRICES)


def test_local_constant_endpoints():
    assert local_constant(PRICES, 2.0, 0.0) == pytest.approx(0.0, abs=1e-15)
    # radius far beyond the demand scale approaches the underage rate here
    assert local_constant(PRICES, 2.0, 200.0) == pytest.approx(PRICES.underage, abs=1e-9)
    with pytest.raises(ValueError):
        local_constant(PRICES, 0.0, 1.0)
    with pytest.raises(ValueError):
        local_constant(PRICES, 1.0, -1.0)


def test_local_constant_monotone_in_radius_and_sigma():
    xis = np.linspace(0.0, 10.0, 21)
    ks = [local_constant(PRICES, 2.0, float(x)) for x in xis]
    assert all(b >= a - 1e-15 for a, b in zip(ks, ks[1:]))
    sigmas = np.linspace(0.5, 5.0, 19)
    ks_sigma = [local_constant(PRICES, float(s), 1.0) for s in sigmas]
    assert all(b <= a + 1e-15 for a, b in zip(ks_sigma, ks_sigma[1:]))


def test_local_constant_symmetric_prices_tie():
    # underage == overage: both endpoint slopes coincide
    total = SYMMETRIC.underage + SYMMETRIC.overage
    from scipy.special import ndtr

    k = local_constant(SYMMETRIC, 1.5, 0.9)
    expect = SYMMETRIC.underage - total * float(ndtr(-0.9 / 1.5))
    assert k == pytest.approx(expect, abs=1e-15)


def test_local_constant_bounds_profit_loss():
    rng = np.random.default_rng(31)
    for _ in range(50):
        p = _random_prices(rng)
        d = Gaussian(float(rng.uniform(5, 20)), float(rng.uniform(0.5, 4)))
        xi = float(rng.uniform(0.1, 4.0) * d.sigma)
        k = local_constant(p, d.sigma, xi)
        q_star = optimal_bid(d, p)
        best = expected_profit(q_star, d, p)
        for off in np.linspace(-xi, xi, 17):
            loss = best - expected_profit(q_star + float(off), d, p)
            assert loss <= k * abs(off) + 1e-9
        assert k <= max(p.underage, p.overage) + 1e-15


def test_bound_curves_ordering_and_dominance():
    d = Gaussian(10.0, 2.0)
    grid = np.linspace(10.0 - 5.0, 10.0 + 5.0, 201)
    curves = bound_curves(PRICES, d, grid)
    assert curves["k_actual"] <= curves["k_local"] + 1e-12
    assert curves["k_local"] <= curves["k_underage"] + 1e-15
    assert curves["k_underage"] <= curves["k_global"] + 1e-15
    for name in ("bound_global", "bound_underage", "bound_local", "bound_actual"):
        assert np.all(curves["true_loss"] <= curves[name] + 1e-9)
    # loss at the grid point nearest the optimum is second order in the grid step
    at_opt = np.argmin(np.abs(curves["offset"]))
    assert curves["true_loss"][at_opt] == pytest.approx(0.0, abs=1e-4)
    assert curves["true_loss"].max() > 0.0


def test_bound_curves_rejects_empty_grid():
    with pytest.raises(ValueError):
        bound_curves(PRICES, Gaussian(10.0, 2.0), np.array([]))
