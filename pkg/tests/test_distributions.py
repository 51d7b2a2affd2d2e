import numpy as np
import pytest
from scipy.stats import wasserstein_distance

from metermarket.distributions import (
    SQRT_2_OVER_PI,
    Dirac,
    Empirical,
    Gaussian,
    dist_mean,
    dist_std,
    individual_value,
    quantile,
    target_aggregate,
    w1,
    w1_quantile_grid,
)


def test_empirical_sorts_and_defaults_uniform():
    e = Empirical(np.array([3.0, 1.0, 2.0]))
    assert np.array_equal(e.values, [1.0, 2.0, 3.0])
    assert np.allclose(e.weights, 1.0 / 3.0)


def test_empirical_keeps_weights_aligned_after_sorting():
    e = Empirical(np.array([3.0, 1.0]), np.array([0.25, 0.75]))
    assert np.array_equal(e.values, [1.0, 3.0])
    assert np.array_equal(e.weights, [0.75, 0.25])
    assert dist_mean(e) == pytest.approx(1.5)


def test_empirical_rejects_bad_weights():
    with pytest.raises(ValueError):
        Empirical(np.array([1.0, 2.0]), np.array([0.6, 0.6]))
    with pytest.raises(ValueError):
        Empirical(np.array([1.0, 2.0]), np.array([-0.1, 1.1]))
    with pytest.raises(ValueError):
        Empirical(np.array([]))


def test_quantile_left_continuous_on_atoms():
    e = Empirical(np.array([1.0, 2.0, 3.0]), np.array([0.3, 0.4, 0.3]))
    assert quantile(e, 0.3) == 1.0
    assert quantile(e, 0.30001) == 2.0
    assert quantile(e, 0.7) == 2.0
    assert quantile(e, 1.0) == 3.0
    g = Gaussian(5.0, 2.0)
    assert quantile(g, 0.5) == pytest.approx(5.0)


def test_w1_identity_is_zero():
    rng = np.random.default_rng(7)
    e = Empirical(rng.normal(size=50))
    assert w1(e, e) == 0.0
    assert w1(Gaussian(1.0, 2.0), Gaussian(1.0, 2.0)) == 0.0
    assert w1(Dirac(3.0), Dirac(3.0)) == 0.0


def test_w1_equal_size_uniform_is_mean_sorted_gap():
    rng = np.random.default_rng(11)
    a = rng.normal(size=40)
    b = rng.normal(2.0, 1.5, size=40)
    expect = np.mean(np.abs(np.sort(a) - np.sort(b)))
    assert w1(Empirical(a), Empirical(b)) == pytest.approx(expect, abs=1e-12)


def test_w1_weighted_empirical_matches_scipy():
    rng = np.random.default_rng(23)
    for _ in range(20):
        na, nb = rng.integers(1, 60, size=2)
        a_vals = rng.normal(size=na)
        b_vals = rng.normal(1.0, 2.0, size=nb)
        wa = rng.random(na)
        wa /= wa.sum()
        a = Empirical(a_vals, wa)
        b = Empirical(b_vals)
        ref = wasserstein_distance(a.values, b.values, a.weights, b.weights)
        assert w1(a, b) == pytest.approx(ref, abs=1e-12)


def test_w1_gaussian_dirac_closed_form():
    for sigma in (0.3, 1.0, 4.5):
        assert w1(Gaussian(0.0, sigma), Dirac()) == pytest.approx(sigma * SQRT_2_OVER_PI, abs=1e-15)
    # off-center point mass against the quantile-grid oracle
    got = w1(Gaussian(1.3, 0.8), Dirac(0.2))
    assert got == pytest.approx(w1_quantile_grid(Gaussian(1.3, 0.8), Dirac(0.2), 2000001), abs=1e-5)


def test_w1_equal_mean_gaussians():
    assert w1(Gaussian(2.0, 3.0), Gaussian(2.0, 1.0)) == pytest.approx(2.0 * SQRT_2_OVER_PI, abs=1e-15)


def test_w1_translation_shifts_by_offset():
    rng = np.random.default_rng(3)
    vals = rng.normal(size=30)
    assert w1(Empirical(vals), Empirical(vals + 2.5)) == pytest.approx(2.5, abs=1e-12)
    assert w1(Gaussian(0.0, 1.0), Gaussian(2.5, 1.0)) == pytest.approx(2.5, abs=1e-12)


def test_w1_gaussian_empirical_matches_grid_oracle():
    rng = np.random.default_rng(5)
    for _ in range(5):
        g = Gaussian(float(rng.normal()), float(rng.uniform(0.4, 2.0)))
        e = Empirical(rng.normal(0.5, 1.5, size=int(rng.integers(3, 200))))
        assert w1(g, e) == pytest.approx(w1_quantile_grid(g, e, 400001), abs=2e-4)


def _random_dist(rng):
    kind = rng.integers(3)
    if kind == 0:
        return Gaussian(float(rng.normal(0, 2)), float(rng.uniform(0.2, 3.0)))
    if kind == 1:
        n = int(rng.integers(1, 40))
        if rng.random() < 0.5:
            return Empirical(rng.normal(0, 2, n))
        w = rng.random(n)
        return Empirical(rng.normal(0, 2, n), w / w.sum())
    return Dirac(float(rng.normal(0, 2)))


def test_w1_metric_axioms_on_random_triples():
    rng = np.random.default_rng(17)
    for _ in range(100):
        a, b, c = (_random_dist(rng) for _ in range(3))
        dab, dba = w1(a, b), w1(b, a)
        assert abs(dab - dba) <= 1e-12
        assert dab >= 0.0
        assert w1(a, c) <= dab + w1(b, c) + 1e-9


def test_individual_value_adds_privacy_penalty():
    rng = np.random.default_rng(2)
    c = Empirical(rng.normal(1.0, 0.5, 48))
    t = Empirical(rng.normal(1.2, 0.4, 48))
    base = w1(c, t)
    assert individual_value(c, t, 0.0) == pytest.approx(base)
    assert individual_value(c, t, 0.3) == pytest.approx(base + 0.3 * SQRT_2_OVER_PI)
    with pytest.raises(ValueError):
        individual_value(c, t, -0.1)


def test_target_aggregate_averages_pointwise():
    series = np.array([[1.0, 2.0, 3.0], [3.0, 2.0, 1.0]])
    agg = target_aggregate(series)
    assert np.array_equal(agg.values, [2.0, 2.0, 2.0])
    with pytest.raises(ValueError):
        target_aggregate(np.empty((0, 5)))


def test_dist_std_weighted():
    e = Empirical(np.array([0.0, 2.0]), np.array([0.5, 0.5]))
    assert dist_std(e) == pytest.approx(1.0)
    assert dist_std(Dirac(4.0)) == 0.0
    assert dist_std(Gaussian(0.0, 1.5)) == 1.5
