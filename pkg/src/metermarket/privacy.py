"""Gaussian release noise for scheduled loads and its allocation across consumers.

Consumers hide their flexible (schedulable) consumption behind additive
Gaussian noise before sharing it. A population-level privacy factor gamma
fixes the total noise variance as a multiple of the total scheduled-load
variance; an allocation scenario decides how that budget is split across
consumers.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .distributions import Gaussian

SCENARIOS = ("corr", "inv", "uni", "rand")

__all__ = ["SCENARIOS", "allocate_noise", "gaussian_noise", "dp_forecast", "sigma_for_epsilon"]


def allocate_noise(scheduled_sigmas: np.ndarray, gamma: float, scenario: str,
                   seed: int | None = None) -> np.ndarray:
    """Split the total noise variance gamma * sum(sigma_s^2) across consumers.

    Scenarios (all shares are variance shares):
      corr  proportional to each consumer's scheduled-load variance,
      inv   proportional to its inverse,
      uni   equal split,
      rand  proportional to seeded uniform draws.

    Returns the per-consumer noise standard deviations.
    """
    sig = np.asarray(scheduled_sigmas, dtype=float)
    if sig.ndim != 1 or sig.size == 0:
        raise ValueError("scheduled_sigmas must be a nonempty 1-d array")
    if np.any(sig <= 0.0):
        raise ValueError("scheduled sigmas must be positive")
    if gamma < 0.0:
        raise ValueError("gamma must be nonnegative")
    total = gamma * float(np.sum(sig**2))
    if scenario == "corr":
        shares = sig**2 / np.sum(sig**2)
    elif scenario == "inv":
        inv = 1.0 / sig**2
        shares = inv / inv.sum()
    elif scenario == "uni":
        shares = np.full(sig.size, 1.0 / sig.size)
    elif scenario == "rand":
        if seed is None:
            raise ValueError("the rand scenario needs a seed")
        draws = np.random.default_rng(seed).random(sig.size)
        shares = draws / draws.sum()
    else:
        raise ValueError(f"unknown scenario {scenario!r}, expected one of {SCENARIOS}")
    return np.sqrt(total * shares)


def gaussian_noise(sigmas_dp: np.ndarray, seed: int) -> np.ndarray:
    """One noise draw per consumer, N(0, sigma_dp^2), deterministic per seed."""
    sig = np.asarray(sigmas_dp, dtype=float)
    if np.any(sig < 0.0):
        raise ValueError("noise sigmas must be nonnegative")
    return np.random.default_rng(seed).normal(0.0, 1.0, sig.size) * sig


def dp_forecast(members: np.ndarray, mu_u: np.ndarray, sigma_u: np.ndarray,
                mu_s: np.ndarray, sigma_s: np.ndarray, l_s: np.ndarray,
                sigma_dp: np.ndarray) -> Gaussian:
    """Aggregate demand forecast when coalition members share noisy realizations.

    `members` is a boolean mask. Every consumer's unscheduled part stays
    forecast as N(mu_u, sigma_u^2). Members replace their scheduled forecast
    with the realized value l_s plus release noise of std sigma_dp;
    non-members keep N(mu_s, sigma_s^2). Independent components add in mean
    and variance.
    """
    m = np.asarray(members, dtype=bool)
    mean = float(np.sum(mu_u) + np.sum(np.where(m, l_s, mu_s)))
    var = float(np.sum(np.square(sigma_u))
                + np.sum(np.where(m, np.square(sigma_dp), np.square(sigma_s))))
    return Gaussian(mean, math.sqrt(var))


def sigma_for_epsilon(epsilon: float, delta: float, sensitivity: float = 1.0) -> float:
    """Smallest Gaussian noise std giving an (epsilon, delta) guarantee.

    Uses the exact Gaussian-mechanism privacy curve
        delta(sigma) = ndtr(s/(2 sigma) - epsilon sigma/s)
                       - exp(epsilon) * ndtr(-s/(2 sigma) - epsilon sigma/s)
    and solves it for sigma. Provided as a utility for mapping privacy
    budgets to noise levels; the experiments parameterize noise directly.
    """
    if epsilon <= 0.0 or not (0.0 < delta < 1.0) or sensitivity <= 0.0:
        raise ValueError("need epsilon > 0, 0 < delta < 1, sensitivity > 0")

    def curve(sigma: float) -> float:
        a = sensitivity / (2.0 * sigma)
        b = epsilon * sigma / sensitivity
        return float(ndtr(a - b) - math.exp(epsilon) * ndtr(-a - b)) - delta

    lo, hi = 1e-12, 1.0
    while curve(hi) > 0.0:
        hi *= 2.0
        if hi > 1e12:
            raise ArithmeticError("failed to bracket the privacy curve")
    return float(brentq(curve, lo, hi, xtol=1e-12, rtol=1e-12))
