"""Budget-feasible procurement of consumer datasets with Hoeffding value bounds.

The platform cannot evaluate the aggregate Wasserstein distance of an
arbitrary coalition without pooling raw data, so it works from individual
distances: the coalition bound averages the members' privacy terms and adds
a concentration deviation scaled by a range proxy. Finite-population
sampling tightens the deviation by the usual (N - m)/(N - 1) factor and
vanishes for the grand coalition. A centralized (trusted third party)
variant that sees exact aggregate distances is kept as the benchmark.

Selection is exhaustive over coalitions: maximize bound value minus
payments subject to paying at most the bound value. Bid-paying variants are
individually rational; the centralized incentive-compatible variant pays
each winner the largest bid at which it would still have been selected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

VARIANTS = ("fin", "inf", "cen_ir", "cen_ic")

__all__ = [
    "VARIANTS",
    "HoeffdingConfig",
    "MarketInstance",
    "ProcurementOutcome",
    "TrialRecord",
    "deviation_factor",
    "hoeffding_bound",
    "bound_table",
    "value_table",
    "instance_value_table",
    "solve_auction",
    "critical_payments",
    "simulate_trials",
    "feasibility_rate",
    "profit_stats",
    "sensitivity_sweep",
]

_MAX_CONSUMERS = 20


@dataclass(frozen=True)
class HoeffdingConfig:
    """Parameters of the coalition distance bound.

    confidence is the probability the bound holds (the exceedance budget is
    1 - confidence); n_population the number of consumers sampled from;
    range_proxy the spread scale (defaults to the largest individual
    distance); finite selects the finite-population correction.
    """

    confidence: float
    n_population: int
    range_proxy: float | None = None
    finite: bool = True

    def __post_init__(self) -> None:
        if not (0.0 < self.confidence < 1.0):
            raise ValueError("confidence must lie strictly inside (0, 1)")
        if self.n_population < 1:
            raise ValueError("n_population must be positive")
        if self.range_proxy is not None and self.range_proxy < 0.0:
            raise ValueError("range_proxy must be nonnegative")


def deviation_factor(m: int, config: HoeffdingConfig) -> float:
    """Concentration coefficient c(m): multiply by the range proxy to get the
    deviation term. Decreasing in coalition size; the finite-population
    version is never larger than the infinite one and is exactly zero at
    m = N."""
    if not (1 <= m <= config.n_population):
        raise ValueError(f"coalition size {m} outside 1..{config.n_population}")
    log_term = math.log(2.0 / (1.0 - config.confidence))
    fpc = (config.n_population - m) / (config.n_population - 1) if config.finite and config.n_population > 1 else 1.0
    if config.finite and config.n_population == 1:
        fpc = 0.0
    return math.sqrt(fpc * log_term / (2.0 * m))


def _range_proxy(w_individual: np.ndarray, config: HoeffdingConfig) -> float:
    return float(np.max(w_individual)) if config.range_proxy is None else config.range_proxy


def hoeffding_bound(members: np.ndarray, w_dp: np.ndarray, w_individual: np.ndarray,
                    config: HoeffdingConfig) -> float:
    """Upper confidence bound on a coalition's aggregate distance to the target.

    members is a boolean mask over consumers. The bound is the mean privacy
    term of the members plus deviation_factor(m) times the range proxy.
    """
    m = np.asarray(members, dtype=bool)
    size = int(m.sum())
    if size == 0:
        raise ValueError("coalition must be nonempty")
    dp_term = float(np.mean(np.asarray(w_dp, dtype=float)[m]))
    return dp_term + deviation_factor(size, config) * _range_proxy(np.asarray(w_individual, float), config)


def _member_matrix(n: int) -> np.ndarray:
    masks = np.arange(1 << n, dtype=np.uint32)
    return (masks[:, None] >> np.arange(n)) & 1


def bound_table(w_dp: np.ndarray, w_individual: np.ndarray, config: HoeffdingConfig) -> np.ndarray:
    """Vector of hoeffding_bound over every coalition mask; entry 0 is 0."""
    w_dp = np.asarray(w_dp, dtype=float)
    n = w_dp.size
    if n > _MAX_CONSUMERS:
        raise ValueError(f"exhaustive enumeration capped at {_MAX_CONSUMERS} consumers")
    mm = _member_matrix(n).astype(float)
    sizes = mm.sum(axis=1)
    sizes[0] = 1.0  # avoid 0/0; overwritten below
    dp_term = mm @ w_dp / sizes
    radius = _range_proxy(np.asarray(w_individual, float), config)
    devs = np.array([0.0] + [deviation_factor(m, config) for m in range(1, n + 1)])
    out = dp_term + devs[mm.sum(axis=1).astype(int)] * radius
    out[0] = 0.0
    return out


def value_table(k_lip: float, budget_ref: float, w_by_mask: np.ndarray) -> np.ndarray:
    """Coalition purchase values [budget_ref - k_lip * W]+ with value(empty) = 0."""
    if k_lip <= 0.0:
        raise ValueError("k_lip must be positive")
    out = np.maximum(budget_ref - k_lip * np.asarray(w_by_mask, dtype=float), 0.0)
    out[0] = 0.0
    return out


@dataclass(frozen=True)
class MarketInstance:
    """One data market: per-consumer distances, per-coalition truths, prices of data.

    exact_w and profit_by_mask are indexed by coalition bitmask (consumer i
    is bit i); profit_by_mask[0] is the reference profit without any
    purchased data.
    """

    w_dp: np.ndarray
    w_individual: np.ndarray
    exact_w: np.ndarray
    profit_by_mask: np.ndarray
    k_lip: float
    budget_ref: float
    confidence: float
    n_consumers: int

    def hoeffding(self, finite: bool) -> HoeffdingConfig:
        return HoeffdingConfig(confidence=self.confidence, n_population=self.n_consumers,
                               finite=finite)


def instance_value_table(instance: MarketInstance, variant: str) -> np.ndarray:
    """Per-mask purchase values for a mechanism variant."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    if variant in ("cen_ir", "cen_ic"):
        w = instance.exact_w
    else:
        w = bound_table(instance.w_dp, instance.w_individual, instance.hoeffding(variant == "fin"))
    return value_table(instance.k_lip, instance.budget_ref, w)


@dataclass(frozen=True)
class ProcurementOutcome:
    mask: int
    members: tuple[int, ...]
    value: float
    payments: np.ndarray
    objective: float
    budget_feasible: bool

    @property
    def total_payment(self) -> float:
        return float(self.payments.sum())


def _select(values: np.ndarray, bid_sums: np.ndarray, sizes: np.ndarray) -> int:
    feasible = bid_sums <= values + 1e-12
    objective = values - bid_sums
    objective = np.where(feasible, objective, -np.inf)
    best = objective.max()
    ties = np.flatnonzero(objective >= best - 1e-12)
    # smaller coalitions first, then lowest mask
    order = np.lexsort((ties, sizes[ties]))
    return int(ties[order[0]])


def solve_auction(bids: np.ndarray, values: np.ndarray, pay_rule: str = "bids") -> ProcurementOutcome:
    """Pick the coalition maximizing value minus payments, paying at most the value.

    pay_rule 'bids' pays winners their reported reserve prices; 'critical'
    pays each winner the threshold bid at which it would drop out of the
    selection (found by bisection re-solves, others' bids held fixed).
    The empty coalition (objective 0) is always feasible, so the solver
    never returns an infeasible outcome.
    """
    bids = np.asarray(bids, dtype=float)
    n = bids.size
    if 1 << n != values.size:
        raise ValueError("values table size must be 2**len(bids)")
    if np.any(bids < 0.0):
        raise ValueError("bids must be nonnegative")
    mm = _member_matrix(n)
    sizes = mm.sum(axis=1)
    bid_sums = mm.astype(float) @ bids
    mask = _select(values, bid_sums, sizes)
    members = tuple(int(i) for i in range(n) if mask >> i & 1)
    if pay_rule == "bids":
        payments = np.where(mm[mask].astype(bool), bids, 0.0)
    elif pay_rule == "critical":
        payments = critical_payments(bids, values, mask)
    else:
        raise ValueError(f"unknown pay_rule {pay_rule!r}")
    total = float(payments.sum())
    value = float(values[mask])
    return ProcurementOutcome(
        mask=mask,
        members=members,
        value=value,
        payments=payments,
        objective=value - float(bid_sums[mask]),
        budget_feasible=total <= value + 1e-9,
    )


def critical_payments(bids: np.ndarray, values: np.ndarray, mask: int) -> np.ndarray:
    """Threshold payment per selected member: the supremum bid keeping it selected.

    Raising a member's bid only ever pushes it out (selection is monotone),
    so bisection between the reported bid and a surely-losing bid converges
    to the threshold. Unselected consumers are paid nothing.
    """
    bids = np.asarray(bids, dtype=float)
    n = bids.size
    mm = _member_matrix(n)
    sizes = mm.sum(axis=1)
    base_sums = mm.astype(float) @ bids
    payments = np.zeros(n)
    losing = float(values.max()) + float(bids.sum()) + 1.0
    for i in range(n):
        if not mask >> i & 1:
            continue
        col = mm[:, i].astype(float)
        lo, hi = float(bids[i]), losing
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            chosen = _select(values, base_sums + (mid - bids[i]) * col, sizes)
            if chosen >> i & 1:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-12 * max(1.0, abs(hi)):
                break
        payments[i] = lo
    return payments


@dataclass(frozen=True)
class TrialRecord:
    variant: str
    theta_bar: float
    trial: int
    mask: int
    n_members: int
    value: float
    total_payment: float
    profit: float
    reference_profit: float

    @property
    def feasible_ex_post(self) -> bool:
        return self.profit >= self.reference_profit - 1e-9


def simulate_trials(instance: MarketInstance, theta_bars: np.ndarray, n_trials: int,
                    seed: int, variants: tuple[str, ...] = VARIANTS) -> list[TrialRecord]:
    """Monte-Carlo reserve-price trials over a grid of price caps.

    Each trial t draws one uniform vector from the stream (seed, t) and
    scales it by every theta_bar (common random numbers across the grid, so
    curves are comparable). Realized profit is the coalition's test-split
    profit minus payments; the reference profit is the no-purchase profit.
    """
    tables = {v: instance_value_table(instance, v) for v in variants}
    ref_profit = float(instance.profit_by_mask[0])
    records: list[TrialRecord] = []
    for trial in range(n_trials):
        u = np.random.default_rng([seed, trial]).random(instance.n_consumers)
        for theta_bar in np.asarray(theta_bars, dtype=float):
            bids = u * theta_bar
            for variant in variants:
                outcome = solve_auction(bids, tables[variant],
                                        pay_rule="critical" if variant == "cen_ic" else "bids")
                profit = float(instance.profit_by_mask[outcome.mask]) - outcome.total_payment
                records.append(TrialRecord(
                    variant=variant,
                    theta_bar=float(theta_bar),
                    trial=trial,
                    mask=outcome.mask,
                    n_members=len(outcome.members),
                    value=outcome.value,
                    total_payment=outcome.total_payment,
                    profit=profit,
                    reference_profit=ref_profit,
                ))
    return records


def feasibility_rate(records: list[TrialRecord]) -> float:
    """Share of trials whose realized profit covers the no-purchase profit."""
    if not records:
        raise ValueError("no records")
    return sum(r.feasible_ex_post for r in records) / len(records)


def profit_stats(records: list[TrialRecord]) -> dict[str, float]:
    profits = np.array([r.profit for r in records])
    return {
        "mean": float(profits.mean()),
        "min": float(profits.min()),
        "max": float(profits.max()),
        "p": feasibility_rate(records),
    }


def sensitivity_sweep(instance: MarketInstance, parameter: str, grid: np.ndarray,
                      theta_bar: float, n_trials: int, seed: int,
                      variants: tuple[str, ...] = ("fin", "inf")) -> list[dict[str, float | str]]:
    """Re-run the trials while sweeping confidence, k_lip, or budget_ref.

    Returns one row per (parameter value, variant) with mean/min/max profit,
    the feasibility rate p, and the no-purchase reference profit.
    """
    if parameter not in ("confidence", "k_lip", "budget_ref"):
        raise ValueError("parameter must be confidence, k_lip, or budget_ref")
    rows: list[dict[str, float | str]] = []
    for value in np.asarray(grid, dtype=float):
        inst = replace(instance, **{parameter: float(value)})
        records = simulate_trials(inst, np.array([theta_bar]), n_trials, seed, variants)
        for variant in variants:
            sub = [r for r in records if r.variant == variant]
            stats = profit_stats(sub)
            rows.append({
                "parameter": parameter,
                "value": float(value),
                "variant": variant,
                "mean_profit": stats["mean"],
                "min_profit": stats["min"],
                "max_profit": stats["max"],
                "p": stats["p"],
                "reference_profit": float(instance.profit_by_mask[0]),
            })
    return rows
