"""Closed-form prices that make a desired per-order split a Nash flow.

For one order, sort modes by latency (fastest first) and let a_k be the
cumulative share of users routed to the k fastest modes.  The slowest mode
carries the free base price; every faster mode adds, for each adjacent pair
it passes, the latency gap times the value of time at the breakpoint
separating them.  Users left of a breakpoint value time enough to pay the
premium, users right of it do not, and the user at the breakpoint is
indifferent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import SIMPLEX_TOL, Instance, LatencySnapshot, PopulationCurve, ValidationError, \
    total_cost


@dataclass(frozen=True, eq=False)
class PriceMatrix:
    tau: np.ndarray     # dollars, |orders| x |modalities|
    base: float         # price of each order's slowest mode


@dataclass(frozen=True)
class BasePrice:
    value: float
    subsidy: bool       # True when offsets alone out-earn the operating cost


def mode_ordering(ell_row) -> np.ndarray:
    """Permutation sorting modes by non-decreasing latency, ties by index."""
    return np.argsort(np.asarray(ell_row, dtype=float), kind="stable")


def breakpoints(flow_row, ordering) -> np.ndarray:
    """Cumulative flow a_0 = 0, ..., a_J = 1 along ``ordering``."""
    flow = np.asarray(flow_row, dtype=float)
    if np.any(flow < -SIMPLEX_TOL) or abs(flow.sum() - 1.0) > SIMPLEX_TOL:
        raise ValidationError(f"flow row {flow.tolist()} is not on the unit simplex")
    a = np.concatenate(([0.0], np.cumsum(np.clip(flow[ordering], 0.0, None))))
    a[-1] = 1.0
    return np.minimum(a, 1.0)


def price_offsets(ell_row, flow_row, population: PopulationCurve) -> np.ndarray:
    """Premium of each mode over the slowest one, in original mode order."""
    ell = np.asarray(ell_row, dtype=float)
    perm = mode_ordering(ell)
    a = breakpoints(flow_row, perm)
    v = np.asarray(population.value_of_time(a[1:-1]), dtype=float)
    if np.any(v <= 0):
        raise ValidationError("value of time must be positive at every breakpoint")
    steps = np.diff(ell[perm]) * v
    # offset at sorted position j sums steps j..J-1
    sorted_offsets = np.concatenate((np.cumsum(steps[::-1])[::-1], [0.0]))
    out = np.empty_like(ell)
    out[perm] = sorted_offsets
    return out


def compute_prices(ell_row, flow_row, population: PopulationCurve, base: float) -> np.ndarray:
    return price_offsets(ell_row, flow_row, population) + base


def recursive_prices(ell_row, flow_row, population: PopulationCurve, base: float) -> np.ndarray:
    """Same prices built one adjacent pair at a time from the slowest mode up.

    Kept as an independent route for cross-checking :func:`compute_prices`.
    """
    ell = [float(v) for v in ell_row]
    order = sorted(range(len(ell)), key=lambda j: (ell[j], j))
    cum, a = 0.0, []
    for j in order:
        cum += float(flow_row[j])
        a.append(cum)
    tau = [0.0] * len(ell)
    tau[order[-1]] = base
    for pos in range(len(order) - 2, -1, -1):
        j, nxt = order[pos], order[pos + 1]
        tau[j] = tau[nxt] + (ell[nxt] - ell[j]) * population.value_of_time(a[pos])
    return np.array(tau)


def offset_matrix(instance: Instance, x, snapshot: LatencySnapshot) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.vstack([price_offsets(snapshot.ell[i], x[i], instance.curve(i))
                      for i in range(len(instance.orders))])


def breakeven_base_price(instance: Instance, x, snapshot: LatencySnapshot,
                         offsets: np.ndarray | None = None) -> BasePrice:
    """Base price at which total revenue exactly covers operating cost.

    A negative value is returned as is, flagged as a subsidy.
    """
    x = np.asarray(x, dtype=float)
    if offsets is None:
        offsets = offset_matrix(instance, x, snapshot)
    rates = instance.rates
    offset_revenue = float(np.sum(rates[:, None] * x * offsets))
    value = (total_cost(instance, x) - offset_revenue) / float(rates.sum())
    return BasePrice(value=value, subsidy=value < 0)


def price_allocation(instance: Instance, x, snapshot: LatencySnapshot,
                     base: float | None = None) -> PriceMatrix:
    """Prices for every order; the base defaults to the break-even value."""
    offsets = offset_matrix(instance, x, snapshot)
    if base is None:
        base = breakeven_base_price(instance, x, snapshot, offsets).value
    return PriceMatrix(tau=offsets + base, base=float(base))


def revenue(instance: Instance, x, tau) -> float:
    return float(np.sum(instance.rates[:, None] * np.asarray(x) * np.asarray(tau)))
