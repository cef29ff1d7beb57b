"""Brute-force Nash checks for priced allocations.

Nothing here reuses the closed-form price formula; the checks evaluate user
costs directly so they can serve as an oracle for :mod:`modalprice.pricing`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import Instance, LatencySnapshot, PopulationCurve, ValidationError
from .pricing import PriceMatrix, breakpoints, mode_ordering

BREAKPOINT_EPS = 1e-9


@dataclass(frozen=True)
class UserGrid:
    """Midpoint samples a_g = (g + 0.5) / G of the unit population."""

    resolution: int = 10_000

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError("grid resolution must be at least 2")

    @property
    def samples(self) -> np.ndarray:
        return (np.arange(self.resolution) + 0.5) / self.resolution


@dataclass(frozen=True)
class Witness:
    order: int
    user: float
    assigned: int
    better: int


@dataclass(frozen=True)
class EquilibriumVerdict:
    is_equilibrium: bool
    worst_violation: float          # hours of user cost
    witness: Witness | None = None


@dataclass
class EndpointReport:
    equality_residuals: list[float] = field(default_factory=list)
    failures: list[tuple] = field(default_factory=list)   # (kind, j, j', a, gap)
    tol: float = 1e-9

    @property
    def max_equality_residual(self) -> float:
        return max(self.equality_residuals, default=0.0)

    @property
    def passed(self) -> bool:
        return not self.failures


def user_cost(ell: float, tau: float, a: float, population: PopulationCurve) -> float:
    """Cost in hours a user at position ``a`` assigns to a mode."""
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"user position {a} outside [0, 1]")
    v = population.value_of_time(a)
    if v <= 0:
        raise ValidationError("value of time must be positive")
    return ell + tau / v


def best_response(ell_row, prices_row, a: float, population: PopulationCurve) -> int:
    costs = [user_cost(float(l), float(t), a, population) for l, t in zip(ell_row, prices_row)]
    return int(np.argmin(costs))   # first minimum, i.e. lowest index on ties


def canonical_assignment(flow_row, ordering=None) -> list[tuple[int, tuple[float, float] | None]]:
    """User intervals per mode, fastest first.

    Intervals are half-open [a_{k-1}, a_k) except the last non-empty one,
    which is closed at 1.  Zero-flow modes get ``None``.
    """
    flow = np.asarray(flow_row, dtype=float)
    if ordering is None:
        ordering = np.arange(len(flow))
    a = breakpoints(flow, ordering)
    out = []
    for pos, j in enumerate(ordering):
        lo, hi = float(a[pos]), float(a[pos + 1])
        out.append((int(j), (lo, hi) if hi > lo else None))
    return out


def _assigned_positions(a: np.ndarray, users: np.ndarray) -> np.ndarray:
    """Sorted position owning each user under the canonical assignment."""
    widths = np.diff(a)
    nonempty = np.flatnonzero(widths > 0)
    # the rightmost non-empty interval whose left end is <= user
    lefts = a[nonempty]
    idx = np.searchsorted(lefts, users, side="right") - 1
    return nonempty[np.clip(idx, 0, len(nonempty) - 1)]


def _order_violation(ell, tau, flow, population, users):
    perm = mode_ordering(ell)
    a = breakpoints(flow, perm)
    probe = np.concatenate((users, a[1:-1] - BREAKPOINT_EPS, a[1:-1] + BREAKPOINT_EPS))
    probe = np.unique(np.clip(probe, 0.0, 1.0))
    v = np.asarray(population.value_of_time(probe), dtype=float)
    if np.any(v <= 0):
        raise ValidationError("value of time must be positive")
    costs = ell[perm][None, :] + tau[perm][None, :] / v[:, None]
    own = _assigned_positions(a, probe)
    own_cost = costs[np.arange(len(probe)), own]
    best = np.argmin(costs, axis=1)
    gap = own_cost - costs[np.arange(len(probe)), best]
    g = int(np.argmax(gap))
    return float(gap[g]), float(probe[g]), int(perm[own[g]]), int(perm[best[g]])


def is_equilibrium(instance: Instance, x, snapshot: LatencySnapshot, prices: PriceMatrix,
                   grid: UserGrid | None = None, tol: float = 1e-9) -> EquilibriumVerdict:
    """Check every order's canonical split against all unilateral deviations."""
    grid = grid or UserGrid()
    x = np.asarray(x, dtype=float)
    tau = np.asarray(prices.tau if isinstance(prices, PriceMatrix) else prices, dtype=float)
    if tau.shape != x.shape:
        raise ValidationError(f"prices shape {tau.shape} does not match allocation {x.shape}")
    users = grid.samples
    worst, witness = 0.0, None
    for i in range(x.shape[0]):
        gap, a, own, better = _order_violation(snapshot.ell[i], tau[i], x[i],
                                               instance.curve(i), users)
        if gap > worst:
            worst = gap
            witness = Witness(order=i, user=a, assigned=own, better=better)
    ok = worst <= tol
    return EquilibriumVerdict(is_equilibrium=ok, worst_violation=worst,
                              witness=None if ok else witness)


def check_row(ell_row, flow_row, prices_row, population: PopulationCurve,
              grid: UserGrid | None = None, tol: float = 1e-9) -> EquilibriumVerdict:
    """Single-order variant of :func:`is_equilibrium`."""
    grid = grid or UserGrid()
    gap, a, own, better = _order_violation(np.asarray(ell_row, dtype=float),
                                           np.asarray(prices_row, dtype=float),
                                           np.asarray(flow_row, dtype=float),
                                           population, grid.samples)
    ok = gap <= tol
    return EquilibriumVerdict(ok, max(gap, 0.0),
                              None if ok else Witness(0, a, own, better))


def endpoint_inequality_check(ell_row, flow_row, prices_row, population: PopulationCurve,
                              tol: float = 1e-9) -> EndpointReport:
    """Check the binding inequalities at every interval endpoint.

    For adjacent modes the price gap must equal latency gap times value of
    time at their shared breakpoint.  For every pair (j, j') a user at either
    end of j's interval must not prefer j'.
    """
    ell = np.asarray(ell_row, dtype=float)
    tau = np.asarray(prices_row, dtype=float)
    perm = mode_ordering(ell)
    a = breakpoints(flow_row, perm)
    ls, ts = ell[perm], tau[perm]
    n = len(perm)
    report = EndpointReport(tol=tol)
    for k in range(n - 1):
        v = population.value_of_time(a[k + 1])
        resid = abs((ts[k] - ts[k + 1]) - (ls[k + 1] - ls[k]) * v)
        report.equality_residuals.append(resid)
        if resid > tol * v:
            report.failures.append(("equality", int(perm[k]), int(perm[k + 1]), float(a[k + 1]), resid))
    for j in range(n):
        for end in (a[j], a[j + 1]):
            v = population.value_of_time(end)
            own = ls[j] + ts[j] / v
            for jp in range(n):
                if jp == j:
                    continue
                gap = own - (ls[jp] + ts[jp] / v)
                if gap > tol:
                    kind = "left" if jp < j else "right"
                    report.failures.append((kind, int(perm[j]), int(perm[jp]), float(end), gap))
    return report
