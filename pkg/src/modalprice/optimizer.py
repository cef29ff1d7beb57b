"""Latency-minimizing allocation under utilization caps.

The allocation program is solved by projected gradient on the product of
per-order simplices, with a log barrier keeping every fleet below the
utilization cap.  The barrier weight is lowered geometrically; each stage
uses Barzilai-Borwein trial steps with monotone Armijo backtracking.

The operating-cost constraint is not part of the program: the base price
is free, so it is met afterwards by :func:`modalprice.pricing.breakeven_base_price`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .model import Instance, LatencySnapshot, as_allocation, equal_split, latency_snapshot
from .pricing import BasePrice, PriceMatrix, breakeven_base_price, offset_matrix

log = logging.getLogger(__name__)


class InfeasibleInstanceError(RuntimeError):
    """No allocation keeps every fleet at or below the utilization cap."""

    def __init__(self, certificate: "FeasibilityCertificate"):
        super().__init__(
            f"instance infeasible: best achievable max utilization / cap = "
            f"{certificate.max_load:.6g} > 1")
        self.certificate = certificate


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, best: "SolveResult"):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 20_000           # total projected-gradient steps per start
    armijo: float = 1e-4              # sufficient decrease constant
    backtrack: float = 0.5
    max_backtracks: int = 60
    barrier_init: float = 1e-2        # relative to the starting objective
    barrier_decay: float = 0.1
    barrier_final: float = 1e-9       # relative to the starting objective
    feasibility_tol: float = 1e-6
    stationarity_tol: float = 1e-4
    seed: int = 0
    multistart: int = 1

    def __post_init__(self):
        for name in ("armijo", "barrier_init", "barrier_final", "feasibility_tol",
                     "stationarity_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not 0 < self.backtrack < 1 or not 0 < self.barrier_decay < 1:
            raise ValueError("backtrack and barrier_decay must lie in (0, 1)")
        if self.max_iters < 1 or self.multistart < 1:
            raise ValueError("max_iters and multistart must be >= 1")


@dataclass(frozen=True)
class FeasibilityCertificate:
    feasible: bool
    x: np.ndarray
    max_load: float     # min over x of max_j rho_j / rho_cap


@dataclass
class Diagnostics:
    iterations: int = 0
    stages: int = 0
    stationarity: float = 0.0
    simplex_residual: float = 0.0
    max_rho: float = 0.0
    rho_violation: float = 0.0
    barrier_weight: float = 0.0
    start: int = 0
    merit_history: list[list[float]] = field(default_factory=list, repr=False)

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if k != "merit_history"}


@dataclass(frozen=True, eq=False)
class SolveResult:
    x: np.ndarray
    objective: float            # expected latency, hours
    snapshot: LatencySnapshot
    base_price: BasePrice
    prices: PriceMatrix
    diagnostics: Diagnostics


# ---------------------------------------------------------------------------
# objective

def _pickup_slope(instance: Instance, rho: np.ndarray) -> np.ndarray:
    """d p_{i,j} / d rho_j for every cell."""
    bn = instance.beta * instance.fleet[None, :]
    denom = 1.0 + bn * (1.0 - rho[None, :])
    return instance.reach[None, :] * bn / denom ** 2


def _total_and_grad(instance: Instance, x: np.ndarray):
    """Sum of flow-weighted latencies (|I| * L) and its gradient."""
    rho = (instance.rates @ x) / instance.capacity
    if np.any(rho >= 1.0):
        raise ValueError(f"utilization reached 1 (max rho = {rho.max():.6g})")
    bn = instance.beta * instance.fleet[None, :]
    pickup = instance.reach[None, :] / (1.0 + bn * (1.0 - rho[None, :]))
    ell = instance.service_time + instance.travel + pickup
    total = float(np.sum(ell * x))
    congestion = np.sum(x * _pickup_slope(instance, rho), axis=0)
    grad = ell + instance.rates[:, None] * (congestion / instance.capacity)[None, :]
    return total, grad, rho


def objective_and_gradient(instance: Instance, x) -> tuple[float, np.ndarray]:
    """Expected latency L(x) in hours and its analytic gradient."""
    x = np.asarray(x, dtype=float)
    total, grad, _ = _total_and_grad(instance, x)
    n = len(instance.orders)
    return total / n, grad / n


# ---------------------------------------------------------------------------
# projection and feasibility

def project_rows(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row onto the unit simplex."""
    v = np.asarray(v, dtype=float)
    n, m = v.shape
    u = -np.sort(-v, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    ind = np.arange(1, m + 1)
    cond = u - css / ind > 0
    r = np.count_nonzero(cond, axis=1)
    theta = css[np.arange(n), r - 1] / r
    return np.maximum(v - theta[:, None], 0.0)


def feasibility_presolve(instance: Instance) -> FeasibilityCertificate:
    """Minimize the worst utilization-to-cap ratio over all allocations.

    Utilization only sees each fleet's aggregate demand, and any order may
    be split freely, so the optimum spreads total demand in proportion to
    capacity: every fleet then runs at sum(r) / sum(N mu).
    """
    cap = instance.capacity
    share = cap / cap.sum()
    x = np.tile(share, (len(instance.orders), 1))
    load = float(instance.rates.sum() / cap.sum() / instance.rho_cap)
    return FeasibilityCertificate(feasible=load <= 1.0, x=x, max_load=load)


# ---------------------------------------------------------------------------
# solver

def _merit(instance, x, w):
    rho = (instance.rates @ x) / instance.capacity
    if np.any(rho >= instance.rho_cap):
        return np.inf, None
    total, grad, rho = _total_and_grad(instance, x)
    slack = instance.rho_cap - rho
    phi = total - w * float(np.sum(np.log(slack)))
    grad = grad + w * instance.rates[:, None] * (1.0 / (slack * instance.capacity))[None, :]
    return phi, grad


def _residual(x, g) -> float:
    return float(np.max(np.abs(x - project_rows(x - g))))


def _run_barrier(instance: Instance, x0: np.ndarray, config: SolverConfig):
    x = x0.copy()
    scale = max(float(np.sum(latency_snapshot(instance, x).ell * x)), 1e-12)
    w = config.barrier_init * scale
    w_final = config.barrier_final * scale
    history: list[list[float]] = []
    iters, stages, resid = 0, 0, np.inf
    step = 1.0
    while True:
        last = w <= w_final
        stage_tol = config.stationarity_tol if last else max(config.stationarity_tol, 10 * w / scale)
        phi, g = _merit(instance, x, w)
        merits = [phi]
        while iters < config.max_iters:
            resid = _residual(x, g)
            if resid <= stage_tol:
                break
            s = step
            for _ in range(config.max_backtracks):
                xn = project_rows(x - s * g)
                phin, gn = _merit(instance, xn, w)
                if phin <= phi + config.armijo * float(np.sum(g * (xn - x))):
                    break
                s *= config.backtrack
            else:
                break   # no decrease possible at machine precision
            iters += 1
            dx, dg = xn - x, gn - g
            sy = float(np.sum(dx * dg))
            step = float(np.clip(np.sum(dx * dx) / sy, 1e-12, 1e12)) if sy > 0 else min(s * 2, 1e12)
            x, phi, g = xn, phin, gn
            merits.append(phi)
        history.append(merits)
        stages += 1
        if last or iters >= config.max_iters:
            break
        w = max(w * config.barrier_decay, w_final)
    resid = _residual(x, g)
    return x, Diagnostics(iterations=iters, stages=stages, stationarity=resid,
                          barrier_weight=w, merit_history=history), resid <= config.stationarity_tol


def _random_start(rng, presolve: np.ndarray, instance: Instance) -> np.ndarray:
    n, m = presolve.shape
    target = 1.0 - 0.5 * (1.0 - float(np.max(((instance.rates @ presolve) / instance.capacity)
                                             / instance.rho_cap)))
    raw = rng.dirichlet(np.ones(m), size=n)
    theta = 1.0
    while theta > 1e-6:
        x = theta * raw + (1 - theta) * presolve
        if np.max((instance.rates @ x) / instance.capacity / instance.rho_cap) <= target:
            return x
        theta *= 0.5
    return presolve.copy()


def _finish(instance: Instance, x: np.ndarray, diag: Diagnostics) -> SolveResult:
    x = as_allocation(x, instance.shape)
    snap = latency_snapshot(instance, x)
    offsets = offset_matrix(instance, x, snap)
    base = breakeven_base_price(instance, x, snap, offsets)
    prices = PriceMatrix(tau=offsets + base.value, base=base.value)
    diag.simplex_residual = float(np.max(np.abs(x.sum(axis=1) - 1.0)))
    diag.max_rho = float(np.max(snap.rho))
    diag.rho_violation = max(0.0, diag.max_rho - instance.rho_cap)
    objective = float(np.sum(snap.ell * x) / len(instance.orders))
    return SolveResult(x=x, objective=objective, snapshot=snap, base_price=base,
                       prices=prices, diagnostics=diag)


def optimize_allocation(instance: Instance, config: SolverConfig | None = None) -> SolveResult:
    """Find a locally optimal feasible allocation and price it.

    Raises :class:`InfeasibleInstanceError` when no allocation respects the
    cap and :class:`ConvergenceError` when the stationarity target is not met
    within ``max_iters`` (the best iterate is attached).
    """
    config = config or SolverConfig()
    cert = feasibility_presolve(instance)
    if not cert.feasible:
        raise InfeasibleInstanceError(cert)
    n, m = instance.shape
    if m == 1:
        return _finish(instance, np.ones((n, 1)), Diagnostics())
    if cert.max_load >= 1.0:
        # cap is met with equality everywhere: no interior to search
        log.warning("no strictly feasible allocation; returning the presolve point")
        return _finish(instance, cert.x, Diagnostics())

    x0 = equal_split(instance)
    rho0 = (instance.rates @ x0) / instance.capacity
    if np.any(rho0 >= instance.rho_cap * (1 - 1e-9)):
        x0 = cert.x
    starts = [x0]
    rng = np.random.default_rng(config.seed)
    for _ in range(config.multistart - 1):
        starts.append(_random_start(rng, cert.x, instance))

    best = None
    best_ok = False
    for k, start in enumerate(starts):
        x, diag, ok = _run_barrier(instance, start, config)
        diag.start = k
        result = _finish(instance, x, diag)
        log.debug("start %d: L = %.6f h, residual %.3g, %d iterations",
                  k, result.objective, diag.stationarity, diag.iterations)
        if best is None or (ok, -result.objective) > (best_ok, -best.objective):
            best, best_ok = result, ok
    if best.diagnostics.rho_violation > config.feasibility_tol:
        raise ConvergenceError(
            f"utilization cap exceeded by {best.diagnostics.rho_violation:.3g}", best)
    if not best_ok:
        raise ConvergenceError(
            f"stationarity {best.diagnostics.stationarity:.3g} above "
            f"{config.stationarity_tol:g} after {best.diagnostics.iterations} iterations", best)
    return best
