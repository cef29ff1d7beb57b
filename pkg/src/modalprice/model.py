"""Domain types and the click-to-door latency / operating cost formulas.

Every quantity is kept in one unit system: hours for time, dollars for
money, kilometres for distance.  Coordinates are planar metres and are
converted on the way in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

SIMPLEX_TOL = 1e-9
CLIP_TOL = 1e-12


class ValidationError(ValueError):
    """Raised when an instance or allocation violates a domain invariant."""


# ---------------------------------------------------------------------------
# unit converters

def km_from_m(meters: float) -> float:
    return meters / 1000.0


def m_from_km(km: float) -> float:
    return km * 1000.0


def minutes_from_hours(hours: float) -> float:
    return hours * 60.0


def hours_from_minutes(minutes: float) -> float:
    return minutes / 60.0


def hours_from_seconds(seconds: float) -> float:
    return seconds / 3600.0


def seconds_from_hours(hours: float) -> float:
    return hours * 3600.0


# ---------------------------------------------------------------------------
# domain types

@dataclass(frozen=True)
class Order:
    """A delivery request from a pickup point to a dropoff point.

    Coordinates are planar metres; ``rate`` is the demand in orders/hour.
    """

    id: str
    pickup: tuple[float, float]
    dropoff: tuple[float, float]
    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValidationError(f"order {self.id!r}: rate must be > 0, got {self.rate}")
        for name in ("pickup", "dropoff"):
            pt = getattr(self, name)
            if len(pt) != 2 or not all(math.isfinite(c) for c in pt):
                raise ValidationError(f"order {self.id!r}: {name} must be a finite 2D point")
            object.__setattr__(self, name, (float(pt[0]), float(pt[1])))

    @property
    def distance_km(self) -> float:
        dx = self.dropoff[0] - self.pickup[0]
        dy = self.dropoff[1] - self.pickup[1]
        return km_from_m(math.hypot(dx, dy))


@dataclass(frozen=True)
class Modality:
    """A courier fleet type.

    ``completion_rate`` is orders/hour per courier; ``None`` means it is
    estimated from the instance (see :func:`modalprice.queueing.estimate_completion_rate`).
    """

    id: str
    speed: float                      # km/h
    fleet_size: int
    reach_horizon: float              # k_j, hours
    completion_rate: float | None = None
    cost_per_order: float = 0.0
    service_scale: float = 1.0

    def __post_init__(self):
        if not self.speed > 0:
            raise ValidationError(f"modality {self.id!r}: speed must be > 0")
        if int(self.fleet_size) != self.fleet_size or self.fleet_size < 1:
            raise ValidationError(f"modality {self.id!r}: fleet_size must be a positive integer")
        if not self.reach_horizon > 0:
            raise ValidationError(f"modality {self.id!r}: reach_horizon must be > 0")
        if self.completion_rate is not None and not self.completion_rate > 0:
            raise ValidationError(f"modality {self.id!r}: completion_rate must be > 0")
        if self.cost_per_order < 0:
            raise ValidationError(f"modality {self.id!r}: cost_per_order must be >= 0")
        if self.service_scale < 0:
            raise ValidationError(f"modality {self.id!r}: service_scale must be >= 0")
        object.__setattr__(self, "fleet_size", int(self.fleet_size))


@dataclass(frozen=True)
class PopulationCurve:
    """Linear value-of-time curve v(a) = v0 + (v1 - v0) a, in dollars/hour.

    Users near a = 0 value their time most.  The price sensitivity used in
    the user cost is the reciprocal 1 / v(a), which is non-decreasing in a.
    """

    v0: float
    v1: float
    shape: str = "linear"

    def __post_init__(self):
        if self.shape != "linear":
            raise ValidationError(f"unsupported population shape {self.shape!r}")
        if not (self.v0 >= self.v1 > 0):
            raise ValidationError(f"population needs v0 >= v1 > 0, got v0={self.v0}, v1={self.v1}")

    def value_of_time(self, a):
        """v(a) in $/h; accepts scalars or arrays."""
        v = self.v0 + (self.v1 - self.v0) * np.asarray(a, dtype=float)
        return v if v.ndim else float(v)

    def sensitivity(self, a):
        """The money/time trade-off 1 / v(a), in hours per dollar."""
        return 1.0 / self.value_of_time(a)


@dataclass(frozen=True, eq=False)
class Instance:
    """Full problem statement: orders, fleets, population and per-cell data.

    Matrices are ``len(orders) x len(modalities)`` float arrays.
    ``population`` is either one shared curve or one curve per order.
    """

    orders: tuple[Order, ...]
    modalities: tuple[Modality, ...]
    population: PopulationCurve | tuple[PopulationCurve, ...]
    service_time: np.ndarray
    beta: np.ndarray
    cost: np.ndarray
    rho_cap: float = 0.9

    def __post_init__(self):
        object.__setattr__(self, "orders", tuple(self.orders))
        object.__setattr__(self, "modalities", tuple(self.modalities))
        if not isinstance(self.population, PopulationCurve):
            object.__setattr__(self, "population", tuple(self.population))
        if not self.orders:
            raise ValidationError("instance needs at least one order")
        if not self.modalities:
            raise ValidationError("instance needs at least one modality")
        shape = (len(self.orders), len(self.modalities))
        for name in ("service_time", "beta", "cost"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValidationError(f"matrix {name!r} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"matrix {name!r} has non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        _check_cells("service_time", self.service_time, self.service_time >= 0, ">= 0")
        _check_cells("cost", self.cost, self.cost >= 0, ">= 0")
        _check_cells("beta", self.beta, (self.beta > 0) & (self.beta <= 1), "in (0, 1]")
        if not 0 < self.rho_cap < 1:
            raise ValidationError(f"rho_cap must be in (0, 1), got {self.rho_cap}")
        if isinstance(self.population, tuple) and len(self.population) != len(self.orders):
            raise ValidationError("per-order population list must match the number of orders")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.orders), len(self.modalities)

    def curve(self, i: int) -> PopulationCurve:
        if isinstance(self.population, PopulationCurve):
            return self.population
        return self.population[i]

    @cached_property
    def rates(self) -> np.ndarray:
        return _frozen(np.array([o.rate for o in self.orders], dtype=float))

    @cached_property
    def distance_km(self) -> np.ndarray:
        return _frozen(np.array([o.distance_km for o in self.orders], dtype=float))

    @cached_property
    def speed(self) -> np.ndarray:
        return _frozen(np.array([m.speed for m in self.modalities], dtype=float))

    @cached_property
    def fleet(self) -> np.ndarray:
        return _frozen(np.array([m.fleet_size for m in self.modalities], dtype=float))

    @cached_property
    def reach(self) -> np.ndarray:
        return _frozen(np.array([m.reach_horizon for m in self.modalities], dtype=float))

    @cached_property
    def travel(self) -> np.ndarray:
        """Travel-time matrix t_{i,j} in hours."""
        return _frozen(self.distance_km[:, None] / self.speed[None, :])

    @cached_property
    def mu(self) -> np.ndarray:
        """Per-courier completion rates, estimating any that were left unset."""
        from .queueing import estimate_completion_rate

        out = np.empty(len(self.modalities))
        for j, m in enumerate(self.modalities):
            out[j] = m.completion_rate if m.completion_rate is not None \
                else estimate_completion_rate(self, j)
        return _frozen(out)

    @cached_property
    def capacity(self) -> np.ndarray:
        """Service capacity N_j * mu_j in orders/hour."""
        cap = self.fleet * self.mu
        if np.any(cap <= 0):
            raise ValidationError("every modality needs positive capacity N_j * mu_j")
        return _frozen(cap)

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (self.orders == other.orders
                and self.modalities == other.modalities
                and self.population == other.population
                and self.rho_cap == other.rho_cap
                and all(np.array_equal(getattr(self, n), getattr(other, n))
                        for n in ("service_time", "beta", "cost")))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class LatencySnapshot:
    """Latencies l_{i,j}(x) in hours and utilizations at a fixed allocation."""

    ell: np.ndarray
    rho: np.ndarray
    service: np.ndarray | None = None
    travel: np.ndarray | None = None
    pickup: np.ndarray | None = None


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _check_cells(name, arr, ok, what):
    bad = np.argwhere(~ok)
    if bad.size:
        i, j = (int(v) for v in bad[0])
        raise ValidationError(f"matrix {name!r} cell [{i}][{j}] = {arr[i, j]!r} must be {what}")


# ---------------------------------------------------------------------------
# allocations

def as_allocation(x, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Validate a row-stochastic allocation and return a clipped float copy.

    Entries may stray from [0, 1] by at most 1e-12 (then they are clipped);
    each row must sum to one within 1e-9.
    """
    x = np.array(x, dtype=float)
    if x.ndim != 2:
        raise ValidationError(f"allocation must be a matrix, got ndim={x.ndim}")
    if shape is not None and x.shape != tuple(shape):
        raise ValidationError(f"allocation has shape {x.shape}, expected {tuple(shape)}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("allocation has non-finite entries")
    if np.any(x < -CLIP_TOL) or np.any(x > 1 + CLIP_TOL):
        i, j = (int(v) for v in np.argwhere((x < -CLIP_TOL) | (x > 1 + CLIP_TOL))[0])
        raise ValidationError(f"allocation cell [{i}][{j}] = {x[i, j]!r} outside [0, 1]")
    x = np.clip(x, 0.0, 1.0)
    err = np.abs(x.sum(axis=1) - 1.0)
    if np.any(err > SIMPLEX_TOL):
        i = int(np.argmax(err))
        raise ValidationError(f"allocation row {i} sums to {x[i].sum()!r}, expected 1")
    return x


def equal_split(instance: Instance) -> np.ndarray:
    n, m = instance.shape
    return np.full((n, m), 1.0 / m)


# ---------------------------------------------------------------------------
# latency and cost

def travel_time(order: Order, modality: Modality) -> float:
    """Straight-line pickup to dropoff time in hours."""
    return order.distance_km / modality.speed


def utilization_vector(instance: Instance, x: np.ndarray) -> np.ndarray:
    """rho_j = sum_i r_i x_{i,j} / (N_j mu_j) for every modality."""
    flow = instance.rates @ x
    return flow / instance.capacity


def utilization(instance: Instance, x: np.ndarray, j: int) -> float:
    return float(utilization_vector(instance, x)[j])


def pickup_from_rho(reach, beta, fleet, rho):
    """Expected time for the nearest available courier to reach the pickup.

    Availability (1 - rho) is clamped at zero so that a saturated fleet
    yields the full horizon k_j.
    """
    avail = np.maximum(1.0 - np.asarray(rho, dtype=float), 0.0)
    return reach / (1.0 + beta * fleet * avail)


def pickup_time(instance: Instance, x: np.ndarray, i: int, j: int) -> float:
    rho = utilization(instance, x, j)
    return float(pickup_from_rho(instance.reach[j], instance.beta[i, j], instance.fleet[j], rho))


def latency_snapshot(instance: Instance, x) -> LatencySnapshot:
    x = as_allocation(x, instance.shape)
    rho = utilization_vector(instance, x)
    pickup = pickup_from_rho(instance.reach[None, :], instance.beta,
                             instance.fleet[None, :], rho[None, :])
    service = np.array(instance.service_time)
    travel = np.array(instance.travel)
    ell = service + travel + pickup
    return LatencySnapshot(ell=ell, rho=rho, service=service, travel=travel, pickup=pickup)


def total_cost(instance: Instance, x) -> float:
    """Operating cost C(x) = sum_ij c_ij r_i x_ij in dollars/hour."""
    x = np.asarray(x, dtype=float)
    return float(np.sum(instance.cost * instance.rates[:, None] * x))


def expected_latency(instance: Instance, x, snapshot: LatencySnapshot | None = None) -> float:
    """Mean over orders of the flow-weighted latency, in hours."""
    x = np.asarray(x, dtype=float)
    if snapshot is None:
        snapshot = latency_snapshot(instance, x)
    return float(np.sum(snapshot.ell * x) / len(instance.orders))


def build_instance(orders: Sequence[Order], modalities: Sequence[Modality],
                   population: PopulationCurve, service_time=None, beta=None,
                   cost=None, rho_cap: float = 0.9) -> Instance:
    """Convenience constructor broadcasting per-modality defaults into matrices."""
    n, m = len(orders), len(modalities)
    if service_time is None:
        service_time = np.zeros((n, m))
    if beta is None:
        beta = np.ones((n, m))
    if cost is None:
        cost = np.tile([md.cost_per_order for md in modalities], (n, 1))
    return Instance(orders=tuple(orders), modalities=tuple(modalities), population=population,
                    service_time=np.asarray(service_time, dtype=float),
                    beta=np.asarray(beta, dtype=float), cost=np.asarray(cost, dtype=float),
                    rho_cap=rho_cap)
