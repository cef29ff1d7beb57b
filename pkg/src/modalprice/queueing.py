"""M/M/c (Erlang C) helpers used to size the utilization cap."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MMcSystem:
    servers: int
    arrival_rate: float   # lambda, per hour
    service_rate: float   # mu per server, per hour

    def __post_init__(self):
        if int(self.servers) != self.servers or self.servers < 1:
            raise ValueError("servers must be a positive integer")
        if not self.arrival_rate > 0 or not self.service_rate > 0:
            raise ValueError("arrival and service rates must be positive")

    @classmethod
    def from_utilization(cls, servers: int, arrival_rate: float, rho: float) -> "MMcSystem":
        """Build a system whose per-server rate gives the requested utilization."""
        if not 0 < rho:
            raise ValueError("rho must be positive")
        return cls(servers, arrival_rate, arrival_rate / (servers * rho))

    @property
    def offered_load(self) -> float:
        return self.arrival_rate / self.service_rate

    @property
    def rho(self) -> float:
        return self.arrival_rate / (self.servers * self.service_rate)


def erlang_c(system: MMcSystem) -> float:
    """Probability that an arrival has to wait.

    Uses the Erlang B recurrence B(n) = a B(n-1) / (n + a B(n-1)) and then
    C = B / (1 - rho (1 - B)), so no factorials or large powers appear.
    """
    rho = system.rho
    if rho >= 1:
        raise ValueError(f"unstable queue: rho = {rho:.6g} >= 1")
    a = system.offered_load
    b = 1.0
    for n in range(1, system.servers + 1):
        b = a * b / (n + a * b)
    return b / (1.0 - rho * (1.0 - b))


def mean_waits(system: MMcSystem) -> tuple[float, float]:
    """Return (W_q, W): mean hours in queue and in system."""
    p_wait = erlang_c(system)
    wq = p_wait / (system.servers * system.service_rate - system.arrival_rate)
    return wq, wq + 1.0 / system.service_rate


def estimate_completion_rate(instance, j: int, rho: float = 0.0) -> float:
    """Per-courier completion rate as the inverse of mean delivery time.

    Latency is evaluated for an equal split of load with the pickup term at a
    fixed utilization (zero by default), which breaks the rate <-> utilization
    cycle in one shot.
    """
    reach = instance.reach[j]
    pickup = reach / (1.0 + instance.beta[:, j] * instance.fleet[j] * max(1.0 - rho, 0.0))
    ell = instance.service_time[:, j] + instance.travel[:, j] + pickup
    mean = float(np.mean(ell))
    if mean <= 0:
        raise ValueError(f"modality {j}: mean latency is zero, cannot estimate completion rate")
    return 1.0 / mean
