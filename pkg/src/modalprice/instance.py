"""Instance files, CSV adapters and the synthetic scenario generator."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import jsonschema
import numpy as np

from .model import Instance, Modality, Order, PopulationCurve, ValidationError, \
    hours_from_minutes, hours_from_seconds, km_from_m, seconds_from_hours

SCHEMA_VERSION = 1

_NUM = {"type": "number"}
_POINT = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_MATRIX = {"type": "array", "items": {"type": "array", "items": _NUM}}
_CURVE = {
    "type": "object",
    "required": ["v0", "v1"],
    "properties": {"v0": _NUM, "v1": _NUM, "shape": {"const": "linear"}},
    "additionalProperties": False,
}

INSTANCE_SCHEMA = {
    "type": "object",
    "required": ["schema", "orders", "modalities", "population",
                 "service_time_h", "beta", "cost", "config"],
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "orders": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "pickup", "dropoff", "rate"],
                "properties": {"id": {"type": "string"}, "pickup": _POINT,
                               "dropoff": _POINT, "rate": _NUM},
                "additionalProperties": False,
            },
        },
        "modalities": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "speed_kmh", "fleet_size", "reach_horizon_h"],
                "properties": {
                    "id": {"type": "string"},
                    "speed_kmh": _NUM,
                    "fleet_size": {"type": "integer"},
                    "reach_horizon_h": _NUM,
                    "completion_rate": {"oneOf": [_NUM, {"const": "estimate"}]},
                    "cost_per_order": _NUM,
                    "service_scale": _NUM,
                },
                "additionalProperties": False,
            },
        },
        "population": {"oneOf": [_CURVE, {"type": "array", "items": _CURVE}]},
        "service_time_h": _MATRIX,
        "beta": _MATRIX,
        "cost": _MATRIX,
        "config": {
            "type": "object",
            "required": ["rho_cap"],
            "properties": {"rho_cap": _NUM},
        },
    },
}


# ---------------------------------------------------------------------------
# JSON

def _curve_from(d) -> PopulationCurve:
    return PopulationCurve(v0=d["v0"], v1=d["v1"], shape=d.get("shape", "linear"))


def _curve_to(c: PopulationCurve) -> dict:
    return {"v0": c.v0, "v1": c.v1, "shape": c.shape}


def instance_from_dict(doc: dict) -> Instance:
    try:
        jsonschema.validate(doc, INSTANCE_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ValidationError(f"schema error at {where}: {exc.message}") from None
    n, m = len(doc["orders"]), len(doc["modalities"])
    for name in ("service_time_h", "beta", "cost"):
        rows = doc[name]
        if len(rows) != n or any(len(r) != m for r in rows):
            raise ValidationError(f"matrix {name!r} must be {n} x {m} (orders x modalities)")
    orders = [Order(id=o["id"], pickup=tuple(o["pickup"]), dropoff=tuple(o["dropoff"]),
                    rate=o["rate"]) for o in doc["orders"]]
    modalities = []
    for md in doc["modalities"]:
        mu = md.get("completion_rate", "estimate")
        modalities.append(Modality(
            id=md["id"], speed=md["speed_kmh"], fleet_size=md["fleet_size"],
            reach_horizon=md["reach_horizon_h"],
            completion_rate=None if mu == "estimate" else mu,
            cost_per_order=md.get("cost_per_order", 0.0),
            service_scale=md.get("service_scale", 1.0)))
    pop = doc["population"]
    population = _curve_from(pop) if isinstance(pop, dict) else tuple(_curve_from(p) for p in pop)
    return Instance(orders=orders, modalities=modalities, population=population,
                    service_time=np.array(doc["service_time_h"], dtype=float).reshape(n, m),
                    beta=np.array(doc["beta"], dtype=float).reshape(n, m),
                    cost=np.array(doc["cost"], dtype=float).reshape(n, m),
                    rho_cap=doc["config"]["rho_cap"])


def instance_to_dict(instance: Instance) -> dict:
    pop = instance.population
    return {
        "schema": SCHEMA_VERSION,
        "orders": [{"id": o.id, "pickup": list(o.pickup), "dropoff": list(o.dropoff),
                    "rate": o.rate} for o in instance.orders],
        "modalities": [{
            "id": m.id, "speed_kmh": m.speed, "fleet_size": m.fleet_size,
            "reach_horizon_h": m.reach_horizon,
            "completion_rate": "estimate" if m.completion_rate is None else m.completion_rate,
            "cost_per_order": m.cost_per_order, "service_scale": m.service_scale,
        } for m in instance.modalities],
        "population": _curve_to(pop) if isinstance(pop, PopulationCurve)
        else [_curve_to(p) for p in pop],
        "service_time_h": instance.service_time.tolist(),
        "beta": instance.beta.tolist(),
        "cost": instance.cost.tolist(),
        "config": {"rho_cap": instance.rho_cap},
    }


def load_instance(path) -> Instance:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from None
    try:
        return instance_from_dict(doc)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def dumps(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=False) + "\n"


def save_instance(instance: Instance, path) -> None:
    Path(path).write_text(dumps(instance_to_dict(instance)))


# ---------------------------------------------------------------------------
# raw records and couriers

@dataclass(frozen=True)
class RawOrderRecord:
    id: str
    restaurant: tuple[float, float]     # metres
    customer: tuple[float, float]       # metres
    pickup_service: float               # hours, car baseline
    dropoff_service: float              # hours, car baseline
    placement: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        pts = (*self.restaurant, *self.customer)
        if not all(math.isfinite(c) for c in pts):
            raise ValidationError(f"order {self.id!r}: non-finite coordinate")
        if self.pickup_service < 0 or self.dropoff_service < 0:
            raise ValidationError(f"order {self.id!r}: negative service time")


@dataclass(frozen=True)
class CourierSample:
    modality: str
    coordinates: np.ndarray     # (N, 2) metres


@dataclass(frozen=True)
class ModalityProfile:
    id: str
    count: int
    speed: float                # km/h
    service_scale: float
    cost: float                 # dollars per order
    placement: str              # "pool" | "bbox" | "central"
    completion_rate: float | None = None


CAR = ModalityProfile("car", 100, 19.2, 1.0, 10.0, "pool")
DRONE = ModalityProfile("drone", 0, 38.4, 0.2, 5.0, "bbox")
ROBOT = ModalityProfile("robot", 0, 5.76, 0.2, 5.0, "central")
DEFAULT_PROFILES = {p.id: p for p in (CAR, DRONE, ROBOT)}


@dataclass(frozen=True)
class GeneratorSpec:
    seed: int = 0
    modalities: tuple[ModalityProfile, ...] = (CAR, DRONE, ROBOT)
    reach_horizon: float = 1 / 6       # k, hours
    rho_cap: float = 0.9
    v0: float = 100.0
    v1: float = 10.0
    rate: float = 0.42

    def __post_init__(self):
        if any(p.count < 0 for p in self.modalities):
            raise ValidationError("modality counts must be >= 0")
        if not any(p.count >= 1 for p in self.modalities):
            raise ValidationError("at least one modality needs a courier")

    @classmethod
    def with_fleet(cls, cars: int, drones: int, robots: int, **kw) -> "GeneratorSpec":
        mods = (_with_count(CAR, cars), _with_count(DRONE, drones), _with_count(ROBOT, robots))
        return cls(modalities=mods, **kw)


def _with_count(p: ModalityProfile, n: int) -> ModalityProfile:
    return ModalityProfile(p.id, n, p.speed, p.service_scale, p.cost, p.placement,
                           p.completion_rate)


def compute_beta(pickup, couriers, speed: float, k: float) -> float:
    """Share of couriers within travel time ``k`` of the pickup point.

    Floored at 1/(2N) so the share never reaches zero.
    """
    pts = np.asarray(couriers, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValidationError("courier sample is empty")
    d_km = np.hypot(pts[:, 0] - pickup[0], pts[:, 1] - pickup[1]) / 1000.0
    share = float(np.count_nonzero(d_km / speed <= k)) / len(pts)
    return max(share, 1.0 / (2 * len(pts)))


def robot_zone(restaurants: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Centre and side lengths of the downtown rectangle robots start in."""
    return restaurants.mean(axis=0), restaurants.std(axis=0)


def sample_couriers(profile: ModalityProfile, restaurants: np.ndarray, pool: np.ndarray,
                    rng: np.random.Generator) -> CourierSample:
    n = profile.count
    if profile.placement == "pool":
        pts = pool[rng.integers(0, len(pool), size=n)]
    elif profile.placement == "bbox":
        lo, hi = restaurants.min(axis=0), restaurants.max(axis=0)
        pts = lo + rng.random((n, 2)) * (hi - lo)
    elif profile.placement == "central":
        centre, sides = robot_zone(restaurants)
        pts = centre + (rng.random((n, 2)) - 0.5) * sides
    else:
        raise ValidationError(f"unknown placement {profile.placement!r}")
    return CourierSample(profile.id, np.asarray(pts, dtype=float))


def synthetic_orders(n: int, rng: np.random.Generator) -> list[RawOrderRecord]:
    """Meal-delivery-like orders: restaurants clustered in a few hubs, ~2.4 km trips."""
    if n < 1:
        raise ValidationError("need at least one order")
    n_hubs = max(3, n // 40)
    hubs = rng.normal(0.0, 2500.0, size=(n_hubs, 2))
    rest = hubs[rng.integers(0, n_hubs, size=n)] + rng.normal(0.0, 600.0, size=(n, 2))
    dist = rng.gamma(3.0, 2360.0 / 3.0, size=n)
    ang = rng.uniform(0.0, 2 * np.pi, size=n)
    cust = rest + dist[:, None] * np.column_stack((np.cos(ang), np.sin(ang)))
    pick = rng.uniform(3.0, 7.0, size=n)
    drop = rng.uniform(3.0, 7.0, size=n)
    return [RawOrderRecord(id=f"o{i}", restaurant=(float(rest[i, 0]), float(rest[i, 1])),
                           customer=(float(cust[i, 0]), float(cust[i, 1])),
                           pickup_service=hours_from_minutes(float(pick[i])),
                           dropoff_service=hours_from_minutes(float(drop[i])))
            for i in range(n)]


def assemble_instance(raw: Sequence[RawOrderRecord], samples: Sequence[CourierSample],
                      profiles: Sequence[ModalityProfile], spec: GeneratorSpec) -> Instance:
    """Build an Instance from orders, placed couriers and modality profiles."""
    orders = [Order(id=r.id, pickup=r.restaurant, dropoff=r.customer, rate=spec.rate) for r in raw]
    base_service = np.array([r.pickup_service + r.dropoff_service for r in raw])
    modalities, service, beta, cost = [], [], [], []
    for prof, sample in zip(profiles, samples):
        modalities.append(Modality(id=prof.id, speed=prof.speed, fleet_size=len(sample.coordinates),
                                   reach_horizon=spec.reach_horizon,
                                   completion_rate=prof.completion_rate,
                                   cost_per_order=prof.cost, service_scale=prof.service_scale))
        service.append(base_service * prof.service_scale)
        beta.append([compute_beta(o.pickup, sample.coordinates, prof.speed, spec.reach_horizon)
                     for o in orders])
        cost.append(np.full(len(orders), prof.cost))
    inst = Instance(orders=orders, modalities=modalities,
                    population=PopulationCurve(spec.v0, spec.v1),
                    service_time=np.column_stack(service), beta=np.column_stack(beta),
                    cost=np.column_stack(cost), rho_cap=spec.rho_cap)
    return _resolve_rates(inst)


def _resolve_rates(inst: Instance) -> Instance:
    """Freeze estimated completion rates into the modalities."""
    if all(m.completion_rate is not None for m in inst.modalities):
        return inst
    mu = inst.mu
    mods = [Modality(id=m.id, speed=m.speed, fleet_size=m.fleet_size,
                     reach_horizon=m.reach_horizon, completion_rate=float(mu[j]),
                     cost_per_order=m.cost_per_order, service_scale=m.service_scale)
            for j, m in enumerate(inst.modalities)]
    return Instance(orders=inst.orders, modalities=mods, population=inst.population,
                    service_time=inst.service_time, beta=inst.beta, cost=inst.cost,
                    rho_cap=inst.rho_cap)


def generate_instance(spec: GeneratorSpec, raw_orders: Sequence[RawOrderRecord] | int,
                      courier_pool=None) -> Instance:
    """Generate a scenario following the case-study recipe.

    ``raw_orders`` is either a list of records or a count of synthetic orders.
    Car couriers are drawn from ``courier_pool`` (default: every pickup and
    dropoff point); drones uniformly over the restaurants' bounding box;
    robots over a rectangle centred on the restaurants with side lengths
    equal to the per-axis standard deviation.  Zero-count fleets are left out.
    """
    rng = np.random.default_rng(spec.seed)
    raw = synthetic_orders(raw_orders, rng) if isinstance(raw_orders, int) else list(raw_orders)
    restaurants = np.array([r.restaurant for r in raw], dtype=float)
    if courier_pool is None:
        courier_pool = np.vstack((restaurants, np.array([r.customer for r in raw], dtype=float)))
    pool = np.asarray(courier_pool, dtype=float).reshape(-1, 2)
    profiles = [p for p in spec.modalities if p.count > 0]
    samples = [sample_couriers(p, restaurants, pool, rng) for p in profiles]
    return assemble_instance(raw, samples, profiles, spec)


# ---------------------------------------------------------------------------
# CSV adapters

ORDER_COLUMNS = ("id", "pickup_x_m", "pickup_y_m", "dropoff_x_m", "dropoff_y_m",
                 "pickup_service_s", "dropoff_service_s")
COURIER_COLUMNS = ("modality", "x_m", "y_m")


def _read_csv(path, columns) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in columns if c not in (reader.fieldnames or ())]
        if missing:
            raise ValidationError(f"{path}: missing columns {missing}")
        return list(reader)


def read_orders_csv(path) -> list[RawOrderRecord]:
    out = []
    for lineno, row in enumerate(_read_csv(path, ORDER_COLUMNS), start=2):
        try:
            extra = {k: v for k, v in row.items() if k not in ORDER_COLUMNS}
            out.append(RawOrderRecord(
                id=row["id"],
                restaurant=(float(row["pickup_x_m"]), float(row["pickup_y_m"])),
                customer=(float(row["dropoff_x_m"]), float(row["dropoff_y_m"])),
                pickup_service=hours_from_seconds(float(row["pickup_service_s"])),
                dropoff_service=hours_from_seconds(float(row["dropoff_service_s"])),
                placement=extra))
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return out


def read_couriers_csv(path) -> list[CourierSample]:
    groups: dict[str, list[tuple[float, float]]] = {}
    for lineno, row in enumerate(_read_csv(path, COURIER_COLUMNS), start=2):
        try:
            groups.setdefault(row["modality"], []).append((float(row["x_m"]), float(row["y_m"])))
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return [CourierSample(k, np.array(v)) for k, v in groups.items()]


def write_orders_csv(records: Iterable[RawOrderRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ORDER_COLUMNS)
        for r in records:
            w.writerow([r.id, r.restaurant[0], r.restaurant[1], r.customer[0], r.customer[1],
                        seconds_from_hours(r.pickup_service), seconds_from_hours(r.dropoff_service)])


def write_couriers_csv(samples: Iterable[CourierSample], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COURIER_COLUMNS)
        for s in samples:
            for x, y in s.coordinates:
                w.writerow([s.modality, float(x), float(y)])


def convert_csv(orders_csv, couriers_csv, spec: GeneratorSpec | None = None) -> Instance:
    """Build an Instance from meal-delivery order and courier tables.

    Courier rows fix fleet sizes and positions; speeds, costs and service
    scaling come from the matching profile in ``spec`` (by modality id).
    """
    spec = spec or GeneratorSpec()
    raw = read_orders_csv(orders_csv)
    if not raw:
        raise ValidationError(f"{orders_csv}: no orders")
    samples = read_couriers_csv(couriers_csv)
    known = {p.id: p for p in spec.modalities}
    profiles = []
    for s in samples:
        if s.modality not in known:
            raise ValidationError(f"{couriers_csv}: no profile for modality {s.modality!r}")
        profiles.append(_with_count(known[s.modality], len(s.coordinates)))
    if not profiles:
        raise ValidationError(f"{couriers_csv}: no couriers")
    return assemble_instance(raw, samples, profiles, spec)


def mean_distance_km(instance: Instance) -> float:
    return float(np.mean([km_from_m(math.dist(o.pickup, o.dropoff)) for o in instance.orders]))
