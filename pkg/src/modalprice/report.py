"""Per-modality summaries of a solved scenario and their text encodings."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass

import numpy as np

from .instance import dumps, instance_from_dict, instance_to_dict
from .model import Instance, ValidationError, as_allocation, latency_snapshot
from .optimizer import Diagnostics, SolveResult
from .pricing import BasePrice, PriceMatrix

FIELDS = ("order_share", "cost_per_hour", "mean_latency", "mean_price", "mean_distance")
LABELS = {
    "order_share": "Orders (%)",
    "cost_per_hour": "Cost ($ per hour)",
    "mean_latency": "Latency (min)",
    "mean_price": "Price ($)",
    "mean_distance": "Distance (km)",
}


@dataclass(frozen=True)
class ModalitySummary:
    name: str
    order_share: float      # percent of demand-weighted flow
    cost_per_hour: float    # dollars
    mean_latency: float     # minutes
    mean_price: float       # dollars
    mean_distance: float    # km


@dataclass(frozen=True)
class Summary:
    modalities: tuple[ModalitySummary, ...]
    total: ModalitySummary | None
    base_price: float | None

    @property
    def subsidy(self) -> bool:
        return self.base_price is not None and self.base_price < 0


def _weighted(weights, values) -> float:
    w = float(weights.sum())
    return float(np.sum(weights * values) / w) if w > 0 else 0.0


def summarize(instance: Instance, result: SolveResult) -> Summary:
    """Flow-weighted per-modality aggregates plus a demand-weighted total.

    Each cell is weighted by r_i x_{i,j}; modalities without flow report zeros.
    """
    x = result.x
    w = instance.rates[:, None] * x
    demand = float(instance.rates.sum())
    ell_min = result.snapshot.ell * 60.0
    tau = result.prices.tau
    dist = np.broadcast_to(instance.distance_km[:, None], x.shape)
    rows = []
    for j, m in enumerate(instance.modalities):
        wj = w[:, j]
        rows.append(ModalitySummary(
            name=m.id,
            order_share=100.0 * float(wj.sum()) / demand,
            cost_per_hour=float(np.sum(instance.cost[:, j] * wj)),
            mean_latency=_weighted(wj, ell_min[:, j]),
            mean_price=_weighted(wj, tau[:, j]),
            mean_distance=_weighted(wj, dist[:, j]),
        ))
    total = ModalitySummary(
        name="Total",
        order_share=float(sum(r.order_share for r in rows)),
        cost_per_hour=float(np.sum(instance.cost * w)),
        mean_latency=_weighted(w, ell_min),
        mean_price=_weighted(w, tau),
        mean_distance=_weighted(w, dist),
    )
    return Summary(tuple(rows), total, float(result.base_price.value))


# ---------------------------------------------------------------------------
# encodings

def _table(summary: Summary) -> str:
    names = [m.name for m in summary.modalities]
    cols = list(summary.modalities)
    if summary.total is not None and cols:
        names.append("Total")
        cols.append(summary.total)
    width = max([10] + [len(n) + 2 for n in names])
    out = io.StringIO()
    out.write(f"{'':<20}" + "".join(f"{n:>{width}}" for n in names) + "\n")
    if not cols:
        return out.getvalue()
    for f in FIELDS:
        out.write(f"{LABELS[f]:<20}" + "".join(f"{getattr(c, f):>{width}.2f}" for c in cols) + "\n")
    if summary.base_price is not None:
        out.write(f"Minimum order price is ${summary.base_price:.2f}\n")
        if summary.subsidy:
            out.write("WARNING: negative base price; price premiums alone exceed operating cost "
                      "(the slowest option is subsidised)\n")
    return out.getvalue()


CSV_HEADER = ("modality",) + FIELDS
BASE_PREFIX = "# minimum_order_price="


def _csv(summary: Summary) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_HEADER)
    if not summary.modalities:
        return out.getvalue()
    for row in list(summary.modalities) + ([summary.total] if summary.total else []):
        w.writerow([row.name] + [repr(float(getattr(row, f))) for f in FIELDS])
    if summary.base_price is not None:
        out.write(f"{BASE_PREFIX}{summary.base_price!r}\n")
    return out.getvalue()


def _json(summary: Summary) -> str:
    doc = {"modalities": [asdict(m) for m in summary.modalities]}
    if summary.modalities:
        doc["total"] = asdict(summary.total) if summary.total else None
        doc["minimum_order_price"] = summary.base_price
        doc["subsidy"] = summary.subsidy
    return json.dumps(doc, indent=1) + "\n"


def emit(summary: Summary, fmt: str = "table") -> str:
    try:
        return {"table": _table, "csv": _csv, "json": _json}[fmt](summary)
    except KeyError:
        raise ValueError(f"unknown format {fmt!r}; use table, csv or json") from None


def parse_csv(text: str) -> Summary:
    base = None
    lines = []
    for line in text.splitlines():
        if line.startswith(BASE_PREFIX):
            base = float(line[len(BASE_PREFIX):])
        elif line.strip():
            lines.append(line)
    reader = csv.DictReader(lines)
    rows = [ModalitySummary(r["modality"], *(float(r[f]) for f in FIELDS)) for r in reader]
    total = next((r for r in rows if r.name == "Total"), None)
    mods = tuple(r for r in rows if r is not total)
    return Summary(mods, total, base)


def parse_json(text: str) -> Summary:
    doc = json.loads(text)
    mods = tuple(ModalitySummary(**m) for m in doc["modalities"])
    total = ModalitySummary(**doc["total"]) if doc.get("total") else None
    return Summary(mods, total, doc.get("minimum_order_price"))


# ---------------------------------------------------------------------------
# result files

def result_to_dict(instance: Instance, result: SolveResult, config: dict | None = None) -> dict:
    return {
        "schema": 1,
        "objective_h": result.objective,
        "base_price": result.base_price.value,
        "subsidy": result.base_price.subsidy,
        "x": result.x.tolist(),
        "prices": result.prices.tau.tolist(),
        "latency_h": result.snapshot.ell.tolist(),
        "rho": result.snapshot.rho.tolist(),
        "diagnostics": result.diagnostics.as_dict(),
        "config": config or {},
        "instance": instance_to_dict(instance),
    }


def result_from_dict(doc: dict) -> tuple[Instance, SolveResult]:
    """Rebuild the instance and result; latencies are re-evaluated from x."""
    instance = instance_from_dict(doc["instance"])
    x = as_allocation(doc["x"], instance.shape)
    snap = latency_snapshot(instance, x)
    base = float(doc["base_price"])
    prices = PriceMatrix(tau=np.array(doc["prices"], dtype=float), base=base)
    if prices.tau.shape != x.shape:
        raise ValidationError("prices and allocation shapes differ")
    diag = Diagnostics(**doc.get("diagnostics", {}))
    objective = float(np.sum(snap.ell * x) / len(instance.orders))
    return instance, SolveResult(x=x, objective=objective, snapshot=snap,
                                 base_price=BasePrice(base, base < 0), prices=prices,
                                 diagnostics=diag)


def dump_result(instance: Instance, result: SolveResult, config: dict | None = None) -> str:
    return dumps(result_to_dict(instance, result, config))
