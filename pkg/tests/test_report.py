from pathlib import Path

import numpy as np
import pytest

from modalprice.instance import GeneratorSpec, generate_instance
from modalprice.model import Modality, Order, build_instance, latency_snapshot, total_cost
from modalprice.optimizer import Diagnostics, SolveResult, optimize_allocation
from modalprice.pricing import breakeven_base_price, price_allocation
from modalprice.report import (
    Summary, dump_result, emit, parse_csv, parse_json, result_from_dict, result_to_dict, summarize,
)

from conftest import DEFAULT_CURVE, feasible_point, random_instance

GOLDEN = Path(__file__).parent / "golden" / "seeded_report.txt"


def _result_at(inst, x):
    """SolveResult for a given allocation, priced at break-even."""
    snap = latency_snapshot(inst, x)
    prices = price_allocation(inst, x, snap)
    base = breakeven_base_price(inst, x, snap)
    objective = float(np.sum(snap.ell * x) / len(inst.orders))
    return SolveResult(x=np.asarray(x, float), objective=objective, snapshot=snap,
                       base_price=base, prices=prices, diagnostics=Diagnostics())


def _car_drone(n=20):
    orders = [Order(f"o{i}", (0, 0), (100.0 * (i + 1), 0), rate=0.42) for i in range(n)]
    mods = [Modality("car", 19.2, 10, 1 / 6, 3.0, cost_per_order=10.0),
            Modality("drone", 38.4, 4, 1 / 6, 3.0, cost_per_order=5.0)]
    return build_instance(orders, mods, DEFAULT_CURVE)


class TestSummarize:
    def test_car_only(self):
        inst = _car_drone()
        x = np.tile([1.0, 0.0], (20, 1))
        s = summarize(inst, _result_at(inst, x))
        car, drone = s.modalities
        assert car.order_share == pytest.approx(100.0)
        assert car.mean_price == pytest.approx(10.0, abs=1e-12)
        assert car.cost_per_hour == pytest.approx(10 * 0.42 * 20)
        # unused modality is an all-zero column
        assert (drone.order_share, drone.cost_per_hour, drone.mean_latency, drone.mean_price,
                drone.mean_distance) == (0, 0, 0, 0, 0)

    def test_single_fleet_base_price(self):
        full = _car_drone()
        inst = build_instance(full.orders, full.modalities[:1], DEFAULT_CURVE)
        s = summarize(inst, _result_at(inst, np.ones((20, 1))))
        assert s.base_price == pytest.approx(10.0, abs=1e-12)
        assert s.total.cost_per_hour == pytest.approx(10 * 0.42 * 20)

    def test_totals_recomputed(self, rng):
        inst = random_instance(rng, 6, 3)
        x = feasible_point(rng, inst)
        res = _result_at(inst, x)
        s = summarize(inst, res)
        r = inst.rates
        ell = latency_snapshot(inst, x).ell
        num_l = num_p = num_d = den = 0.0
        for i, o in enumerate(inst.orders):
            d = np.hypot(o.dropoff[0] - o.pickup[0], o.dropoff[1] - o.pickup[1]) / 1000
            for j in range(3):
                w = r[i] * x[i, j]
                num_l += w * ell[i, j] * 60
                num_p += w * res.prices.tau[i, j]
                num_d += w * d
                den += w
        assert s.total.mean_latency == pytest.approx(num_l / den, rel=1e-12)
        assert s.total.mean_price == pytest.approx(num_p / den, rel=1e-12)
        assert s.total.mean_distance == pytest.approx(num_d / den, rel=1e-12)

    def test_accounting_identities(self, rng):
        inst = random_instance(rng, 8, 3)
        res = optimize_allocation(inst)
        s = summarize(inst, res)
        assert sum(m.order_share for m in s.modalities) == pytest.approx(100.0, abs=0.1)
        cost = total_cost(inst, res.x)
        assert sum(m.cost_per_hour for m in s.modalities) == pytest.approx(cost, abs=1e-6)
        assert s.total.mean_price * inst.rates.sum() == pytest.approx(cost, rel=1e-6)

    def test_subsidy_warning(self):
        orders = [Order("o", (0, 0), (0, 0), rate=1.0)]
        mods = [Modality("fast", 10, 100, 1e-12, 1.0), Modality("slow", 10, 100, 1e-12, 1.0)]
        inst = build_instance(orders, mods, DEFAULT_CURVE, service_time=[[0.1, 1.0]],
                              cost=[[1.0, 1.0]])
        s = summarize(inst, _result_at(inst, np.array([[0.5, 0.5]])))
        assert s.subsidy
        assert "WARNING" in emit(s, "table")


class TestEmit:
    def test_empty_is_header_only(self):
        empty = Summary((), None, None)
        assert emit(empty, "csv").strip().splitlines() == [
            "modality,order_share,cost_per_hour,mean_latency,mean_price,mean_distance"]
        assert len(emit(empty, "table").splitlines()) == 1
        assert parse_json(emit(empty, "json")).modalities == ()

    def test_table_lines(self):
        inst = _car_drone()
        s = summarize(inst, _result_at(inst, np.tile([0.5, 0.5], (20, 1))))
        text = emit(s, "table")
        assert f"Minimum order price is ${s.base_price:.2f}" in text
        assert text.splitlines()[0].split() == ["car", "drone", "Total"]
        assert len(text.splitlines()) == 7

    def test_round_trip(self, rng):
        inst = random_instance(rng, 5, 3)
        s = summarize(inst, _result_at(inst, feasible_point(rng, inst)))
        again = parse_json(emit(parse_csv(emit(parse_json(emit(s, "json")), "csv")), "json"))
        assert [m.name for m in again.modalities] == [m.name for m in s.modalities]
        for a, b in zip(list(again.modalities) + [again.total], list(s.modalities) + [s.total]):
            for f in ("order_share", "cost_per_hour", "mean_latency", "mean_price",
                      "mean_distance"):
                assert getattr(a, f) == pytest.approx(getattr(b, f), abs=1e-9)
        assert again.base_price == pytest.approx(s.base_price, abs=1e-9)

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            emit(Summary((), None, None), "xml")

    def test_golden(self):
        spec = GeneratorSpec.with_fleet(12, 3, 8, seed=5)
        inst = generate_instance(spec, 40)
        text = emit(summarize(inst, optimize_allocation(inst)), "table")
        assert text == GOLDEN.read_text()


class TestResultFile:
    def test_round_trip(self, rng):
        inst = random_instance(rng, 4, 2)
        res = optimize_allocation(inst)
        inst2, res2 = result_from_dict(result_to_dict(inst, res))
        assert inst2 == inst
        np.testing.assert_array_equal(res2.x, res.x)
        np.testing.assert_array_equal(res2.prices.tau, res.prices.tau)
        np.testing.assert_allclose(res2.snapshot.ell, res.snapshot.ell, rtol=1e-15)
        assert res2.diagnostics.iterations == res.diagnostics.iterations
        assert dump_result(inst2, res2) == dump_result(inst, res)
