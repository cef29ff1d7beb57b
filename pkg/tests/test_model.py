import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modalprice.model import (
    Modality, Order, PopulationCurve, ValidationError, as_allocation, build_instance,
    expected_latency, hours_from_minutes, km_from_m, latency_snapshot, m_from_km,
    minutes_from_hours, pickup_time, total_cost, travel_time, utilization,
)

from conftest import DEFAULT_CURVE, random_instance, random_simplex_point


def _single_mode(rates, fleet, mu, k=1 / 6, beta=0.5):
    orders = [Order(f"o{i}", (0, 0), (1000, 0), rate=r) for i, r in enumerate(rates)]
    mod = Modality("m", speed=19.2, fleet_size=fleet, reach_horizon=k, completion_rate=mu)
    return build_instance(orders, [mod], DEFAULT_CURVE, beta=np.full((len(rates), 1), beta))


class TestTravelTime:
    car = Modality("car", speed=19.2, fleet_size=1, reach_horizon=1)
    drone = Modality("drone", speed=38.4, fleet_size=1, reach_horizon=1)

    def test_zero_distance(self):
        assert travel_time(Order("o", (5, 5), (5, 5)), self.car) == 0.0

    def test_car_speed(self):
        assert travel_time(Order("o", (0, 0), (1920, 0)), self.car) == pytest.approx(0.1)

    def test_drone_speed(self):
        assert travel_time(Order("o", (0, 0), (0, 1920)), self.drone) == pytest.approx(0.05)


class TestUtilization:
    def test_zero_flow(self):
        inst = random_instance(np.random.default_rng(0), 3, 2)
        x = np.tile([1.0, 0.0], (3, 1))
        assert utilization(inst, x, 1) == 0.0

    def test_ninety_percent(self):
        inst = _single_mode([15.0, 30.0], fleet=50, mu=1.0)
        assert utilization(inst, np.ones((2, 1)), 0) == pytest.approx(0.9)

    def test_thirty_percent(self):
        inst = _single_mode([21.0], fleet=35, mu=2.0)
        assert utilization(inst, np.ones((1, 1)), 0) == pytest.approx(0.3)


class TestPickupTime:
    def test_busy_fleet(self):
        inst = _single_mode([45.0], fleet=50, mu=1.0, beta=0.5)
        assert pickup_time(inst, np.ones((1, 1)), 0, 0) == pytest.approx((1 / 6) / 3.5)

    def test_saturated_clamps_to_horizon(self):
        inst = _single_mode([50.0], fleet=50, mu=1.0)
        assert pickup_time(inst, np.ones((1, 1)), 0, 0) == pytest.approx(1 / 6)
        over = _single_mode([80.0], fleet=50, mu=1.0)
        assert pickup_time(over, np.ones((1, 1)), 0, 0) == pytest.approx(1 / 6)

    def test_min_of_uniforms(self):
        # 9 idle couriers uniform on [0, k]: nearest arrives at k/10 on average
        inst = _single_mode([1e-9], fleet=9, mu=1.0, beta=1.0, k=1.0)
        assert pickup_time(inst, np.ones((1, 1)), 0, 0) == pytest.approx(0.1, rel=1e-9)


def spreadsheet_latency(inst, x):
    """Cell-by-cell re-evaluation with plain Python arithmetic."""
    n, m = inst.shape
    out = [[0.0] * m for _ in range(n)]
    for j, mod in enumerate(inst.modalities):
        flow = sum(inst.orders[i].rate * x[i][j] for i in range(n))
        rho = flow / (mod.fleet_size * mod.completion_rate)
        for i, o in enumerate(inst.orders):
            dist = math.sqrt((o.dropoff[0] - o.pickup[0]) ** 2 + (o.dropoff[1] - o.pickup[1]) ** 2)
            travel = dist / 1000 / mod.speed
            idle = max(1 - rho, 0.0)
            pick = mod.reach_horizon / (1 + inst.beta[i][j] * mod.fleet_size * idle)
            out[i][j] = inst.service_time[i][j] + travel + pick
    return out


class TestLatencySnapshot:
    def test_component_sum(self):
        orders = [Order("o", (0, 0), (1920, 0), rate=45.0)]
        mod = Modality("car", speed=19.2, fleet_size=50, reach_horizon=1 / 6, completion_rate=1.0)
        inst = build_instance(orders, [mod], DEFAULT_CURVE, service_time=[[0.05]], beta=[[0.5]])
        snap = latency_snapshot(inst, [[1.0]])
        assert snap.ell[0, 0] == pytest.approx(0.05 + 0.1 + (1 / 6) / 3.5)
        assert snap.ell[0, 0] == pytest.approx(0.197619, abs=1e-6)

    def test_all_zero_components(self):
        orders = [Order("o", (0, 0), (0, 0), rate=1.0)]
        mod = Modality("m", speed=10, fleet_size=1, reach_horizon=1e-300, completion_rate=10.0)
        inst = build_instance(orders, [mod], DEFAULT_CURVE)
        assert latency_snapshot(inst, [[1.0]]).ell[0, 0] == pytest.approx(0.0, abs=1e-299)

    def test_matches_spreadsheet(self, two_mode_instance):
        x = [[0.3, 0.7], [0.6, 0.4]]
        snap = latency_snapshot(two_mode_instance, x)
        np.testing.assert_allclose(snap.ell, spreadsheet_latency(two_mode_instance, x), rtol=1e-13)

    def test_decomposition_exact(self, rng):
        inst = random_instance(rng, 4, 3)
        snap = latency_snapshot(inst, random_simplex_point(rng, inst.shape))
        assert np.array_equal(snap.ell - (snap.service + snap.travel + snap.pickup),
                              np.zeros(inst.shape))
        assert np.all(snap.ell >= 0) and np.all(snap.rho >= 0)


class TestCostAndObjective:
    def test_table_one_cost(self):
        orders = [Order(f"o{i}", (0, 0), (100, 0), rate=0.42) for i in range(505)]
        car = Modality("car", speed=19.2, fleet_size=100, reach_horizon=1 / 6,
                       completion_rate=3.0, cost_per_order=10.0)
        inst = build_instance(orders, [car], DEFAULT_CURVE)
        assert total_cost(inst, np.ones((505, 1))) == pytest.approx(2121.0, abs=1e-9)

    def test_zero_rates_limit(self):
        inst = _single_mode([1e-300], fleet=1, mu=1.0)
        assert total_cost(inst, np.ones((1, 1))) == pytest.approx(0.0, abs=1e-290)

    def test_split_cost(self):
        orders = [Order("o", (0, 0), (0, 0), rate=1.0)]
        mods = [Modality("a", 10, 1, 1, 1.0, cost_per_order=10.0),
                Modality("b", 10, 1, 1, 1.0, cost_per_order=5.0)]
        inst = build_instance(orders, mods, DEFAULT_CURVE)
        assert total_cost(inst, [[0.5, 0.5]]) == pytest.approx(7.5)

    def test_single_cell_objective(self):
        orders = [Order("o", (0, 0), (0, 0), rate=1.0)]
        mod = Modality("m", 10, 1, reach_horizon=1e-12, completion_rate=10.0)
        inst = build_instance(orders, [mod], DEFAULT_CURVE, service_time=[[0.3583]])
        assert expected_latency(inst, [[1.0]]) == pytest.approx(0.3583)

    def test_brute_force_objective(self, rng):
        inst = random_instance(rng, 5, 3)
        x = random_simplex_point(rng, inst.shape)
        ell = spreadsheet_latency(inst, x.tolist())
        brute = 0.0
        for i in range(5):
            for j in range(3):
                brute += ell[i][j] * x[i, j]
        assert expected_latency(inst, x) == pytest.approx(brute / 5, rel=1e-13)


class TestAllocationValidation:
    def test_clips_tiny_excursions(self):
        x = as_allocation([[1 + 5e-13, -5e-13]])
        assert x.min() == 0.0 and x.max() == 1.0

    @pytest.mark.parametrize("bad", [[[0.5, 0.6]], [[1.2, -0.2]], [[0.5, 0.5], [1.0, 1e-6]]])
    def test_rejects(self, bad):
        with pytest.raises(ValidationError):
            as_allocation(bad)

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError, match="shape"):
            as_allocation([[1.0, 0.0]], shape=(2, 2))


class TestDomainValidation:
    def test_rate_must_be_positive(self):
        with pytest.raises(ValidationError):
            Order("o", (0, 0), (1, 1), rate=0.0)

    def test_population_monotone(self):
        with pytest.raises(ValidationError):
            PopulationCurve(10.0, 100.0)
        with pytest.raises(ValidationError):
            PopulationCurve(10.0, 0.0)

    @pytest.mark.parametrize("kw", [dict(speed=0), dict(fleet_size=0), dict(reach_horizon=0),
                                    dict(fleet_size=2.5), dict(completion_rate=-1.0)])
    def test_modality_invariants(self, kw):
        args = dict(id="m", speed=1.0, fleet_size=1, reach_horizon=1.0)
        args.update(kw)
        with pytest.raises(ValidationError):
            Modality(**args)

    def test_beta_range(self):
        orders = [Order("o", (0, 0), (1, 1))]
        mod = Modality("m", 1.0, 1, 1.0, 1.0)
        with pytest.raises(ValidationError, match=r"beta.*\[0\]\[0\]"):
            build_instance(orders, [mod], DEFAULT_CURVE, beta=[[0.0]])

    def test_rho_cap_range(self):
        orders = [Order("o", (0, 0), (1, 1))]
        mod = Modality("m", 1.0, 1, 1.0, 1.0)
        with pytest.raises(ValidationError):
            build_instance(orders, [mod], DEFAULT_CURVE, rho_cap=1.0)


def test_unit_round_trips():
    for km in (0.0, 0.125, 2.5, 1920 / 1024):
        assert km_from_m(m_from_km(km)) == km
    for minutes in (0.0, 7.5, 30.0, 90.0):
        assert minutes_from_hours(hours_from_minutes(minutes)) == minutes


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), j=st.integers(0, 2), bump=st.floats(0.01, 0.5))
def test_congestion_raises_pickup(seed, j, bump):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 4, 3)
    x = random_simplex_point(rng, inst.shape)
    # move mass from other modes onto mode j
    y = x.copy()
    y[:, j] += bump * (1 - x[:, j])
    others = [k for k in range(3) if k != j]
    y[:, others] *= (1 - y[:, j:j + 1]) / x[:, others].sum(axis=1, keepdims=True)
    a, b = latency_snapshot(inst, x), latency_snapshot(inst, y)
    assert b.rho[j] > a.rho[j]
    if b.rho[j] < 1:
        assert np.all(b.pickup[:, j] >= a.pickup[:, j])


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), t=st.floats(0, 1))
def test_cost_is_affine_on_simplex(seed, t):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 3, 3)
    x1, x2 = random_simplex_point(rng, inst.shape), random_simplex_point(rng, inst.shape)
    mix = t * x1 + (1 - t) * x2
    expect = t * total_cost(inst, x1) + (1 - t) * total_cost(inst, x2)
    assert total_cost(inst, mix) == pytest.approx(expect, rel=1e-12, abs=1e-12)
