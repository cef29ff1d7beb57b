"""Optimal multi-modal delivery allocation with closed-form Nash-inducing prices."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    Instance, LatencySnapshot, Modality, Order, PopulationCurve, ValidationError,
    as_allocation, expected_latency, latency_snapshot, pickup_time, total_cost, travel_time,
    utilization,
)
from .pricing import (  # noqa: E402
    PriceMatrix, breakeven_base_price, breakpoints, compute_prices, mode_ordering,
    price_allocation, price_offsets,
)
from .equilibrium import (  # noqa: E402
    EquilibriumVerdict, UserGrid, best_response, canonical_assignment,
    endpoint_inequality_check, is_equilibrium, user_cost,
)
from .queueing import MMcSystem, erlang_c, estimate_completion_rate, mean_waits  # noqa: E402
from .optimizer import (  # noqa: E402
    ConvergenceError, InfeasibleInstanceError, SolveResult, SolverConfig, feasibility_presolve,
    objective_and_gradient, optimize_allocation,
)
from .instance import GeneratorSpec, generate_instance, load_instance, save_instance  # noqa: E402
from .report import emit, summarize  # noqa: E402
