"""Multi-source traffic allocation under joint access-path and server congestion.

Centralized and price-based distributed solvers for the flow-weighted
end-to-end delay objective, Wardrop-type optimality certificates, a
brute-force oracle for tiny instances and an M/M/1 simulator.
"""
__version__ = "0.1.0"

from .central import (  # noqa: E402
    CentralConfig,
    WardropReport,
    initial_feasible,
    project_row_simplex,
    solve_central,
    wardrop_report,
)
from .dist import (  # noqa: E402
    DistConfig,
    DistResult,
    best_response,
    damped_price_update,
    damped_route_update,
    node_price,
    run_distributed,
)
from .errors import *  # noqa: E402,F401,F403
from .instances import (  # noqa: E402
    load_instance,
    paper_shaped_instance,
    random_instance,
    symmetric_instance,
    write_instance,
)
from .model import (  # noqa: E402
    DelayFunction,
    Instance,
    MM1Delay,
    aggregate_loads,
    check_feasible,
    delay_value,
    gradient,
    inverse_marginal_cost,
    marginal_cost,
    objective,
    objective_composed,
    traffic_class_rates,
)
from .oracle import OracleConfig, brute_force_optimum  # noqa: E402
from .sim import SimConfig, SimReport, ewma, simulate  # noqa: E402
from .trace import Trace  # noqa: E402
