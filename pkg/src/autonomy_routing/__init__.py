"""Wardrop equilibria of mixed regular/autonomous traffic on BPR networks."""

from .analysis import (
    BoundReport, PointResult, SweepResult, autonomy_bound_check, baseline_delay, lambda_class_bound,
    lambda_of_class, paradox_flags, price_of_autonomy_bound, solve_point, sweep_alpha,
)
from .assign import (
    AssignmentResult, SingleClassGame, baseline_game, reduce_homogeneous, shortest_path, solve_single_class,
)
from .delay import (
    FlowVector, link_capacity, link_delay, link_flows, od_delays, path_delay, path_delays, social_delay,
)
from .errors import (
    DomainError, HeterogeneityError, InfeasibleFlowError, LPFailure, NetworkInputError, PathOverflowError,
    RoutingError, SupportLimitError, UnsupportedExponentError,
)
from .examples import load_example
from .mixed_eq import (
    EquilibriumSet, HomogeneousSolution, VerificationReport, equilibrium_set, solve_mixed_homogeneous,
    verify_equilibrium,
)
from .network import (
    DemandSpec, Link, LinkParams, Network, PathSet, dump_network, enumerate_paths, load_network,
    network_to_dict, read_network,
)

__version__ = "0.1.0"
