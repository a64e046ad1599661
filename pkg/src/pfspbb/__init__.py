"""Exact parallel branch-and-bound for the permutation flow-shop problem."""
from .bound import Direction, Subproblem, children_bounds, decompose, lb1, min_min
from .explorer import ExplorerPool, pool_run
from .heuristic import insertion_local_search, neh
from .instance import (
    Instance,
    Schedule,
    brute_force,
    generate_taillard,
    load_instance,
    makespan,
    taillard,
)

__version__ = "0.1.0"

__all__ = [
    "Direction",
    "Subproblem",
    "children_bounds",
    "decompose",
    "lb1",
    "min_min",
    "ExplorerPool",
    "pool_run",
    "insertion_local_search",
    "neh",
    "Instance",
    "Schedule",
    "brute_force",
    "generate_taillard",
    "load_instance",
    "makespan",
    "taillard",
    "FlowShopSolver",
]


def __getattr__(name):
    # the estimator pulls in scikit-learn, so load it only on request
    if name == "FlowShopSolver":
        from .estimator import FlowShopSolver

        return FlowShopSolver
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
