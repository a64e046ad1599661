"""Estimator-style front end: ``FlowShopSolver().fit(p)``."""
from __future__ import annotations

import math
import os

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_positive_int
from .explorer import pool_run
from .heuristic import neh
from .instance import Instance

__all__ = ["FlowShopSolver"]

OPTIMAL = "optimal"
NO_IMPROVEMENT = "no_improvement"
TIME_LIMIT = "time_limit"


class FlowShopSolver(BaseEstimator):
    """Exact makespan minimization for a processing-time matrix.

    ``fit`` takes an ``(n_jobs, n_machines)`` array (or an :class:`Instance`)
    and sets ``schedule_``, ``makespan_``, ``status_`` and ``stats_``.

    Parameters
    ----------
    n_explorers : int or None
        Explorer count; None means twice the CPU count.
    n_procs : int
        Processes the explorers are spread over.
    batch_size : int
        Steps each explorer takes between synchronization points.
    initial_ub : int or None
        Starting upper bound.  Only strictly better schedules are searched for.
    ub_from_heuristic : bool
        Start from the NEH schedule when ``initial_ub`` is not given.
    time_limit : float or None
        Wall-clock budget in seconds.
    """

    def __init__(self, n_explorers=1, n_procs=1, batch_size=1024, initial_ub=None,
                 ub_from_heuristic=True, time_limit=None):
        self.n_explorers = n_explorers
        self.n_procs = n_procs
        self.batch_size = batch_size
        self.initial_ub = initial_ub
        self.ub_from_heuristic = ub_from_heuristic
        self.time_limit = time_limit

    def fit(self, X, y=None):
        inst = X if isinstance(X, Instance) else Instance(np.asarray(X))
        k = self.n_explorers if self.n_explorers is not None else 2 * (os.cpu_count() or 1)
        check_positive_int(k, "n_explorers")
        check_positive_int(self.n_procs, "n_procs")
        check_positive_int(self.batch_size, "batch_size")
        ub, start = math.inf, None
        if self.initial_ub is not None:
            ub = self.initial_ub
        elif self.ub_from_heuristic:
            seed = neh(inst)
            ub, start = seed.cmax, seed.perm
        result = pool_run(inst, k, initial_ub=ub, n_procs=self.n_procs,
                          batch_size=self.batch_size, time_limit=self.time_limit,
                          initial_schedule=start)
        found = result.schedule is not None
        self.schedule_ = result.schedule.perm if found else None
        self.makespan_ = int(result.makespan) if found else None
        if not result.completed:
            self.status_ = TIME_LIMIT
        elif found:
            self.status_ = OPTIMAL
        else:
            self.status_ = NO_IMPROVEMENT
        self.stats_ = result.stats.as_dict()
        self.n_jobs_ = inst.n
        self.n_machines_ = inst.m
        return self
