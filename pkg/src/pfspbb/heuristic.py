"""Upper bounds: NEH construction and a remove-and-reinsert local search."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from ._validation import check_permutation
from .instance import Instance, Schedule, completion_times

__all__ = ["SearchBudget", "neh", "insertion_local_search", "best_insertion"]


@dataclass(frozen=True)
class SearchBudget:
    """Stop after ``max_iterations`` reinsertion attempts or ``time_limit`` seconds."""

    max_iterations: int | None = None
    time_limit: float | None = None

    def __post_init__(self):
        if self.max_iterations is None and self.time_limit is None:
            raise ValueError("a search budget needs an iteration cap or a time limit")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.time_limit is not None and self.time_limit < 0:
            raise ValueError("time_limit must be >= 0")


def _insertion_costs(inst: Instance, seq, job) -> list:
    """Makespan of ``seq`` with ``job`` inserted at each of the ``len(seq)+1`` positions.

    Uses heads (completion times of each prefix) and tails (remaining time of
    each suffix) so every position costs O(m).
    """
    rows = inst.rows
    m = inst.m
    k = len(seq)
    heads = [[0] * m]
    for j in seq:
        prev = heads[-1]
        pj = rows[j]
        cur = [0] * m
        t = 0
        for r in range(m):
            t = (prev[r] if prev[r] > t else t) + pj[r]
            cur[r] = t
        heads.append(cur)
    tails = [[0] * m for _ in range(k + 1)]
    for i in range(k - 1, -1, -1):
        nxt = tails[i + 1]
        pj = rows[seq[i]]
        cur = tails[i]
        t = 0
        for r in range(m - 1, -1, -1):
            t = (nxt[r] if nxt[r] > t else t) + pj[r]
            cur[r] = t
    pj = rows[job]
    costs = []
    for pos in range(k + 1):
        head = heads[pos]
        tail = tails[pos]
        t = 0
        best = 0
        for r in range(m):
            t = (head[r] if head[r] > t else t) + pj[r]
            v = t + tail[r]
            if v > best:
                best = v
        costs.append(best)
    return costs


def best_insertion(inst: Instance, seq, job, rng=None):
    """``(position, makespan)`` of the best place for ``job`` in ``seq``.

    Ties go to the earliest position, or to a random one when ``rng`` is given.
    """
    costs = _insertion_costs(inst, seq, job)
    low = min(costs)
    ties = [i for i, c in enumerate(costs) if c == low]
    pos = ties[0] if rng is None or len(ties) == 1 else ties[int(rng.integers(len(ties)))]
    return pos, low


def neh(inst: Instance) -> Schedule:
    """Insert jobs by decreasing total work, each at its best position."""
    totals = [sum(r) for r in inst.rows]
    order = sorted(range(inst.n), key=lambda j: (-totals[j], j))
    seq = [order[0]]
    for job in order[1:]:
        pos, _ = best_insertion(inst, seq, job)
        seq.insert(pos, job)
    return Schedule(seq, completion_times(inst, seq)[-1])


def insertion_local_search(inst: Instance, seed, budget: SearchBudget | None = None,
                           rng=None) -> Schedule:
    """First-improvement descent over remove-and-reinsert moves.

    Jobs are tried in the order they appear in the current schedule; a move is
    taken only if it strictly shortens the makespan, so the result is never
    worse than ``seed``.  ``rng`` (a seed or Generator) breaks ties between
    equally good positions.
    """
    perm = seed.perm if isinstance(seed, Schedule) else seed
    seq = list(check_permutation(perm, inst.n))
    budget = budget or SearchBudget(max_iterations=100 * inst.n * inst.n)
    rng = np.random.default_rng(rng)
    deadline = math.inf if budget.time_limit is None else time.perf_counter() + budget.time_limit
    cap = math.inf if budget.max_iterations is None else budget.max_iterations
    current = completion_times(inst, seq)[-1]
    iterations = 0
    improved = True
    while improved and inst.n > 1:
        improved = False
        for job in list(seq):
            if iterations >= cap or time.perf_counter() >= deadline:
                return Schedule(seq, current)
            iterations += 1
            idx = seq.index(job)
            rest = seq[:idx] + seq[idx + 1:]
            pos, value = best_insertion(inst, rest, job, rng)
            if value < current:
                rest.insert(pos, job)
                seq = rest
                current = value
                improved = True
    return Schedule(seq, current)
