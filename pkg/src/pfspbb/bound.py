"""One-machine lower bound, incremental child evaluation and MinMin branching.

A node is a pair (prefix, suffix) of scheduled jobs.  Its bound is

    max over machines k of  front[k] + remain[k] + tail[k]

where ``front`` is the completion time of the prefix, ``tail`` the time the
suffix needs from its start on machine ``k`` to the end, and ``remain`` the
total work of the unscheduled jobs.  Children differ from their parent by one
job, so their bounds come from the parent's tables in O(m) each.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

from .instance import Instance, completion_times

__all__ = [
    "Direction",
    "Subproblem",
    "BoundTables",
    "Decomposition",
    "bound_tables",
    "lb1",
    "children_bounds",
    "min_min",
    "decompose_bounds",
    "decompose",
]


class Direction(enum.IntEnum):
    FORWARD = 0
    BACKWARD = 1


@dataclass
class Subproblem:
    """Jobs ``perm[:d1]`` are the prefix, ``perm[n-d2:]`` the suffix, in order.

    The jobs in between are unscheduled; their order carries no meaning for
    the bound but defines the order of the children.
    """

    perm: Sequence[int]
    d1: int = 0
    d2: int = 0

    @property
    def n(self) -> int:
        return len(self.perm)

    @property
    def prefix(self):
        return tuple(self.perm[: self.d1])

    @property
    def suffix(self):
        return tuple(self.perm[self.n - self.d2:])

    @property
    def free(self):
        return tuple(self.perm[self.d1: self.n - self.d2])

    @property
    def is_leaf(self) -> bool:
        return self.d1 + self.d2 >= self.n - 1

    def validate(self, n: int | None = None) -> "Subproblem":
        size = len(self.perm)
        if n is not None and size != n:
            raise ValueError(f"subproblem has {size} jobs, instance has {n}")
        if sorted(self.perm) != list(range(size)):
            raise ValueError(f"subproblem perm is not a permutation: {self.perm}")
        if self.d1 < 0 or self.d2 < 0 or self.d1 + self.d2 > size:
            raise ValueError(f"invalid depths d1={self.d1} d2={self.d2} for n={size}")
        return self

    def child(self, job: int, direction: Direction) -> "Subproblem":
        """The subproblem obtained by fixing ``job`` at the front or the back."""
        free = list(self.free)
        free.remove(job)
        if direction == Direction.FORWARD:
            return Subproblem(self.prefix + (job,) + tuple(free) + self.suffix, self.d1 + 1, self.d2)
        return Subproblem(self.prefix + tuple(free) + (job,) + self.suffix, self.d1, self.d2 + 1)


@dataclass
class BoundTables:
    front: list
    tail: list
    remain: list

    def lower_bound(self) -> int:
        return max(f + r + t for f, r, t in zip(self.front, self.remain, self.tail))


@dataclass
class Decomposition:
    direction: Direction
    child_lb: list
    pruned: list

    @property
    def n_pruned(self) -> int:
        return sum(self.pruned)


def bound_tables(inst: Instance, sub: Subproblem) -> BoundTables:
    rows = inst.rows
    m = inst.m
    n = len(sub.perm)
    perm = sub.perm
    front = completion_times(inst, perm[: sub.d1])
    tail = [0] * m
    # the suffix scheduled backwards on the mirrored machine order
    for j in reversed(perm[n - sub.d2:]):
        pj = rows[j]
        t = 0
        for k in range(m - 1, -1, -1):
            b = tail[k]
            t = (b if b > t else t) + pj[k]
            tail[k] = t
    remain = [0] * m
    for j in perm[sub.d1: n - sub.d2]:
        remain = [r + x for r, x in zip(remain, rows[j])]
    return BoundTables(front, tail, remain)


def lb1(inst: Instance, sub: Subproblem) -> int:
    return bound_tables(inst, sub).lower_bound()


def children_bounds(inst: Instance, sub: Subproblem, tables: BoundTables | None = None):
    """Bounds of every child, in the order of the free jobs.

    Returns ``(lb_fwd, lb_bwd)``: entry ``i`` is the bound after placing the
    ``i``-th free job at the end of the prefix, respectively at the start of
    the suffix.
    """
    n = len(sub.perm)
    free = sub.perm[sub.d1: n - sub.d2]
    if not free:
        raise ValueError("node has no free job to branch on")
    if tables is None:
        tables = bound_tables(inst, sub)
    rows = inst.rows
    front, tail, remain = tables.front, tables.tail, tables.remain
    m = len(front)
    rem_tail = [r + t for r, t in zip(remain, tail)]
    front_rem = [f + r for f, r in zip(front, remain)]
    back_range = range(m - 1, -1, -1)
    lb_fwd = []
    lb_bwd = []
    for j in free:
        pj = rows[j]
        t = 0
        best = 0
        for f, a, rt in zip(front, pj, rem_tail):
            t = (f if f > t else t) + a
            v = t + rt - a
            if v > best:
                best = v
        lb_fwd.append(best)
        t = 0
        best = 0
        for k in back_range:
            b = tail[k]
            a = pj[k]
            t = (b if b > t else t) + a
            v = t + front_rem[k] - a
            if v > best:
                best = v
        lb_bwd.append(best)
    return lb_fwd, lb_bwd


def min_min(lb_fwd: Sequence[int], lb_bwd: Sequence[int]) -> Direction:
    """Pick the child set in which the overall smallest bound occurs less often.

    Ties go to the set with the larger bound sum, then to forward.
    """
    lowest = min(min(lb_fwd), min(lb_bwd))
    n_fwd = list(lb_fwd).count(lowest)
    n_bwd = list(lb_bwd).count(lowest)
    if n_fwd != n_bwd:
        return Direction.FORWARD if n_fwd < n_bwd else Direction.BACKWARD
    return Direction.BACKWARD if sum(lb_bwd) > sum(lb_fwd) else Direction.FORWARD


def decompose_bounds(lb_fwd, lb_bwd, incumbent) -> Decomposition:
    direction = min_min(lb_fwd, lb_bwd)
    chosen = list(lb_fwd if direction == Direction.FORWARD else lb_bwd)
    return Decomposition(direction, chosen, [lb >= incumbent for lb in chosen])


def decompose(inst: Instance, sub: Subproblem, incumbent, tables: BoundTables | None = None) -> Decomposition:
    """Evaluate both child sets, choose a direction and flag children to prune.

    A child is pruned when its bound is not below ``incumbent``.  The
    direction never depends on ``incumbent``.
    """
    lb_fwd, lb_bwd = children_bounds(inst, sub, tables)
    return decompose_bounds(lb_fwd, lb_bwd, incumbent)
