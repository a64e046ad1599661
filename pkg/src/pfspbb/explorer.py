"""Depth-first exploration of factoradic intervals by a pool of IVM explorers.

The pool runs in rounds: every active explorer performs up to ``batch_size``
steps, then all explorers meet at a synchronization point where the
incumbent is merged, activity is sampled and, if fewer than 80% of the
explorers are busy, idle ones steal the right half of a busy one's interval.

Explorers live in one or more hosts.  With ``n_procs=1`` the single host is
in-process; otherwise each host is a forked process holding every
``n_procs``-th explorer, and hosts run their batches in parallel.
"""
from __future__ import annotations

import csv
import enum
import math
import multiprocessing as mp
import threading
import time
from dataclasses import dataclass, field

from .bound import decompose
from .factoradic import from_decimal, midpoint, to_decimal
from .instance import Instance, Schedule, completion_times
from .ivm import IVM, State

__all__ = [
    "StepOutcome",
    "Incumbent",
    "Explorer",
    "explore_step",
    "steal_right_half",
    "plan_steals",
    "ExplorerPool",
    "PoolStats",
    "PoolResult",
    "pool_run",
    "promote",
    "write_timeline",
]

ACTIVITY_TRIGGER = 0.8
MAX_MIN_STEAL = math.factorial(8)


class StepOutcome(enum.Enum):
    DECOMPOSED = "decomposed"
    LEAF = "leaf"
    IMPROVED = "improved"
    EXHAUSTED = "exhausted"


class Incumbent:
    """Best makespan and schedule; only ever improves."""

    def __init__(self, value=math.inf, perm=None):
        self.value = value
        self.perm = None if perm is None else tuple(perm)
        self._lock = threading.Lock()

    def offer(self, value, perm=None) -> bool:
        if value >= self.value:
            return False
        with self._lock:
            if value >= self.value:
                return False
            self.value = value
            # a bare bound (e.g. from another worker) orphans the old schedule
            self.perm = None if perm is None else tuple(perm)
            return True

    def __repr__(self):
        return f"Incumbent({self.value}, {self.perm})"


def explore_step(ivm: IVM, inst: Instance, incumbent: Incumbent, prune: bool = True,
                 on_leaf=None):
    """One select / evaluate-or-decompose cycle.

    Returns ``(outcome, payload)``: the schedule for IMPROVED, the number of
    decompositions (0 or 1) otherwise.
    """
    if not ivm.select_next():
        return StepOutcome.EXHAUSTED, 0
    sub = ivm.decode()
    if sub.d1 + sub.d2 >= ivm.n - 1:
        perm = sub.perm
        cmax = completion_times(inst, perm)[-1]
        ivm.consume()
        if on_leaf is not None:
            on_leaf(tuple(perm))
        if incumbent.offer(cmax, perm):
            return StepOutcome.IMPROVED, Schedule(perm, cmax)
        return StepOutcome.LEAF, 0
    ivm.branch(decompose(inst, sub, incumbent.value if prune else math.inf))
    return StepOutcome.DECOMPOSED, 1


@dataclass
class ExplorerCounters:
    decomposed: int = 0
    replayed: int = 0
    leaves: int = 0
    improvements: int = 0

    def add(self, other: "ExplorerCounters"):
        self.decomposed += other.decomposed
        self.replayed += other.replayed
        self.leaves += other.leaves
        self.improvements += other.improvements


class Explorer:
    """One IVM plus its bookkeeping."""

    def __init__(self, index: int, inst: Instance, prune: bool = True, record_leaves: bool = False):
        self.index = index
        self.inst = inst
        self.ivm = IVM(inst.n)
        self.prune = prune
        self.counters = ExplorerCounters()
        self.leaves: list | None = [] if record_leaves else None

    @property
    def active(self) -> bool:
        return self.ivm.state is State.ACTIVE

    def init_interval(self, a, b, incumbent: Incumbent):
        ub = incumbent.value if self.prune else math.inf
        replayed = self.ivm.init_at(a, b, self.inst, ub)
        self.counters.replayed += replayed
        self.counters.decomposed += replayed

    def run(self, steps: int, incumbent: Incumbent):
        """Up to ``steps`` cycles; returns the improving schedules found."""
        found = []
        ivm, inst, prune = self.ivm, self.inst, self.prune
        on_leaf = None if self.leaves is None else self.leaves.append
        decomposed = leaves = 0
        for _ in range(steps):
            outcome, payload = explore_step(ivm, inst, incumbent, prune, on_leaf)
            if outcome is StepOutcome.DECOMPOSED:
                decomposed += 1
            elif outcome is StepOutcome.EXHAUSTED:
                break
            else:
                leaves += 1
                if outcome is StepOutcome.IMPROVED:
                    found.append(payload)
        self.counters.decomposed += decomposed
        self.counters.leaves += leaves
        self.counters.improvements += len(found)
        # normalize so the reported interval starts at the next open node
        ivm.select_next()
        return found

    def current_subproblem(self):
        if not self.ivm.select_next():
            return None
        return self.ivm.decode()


def _length(interval, n: int) -> int:
    if interval is None:
        return 0
    a, b = interval
    end = math.factorial(n) if b is None else to_decimal(b)
    return end - to_decimal(a)


def steal_right_half(a, b, min_length: int = 2):
    """Split ``[a, b)`` (factoradic vectors, ``b=None`` for ``n!``) at its midpoint.

    Returns ``((a, mid), (mid, b))``, the victim's and the thief's parts, or
    None when the interval is shorter than ``max(2, min_length)``.
    """
    n = len(a)
    length = _length((a, b), n)
    if length < max(2, min_length):
        return None
    mid = midpoint(a, b)
    return (tuple(a), mid), (mid, b)


def _is_power_of_four(k: int) -> bool:
    return k >= 4 and (k & (k - 1)) == 0 and (k.bit_length() - 1) % 2 == 0


def plan_steals(lengths, min_length: int):
    """Match idle explorers to victims; returns ``[(thief, victim), ...]``.

    ``lengths[i]`` is the remaining interval length of explorer ``i`` (0 when
    idle).  A victim must be longer than both the average length and
    ``min_length`` and is claimed at most once.  When the explorer count is a
    power of four, idle explorers poll their neighbors on the 4-ary
    hypercube one offset at a time; otherwise each idle explorer, in index
    order, takes the longest unclaimed eligible victim.
    """
    k = len(lengths)
    if k == 0:
        return []
    avg = sum(lengths) / k
    floor = max(min_length, 1)

    def eligible(v):
        return lengths[v] > avg and lengths[v] > floor and lengths[v] >= 2

    idle = [i for i in range(k) if lengths[i] == 0]
    claimed = set()
    plan = []
    if _is_power_of_four(k):
        served = set()
        dims = (k.bit_length() - 1) // 2
        for dim in range(dims):
            w = 4 ** dim
            for offset in (1, 2, 3):
                for thief in idle:
                    if thief in served:
                        continue
                    digit = (thief // w) % 4
                    victim = thief + (((digit - offset) % 4) - digit) * w
                    if victim not in claimed and eligible(victim):
                        claimed.add(victim)
                        served.add(thief)
                        plan.append((thief, victim))
    else:
        victims = sorted((v for v in range(k) if eligible(v)), key=lambda v: (-lengths[v], v))
        for thief, victim in zip(idle, victims):
            plan.append((thief, victim))
    return plan


def promote(inst: Instance, sub, order) -> Schedule:
    """Complete ``sub`` by placing its free jobs in their order within ``order``."""
    rank = {j: i for i, j in enumerate(order)}
    free = sorted(sub.free, key=lambda j: rank.get(j, len(rank) + j))
    perm = sub.prefix + tuple(free) + sub.suffix
    return Schedule(perm, completion_times(inst, perm)[-1])


class _Host:
    """A group of explorers driven together; lives in the pool's process or a child."""

    def __init__(self, inst: Instance, indices, prune: bool, record_leaves: bool):
        self.inst = inst
        self.explorers = {i: Explorer(i, inst, prune, record_leaves) for i in indices}
        self.incumbent = Incumbent()

    def handle(self, steps, inc_value, inc_perm, commands, promote_order=None):
        self.incumbent.offer(inc_value, inc_perm)
        before = ExplorerCounters()
        for ex in self.explorers.values():
            before.add(ex.counters)
        for cmd, idx, *args in commands:
            ex = self.explorers[idx]
            if cmd == "init":
                ex.init_interval(args[0], args[1], self.incumbent)
            elif cmd == "end":
                ex.ivm.set_end(args[0])
            elif cmd == "clear":
                ex.ivm.clear()
            else:
                raise ValueError(f"unknown host command {cmd!r}")
        found = []
        if steps:
            for ex in self.explorers.values():
                if ex.active:
                    found.extend(ex.run(steps, self.incumbent))
        after = ExplorerCounters()
        for ex in self.explorers.values():
            after.add(ex.counters)
        delta = ExplorerCounters(
            after.decomposed - before.decomposed,
            after.replayed - before.replayed,
            after.leaves - before.leaves,
            after.improvements - before.improvements,
        )
        leaves = []
        for ex in self.explorers.values():
            if ex.leaves:
                leaves.extend(ex.leaves)
                ex.leaves.clear()
        promoted = []
        if promote_order is not None:
            for ex in self.explorers.values():
                sub = ex.current_subproblem()
                if sub is not None:
                    promoted.append(promote(self.inst, sub, promote_order))
        best = found[-1] if found else None
        intervals = {i: ex.ivm.interval() for i, ex in self.explorers.items()}
        return intervals, delta, best, leaves, promoted


def _host_main(conn, inst, indices, prune, record_leaves):
    host = _Host(inst, indices, prune, record_leaves)
    while True:
        msg = conn.recv()
        if msg is None:
            break
        try:
            conn.send(("ok", host.handle(*msg)))
        except Exception as exc:  # surfaced in the parent
            conn.send(("error", repr(exc)))
    conn.close()


class _ProcessHost:
    def __init__(self, ctx, inst, indices, prune, record_leaves):
        self.conn, child = ctx.Pipe()
        self.proc = ctx.Process(target=_host_main, args=(child, inst, indices, prune, record_leaves),
                                daemon=True)
        self.proc.start()
        child.close()

    def submit(self, *msg):
        self.conn.send(msg)

    def collect(self):
        status, payload = self.conn.recv()
        if status != "ok":
            raise RuntimeError(f"explorer host failed: {payload}")
        return payload

    def close(self):
        try:
            self.conn.send(None)
        except (BrokenPipeError, OSError):
            pass
        self.proc.join(timeout=5)
        if self.proc.is_alive():
            self.proc.terminate()


class _LocalHost:
    def __init__(self, inst, indices, prune, record_leaves):
        self.host = _Host(inst, indices, prune, record_leaves)
        self._msg = None

    def submit(self, *msg):
        self._msg = msg

    def collect(self):
        msg, self._msg = self._msg, None
        return self.host.handle(*msg)

    def close(self):
        pass


@dataclass
class PoolStats:
    decomposed: int = 0
    replayed: int = 0
    leaves: int = 0
    improvements: int = 0
    rounds: int = 0
    steal_phases: int = 0
    steals: int = 0
    intervals: int = 0
    elapsed: float = 0.0

    def as_dict(self):
        d = dict(self.__dict__)
        d["nodes_per_second"] = self.decomposed / self.elapsed if self.elapsed > 0 else 0.0
        return d


@dataclass
class RoundReport:
    active: int
    improved: bool
    steals: int
    exhausted: bool


class ExplorerPool:
    """``n_explorers`` IVM explorers with steal-right-half load balancing."""

    def __init__(self, inst: Instance, n_explorers: int = 1, n_procs: int = 1,
                 batch_size: int = 1024, prune: bool = True, record_leaves: bool = False,
                 timeline: bool = False, min_steal: int | None = None):
        if n_explorers < 1:
            raise ValueError("need at least one explorer")
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.inst = inst
        self.n = inst.n
        self.K = n_explorers
        self.batch_size = batch_size
        self.prune = prune
        if min_steal is None:
            min_steal = min(MAX_MIN_STEAL, -(-math.factorial(self.n) // (4 * self.K)))
        self.min_steal = max(2, min_steal)
        self.incumbent = Incumbent()
        self.stats = PoolStats()
        self.intervals: list = [None] * self.K
        self.leaves: list | None = [] if record_leaves else None
        self.timeline: list | None = [] if timeline else None
        self.promoted: list = []
        self.steals_since_mark = 0
        self._t0 = time.perf_counter()
        n_procs = max(1, min(n_procs, self.K))
        groups = [list(range(h, self.K, n_procs)) for h in range(n_procs)]
        if n_procs == 1:
            self._hosts = [_LocalHost(inst, groups[0], prune, record_leaves)]
        else:
            ctx = mp.get_context("fork")
            self._hosts = [_ProcessHost(ctx, inst, g, prune, record_leaves) for g in groups]
        self._pending = [[] for _ in self._hosts]
        self._host_of = {}
        for h, g in enumerate(groups):
            for i in g:
                self._host_of[i] = h
        self._closed = False

    # -- lifecycle --------------------------------------------------------
    def close(self):
        if not self._closed:
            for h in self._hosts:
                h.close()
            self._closed = True

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- work assignment --------------------------------------------------
    def _command(self, idx, *cmd):
        self._pending[self._host_of[idx]].append((cmd[0], idx, *cmd[1:]))

    def _to_vectors(self, a: int, b: int):
        total = math.factorial(self.n)
        if not 0 <= a <= b <= total:
            raise ValueError(f"interval [{a}, {b}) outside [0, {total})")
        return from_decimal(a, self.n), (None if b == total else from_decimal(b, self.n))

    def assign(self, intervals):
        """Give interval ``i`` (decimal ``(a, b)``) to explorer ``i``; others go idle."""
        intervals = [tuple(iv) for iv in intervals if iv[0] < iv[1]]
        if len(intervals) > self.K:
            raise ValueError(f"{len(intervals)} intervals for {self.K} explorers")
        for i in range(self.K):
            if i < len(intervals):
                a, b = self._to_vectors(*intervals[i])
                self._command(i, "init", a, b)
                self.intervals[i] = (a, b)
                self.stats.intervals += 1
            else:
                self._command(i, "clear")
                self.intervals[i] = None

    def snapshot(self):
        """Remaining work as sorted decimal ``(a, b)`` pairs."""
        total = math.factorial(self.n)
        out = []
        for iv in self.intervals:
            if iv is None:
                continue
            a = to_decimal(iv[0])
            b = total if iv[1] is None else to_decimal(iv[1])
            if a < b:
                out.append((a, b))
        return sorted(out)

    @property
    def active_count(self) -> int:
        return sum(iv is not None for iv in self.intervals)

    @property
    def exhausted(self) -> bool:
        return self.active_count == 0

    @property
    def has_pending(self) -> bool:
        return any(self._pending)

    # -- rounds -----------------------------------------------------------
    def run_round(self, steps: int | None = None, promote_capacity: int = 0) -> RoundReport:
        steps = self.batch_size if steps is None else steps
        order = None
        if promote_capacity:
            order = self.incumbent.perm if self.incumbent.perm is not None else tuple(range(self.n))
        for h, host in enumerate(self._hosts):
            host.submit(steps, self.incumbent.value, self.incumbent.perm, self._pending[h], order)
            self._pending[h] = []
        improved = False
        promoted = []
        for host in self._hosts:
            intervals, delta, best, leaves, prom = host.collect()
            for i, iv in intervals.items():
                self.intervals[i] = iv
            self.stats.decomposed += delta.decomposed
            self.stats.replayed += delta.replayed
            self.stats.leaves += delta.leaves
            self.stats.improvements += delta.improvements
            if best is not None and self.incumbent.offer(best.cmax, best.perm):
                improved = True
            if self.leaves is not None:
                self.leaves.extend(leaves)
            promoted.extend(prom)
        if promote_capacity:
            promoted.sort(key=lambda s: s.cmax)
            self.promoted = promoted[:promote_capacity]
        self.stats.rounds += 1
        self._sample()
        steals = 0
        if self.active_count < ACTIVITY_TRIGGER * self.K:
            steals = self.steal_phase()
        return RoundReport(self.active_count, improved, steals, self.exhausted)

    def steal_phase(self) -> int:
        lengths = [_length(iv, self.n) for iv in self.intervals]
        plan = plan_steals(lengths, self.min_steal)
        self.stats.steal_phases += 1
        done = 0
        for thief, victim in plan:
            a, b = self.intervals[victim]
            split = steal_right_half(a, b, self.min_steal)
            if split is None:
                continue
            (va, vmid), (tmid, tb) = split
            self._command(victim, "end", vmid)
            self._command(thief, "init", tmid, tb)
            self.intervals[victim] = (va, vmid)
            self.intervals[thief] = (tmid, tb)
            done += 1
        self.stats.steals += done
        self.stats.intervals += done
        self.steals_since_mark += done
        return done

    def _sample(self):
        if self.timeline is None:
            return
        t_ms = (time.perf_counter() - self._t0) * 1000.0
        for i, iv in enumerate(self.intervals):
            length = _length(iv, self.n)
            self.timeline.append((round(t_ms, 3), i, int(iv is not None),
                                  round(math.log2(length), 3) if length > 0 else 0.0))

    def promote_solutions(self, capacity: int):
        """Current subproblems completed in incumbent order, best ``capacity`` first."""
        self.run_round(steps=0, promote_capacity=capacity)
        return list(self.promoted)

    def run(self, time_limit: float | None = None) -> bool:
        """Rounds until exhaustion; False if ``time_limit`` seconds ran out first."""
        start = time.perf_counter()
        try:
            while True:
                report = self.run_round()
                if report.exhausted and not self.has_pending:
                    return True
                if time_limit is not None and time.perf_counter() - start >= time_limit:
                    return False
        finally:
            self.stats.elapsed += time.perf_counter() - start


@dataclass
class PoolResult:
    schedule: Schedule | None
    makespan: float
    improved: bool
    completed: bool
    stats: PoolStats
    leaves: list | None = None
    timeline: list | None = field(default=None, repr=False)


def pool_run(inst: Instance, n_explorers: int = 1, initial_ub=math.inf, intervals=None,
             n_procs: int = 1, batch_size: int = 1024, prune: bool = True,
             record_leaves: bool = False, timeline: bool = False, time_limit=None,
             initial_schedule=None, min_steal=None) -> PoolResult:
    """Explore ``intervals`` (default the whole space) and return the best schedule.

    With a finite ``initial_ub`` only strictly better schedules are reported;
    ``improved`` tells whether one was found.
    """
    total = math.factorial(inst.n)
    if intervals is None:
        intervals = [(0, total)]
    intervals = sorted((int(a), int(b)) for a, b in intervals)
    for (a1, b1), (a2, b2) in zip(intervals, intervals[1:]):
        if a2 < b1:
            raise ValueError("initial intervals overlap")
    with ExplorerPool(inst, n_explorers, n_procs=n_procs, batch_size=batch_size, prune=prune,
                      record_leaves=record_leaves, timeline=timeline, min_steal=min_steal) as pool:
        pool.incumbent = Incumbent(initial_ub, initial_schedule)
        pool.assign(intervals)
        completed = pool.run(time_limit)
    improved = pool.incumbent.value < initial_ub
    sched = None
    if pool.incumbent.perm is not None:
        sched = Schedule(pool.incumbent.perm, pool.incumbent.value)
    return PoolResult(sched, pool.incumbent.value, improved, completed, pool.stats,
                      pool.leaves, pool.timeline)


def write_timeline(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp_ms", "explorer_id", "active", "interval_length_log2"])
        w.writerows(rows)
