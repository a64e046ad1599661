"""Cluster coordinator: hands out work units, reconciles worker checkpoints, keeps the global best.

The coordinator never explores.  It holds a list of unassigned units and,
per worker connection, a copy of the unit that worker is believed to hold.
When it splits a copy to feed an idle worker, the copy is flagged modified
and the owner's next checkpoint is intersected with it, so the owner drops
what was given away.
"""
from __future__ import annotations

import itertools
import logging
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

from .protocol import Best, End, TransportError, WorkReply, WorkRequest
from .workunit import WorkUnit, intersect_units, normalize, split_unit, unit_size

__all__ = [
    "Coordinator",
    "CoordinatorResult",
    "CheckpointError",
    "Checkpoint",
    "checkpoint_save",
    "checkpoint_load",
]

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
_MAGIC = "pfspbb-checkpoint"


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    fingerprint: str
    units: list
    best: float = math.inf
    schedule: tuple | None = None
    nodes: int = 0


def checkpoint_save(path, fingerprint: str, units, best=math.inf, schedule=None, nodes: int = 0):
    """Write all units atomically: a temp file in the same directory, then rename."""
    path = Path(path)
    lines = [f"{_MAGIC} {CHECKPOINT_VERSION}", f"instance {fingerprint}"]
    if best == math.inf:
        lines.append("best none")
    else:
        jobs = " ".join(str(j) for j in (schedule or ()))
        lines.append(f"best {int(best)} {jobs}".rstrip())
    lines.append(f"nodes {nodes}")
    for unit in units:
        lines.append(f"unit {unit.id} {unit.kmax} {len(unit.intervals)}")
        lines.extend(f"{a} {b}" for a, b in unit.intervals)
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write("\n".join(lines) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def checkpoint_load(path, fingerprint: str | None = None) -> Checkpoint:
    """Read a checkpoint; refuses files written for a different instance."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].split() != [_MAGIC, str(CHECKPOINT_VERSION)]:
        raise CheckpointError(f"{path}: not a version {CHECKPOINT_VERSION} checkpoint")
    try:
        key, _, stored = lines[1].partition(" ")
        if key != "instance":
            raise CheckpointError(f"{path}: missing instance line")
        if fingerprint is not None and stored != fingerprint:
            raise CheckpointError(f"{path}: checkpoint belongs to a different instance")
        best_tok = lines[2].split()
        if best_tok[0] != "best":
            raise CheckpointError(f"{path}: missing best line")
        if best_tok[1] == "none":
            best, schedule = math.inf, None
        else:
            best = int(best_tok[1])
            schedule = tuple(int(t) for t in best_tok[2:]) or None
        nodes_tok = lines[3].split()
        if nodes_tok[0] != "nodes":
            raise CheckpointError(f"{path}: missing nodes line")
        nodes = int(nodes_tok[1])
        units = []
        i = 4
        while i < len(lines):
            if not lines[i].strip():
                i += 1
                continue
            tag, uid, kmax, count = lines[i].split()
            if tag != "unit":
                raise CheckpointError(f"{path}: line {i + 1}: expected a unit header")
            count = int(count)
            ivs = [tuple(int(t) for t in lines[i + 1 + k].split()) for k in range(count)]
            units.append(WorkUnit(int(uid), normalize(ivs), int(kmax)))
            i += 1 + count
    except (IndexError, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"{path}: malformed checkpoint ({exc})") from None
    return Checkpoint(stored, units, best, schedule, nodes)


@dataclass
class CoordinatorResult:
    makespan: float
    schedule: tuple | None
    stats: dict = field(default_factory=dict)


class Coordinator:
    """Event loop over WORK / BEST / END messages from ``n_workers`` workers."""

    def __init__(self, transport, n_workers: int, fingerprint: str, initial_intervals=None,
                 units=None, best=math.inf, schedule=None, checkpoint_path=None,
                 checkpoint_period: float = 60.0, nodes: int = 0):
        if n_workers < 1:
            raise ValueError("need at least one worker")
        self.transport = transport
        self.n_workers = n_workers
        self.fingerprint = fingerprint
        self._ids = itertools.count()
        self.unassigned: list = []
        for unit in units or ():
            self.unassigned.append(WorkUnit(next(self._ids), list(unit.intervals), unit.kmax))
        if initial_intervals:
            self.unassigned.append(WorkUnit(next(self._ids), normalize(initial_intervals), 1))
        self.unassigned = [u for u in self.unassigned if u.intervals]
        self.active: dict = {}  # unit id -> copy
        self.owner: dict = {}  # connection -> unit id
        self.best = best
        self.schedule = tuple(schedule) if schedule else None
        self.n_terminated = 0
        self.total_nodes = nodes
        self.checkpoint_path = checkpoint_path
        self.checkpoint_period = checkpoint_period
        self.stats = {"messages": 0, "work_requests": 0, "splits": 0, "assignments": 0,
                      "checkpoints": 0, "best_updates": 0}
        self._last_checkpoint = time.monotonic()

    @classmethod
    def from_checkpoint(cls, path, transport, n_workers, fingerprint, **kw):
        ck = checkpoint_load(path, fingerprint)
        return cls(transport, n_workers, fingerprint, units=ck.units, best=ck.best,
                   schedule=ck.schedule, nodes=ck.nodes, **kw)

    # -- algebra ---------------------------------------------------------
    def remaining(self) -> list:
        """Union of everything unassigned or held by workers."""
        ivs = [iv for u in self.unassigned for iv in u.intervals]
        ivs += [iv for u in self.active.values() for iv in u.intervals]
        return normalize(ivs)

    def steal_from_active(self, kmax: int) -> WorkUnit:
        """Split the largest active unit; the new unit gets a fresh id (may be empty)."""
        if not self.active:
            return WorkUnit(-1, [], kmax)
        victim = max(self.active.values(), key=lambda u: (unit_size(u.intervals), -u.id))
        new = split_unit(victim, kmax, -1)
        if new.intervals:
            new.id = next(self._ids)
            self.stats["splits"] += 1
        return new

    def _take_unassigned(self, kmax: int) -> WorkUnit:
        unit = self.unassigned.pop(0)
        if len(unit.intervals) > kmax:
            rest = WorkUnit(next(self._ids), unit.intervals[kmax:], unit.kmax)
            self.unassigned.insert(0, rest)
            unit.intervals = unit.intervals[:kmax]
        unit.kmax = kmax
        self.stats["assignments"] += 1
        return unit

    def worker_checkpoint(self, source, request: WorkRequest):
        """Reconcile a worker's snapshot with its copy; returns the reply message."""
        held = normalize(request.intervals)
        uid = self.owner.get(source)
        copy = self.active.pop(uid, None) if uid is not None else None
        if copy is None:
            current = []
        elif not copy.modified:
            current = held
        else:
            current = intersect_units(held, copy.intervals)
        if current:
            unit = WorkUnit(uid, current, request.kmax)
        elif self.unassigned:
            unit = self._take_unassigned(request.kmax)
        else:
            unit = self.steal_from_active(request.kmax)
        if unit.intervals:
            unit.modified = False
            unit.kmax = request.kmax
            self.active[unit.id] = unit
            self.owner[source] = unit.id
        else:
            self.owner.pop(source, None)
            if not self.active and not self.unassigned:
                return End(self.best, ())
            # nothing to hand out right now; the worker asks again later
            return WorkReply([])
        if list(unit.intervals) == list(held):
            return Best(self.best, ())
        return WorkReply(list(unit.intervals))

    def _offer(self, makespan, schedule):
        if makespan < self.best:
            self.best = makespan
            self.schedule = tuple(schedule) if schedule else self.schedule
            self.stats["best_updates"] += 1
            log.info("new best %s", makespan)

    # -- persistence -----------------------------------------------------
    def save_checkpoint(self):
        if self.checkpoint_path is None:
            return
        units = list(self.unassigned) + list(self.active.values())
        checkpoint_save(self.checkpoint_path, self.fingerprint, units, self.best,
                        self.schedule, self.total_nodes)
        self.stats["checkpoints"] += 1
        self._last_checkpoint = time.monotonic()

    # -- main loop -------------------------------------------------------
    def handle(self, source, msg):
        self.stats["messages"] += 1
        if isinstance(msg, WorkRequest):
            self.stats["work_requests"] += 1
            self.total_nodes += msg.nodes
            self.transport.send(source, self.worker_checkpoint(source, msg))
        elif isinstance(msg, Best):
            self._offer(msg.makespan, msg.schedule)
            self.transport.send(source, Best(self.best, ()))
        elif isinstance(msg, End):
            self._offer(msg.makespan, msg.schedule)
            self.n_terminated += 1
        else:
            raise TypeError(f"unexpected message {type(msg).__name__}")

    def run(self) -> CoordinatorResult:
        start = time.monotonic()
        self.save_checkpoint()
        try:
            while self.n_terminated < self.n_workers:
                wait = None
                if self.checkpoint_path is not None:
                    wait = max(0.01, self.checkpoint_period - (time.monotonic() - self._last_checkpoint))
                try:
                    source, msg = self.transport.receive(timeout=wait)
                except TimeoutError:
                    msg = None
                if msg is not None:
                    self.handle(source, msg)
                if (self.checkpoint_path is not None
                        and time.monotonic() - self._last_checkpoint >= self.checkpoint_period):
                    self.save_checkpoint()
        except TransportError:
            self.save_checkpoint()
            raise
        self.save_checkpoint()
        stats = dict(self.stats)
        stats.update(total_nodes=self.total_nodes, elapsed=time.monotonic() - start,
                     best=self.best)
        return CoordinatorResult(self.best, self.schedule, stats)
