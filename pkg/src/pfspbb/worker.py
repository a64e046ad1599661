"""Worker process: an explorer pool, one communication thread, optional heuristic threads.

The pool runs on the calling thread and never waits for the network.  At
every synchronization point it may post one message into a single-slot
outbox; the communication thread sends it, blocks for the reply and drops
the reply into a single-slot inbox that the pool reads at its next
synchronization point.  Only one request is ever in flight.
"""
from __future__ import annotations

import logging
import math
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .explorer import ExplorerPool, Incumbent
from .heuristic import SearchBudget, insertion_local_search
from .instance import Instance
from .protocol import Best, End, ProtocolError, TransportError, WorkReply, WorkRequest
from .workunit import intersect_units, normalize, subtract_units

__all__ = [
    "WorkerConfig",
    "WorkerResult",
    "worker_run",
    "snapshot_intervals",
    "apply_work_update",
    "heuristic_loop",
    "Slot",
]

log = logging.getLogger(__name__)


@dataclass
class WorkerConfig:
    n_explorers: int = 4
    n_procs: int = 1
    batch_size: int = 1024
    checkpoint_period: float = 30.0
    steal_fraction: float = 0.2
    heuristic_agents: int = 0
    heuristic_slice: float = 0.5
    worker_id: int = 0
    idle_backoff: float = 0.05
    timeline: bool = False
    rng_seed: int | None = None
    prune: bool = True
    record_leaves: bool = False


@dataclass
class WorkerResult:
    status: int
    best: float
    schedule: tuple | None
    stats: dict = field(default_factory=dict)
    timeline: list | None = None
    leaves: list | None = None


class Slot:
    """A one-item buffer with blocking ``get`` and non-blocking ``offer``."""

    def __init__(self):
        self._item = None
        self._full = False
        self._cond = threading.Condition()

    def offer(self, item) -> bool:
        with self._cond:
            if self._full:
                return False
            self._item, self._full = item, True
            self._cond.notify_all()
            return True

    def get(self, timeout=None):
        """Take the item, waiting up to ``timeout``; raises TimeoutError if none came."""
        with self._cond:
            if not self._cond.wait_for(lambda: self._full, timeout):
                raise TimeoutError("slot empty")
            item, self._item, self._full = self._item, None, False
            return item

    def poll(self):
        """``(True, item)`` if an item was waiting, else ``(False, None)``."""
        with self._cond:
            if not self._full:
                return False, None
            item, self._item, self._full = self._item, None, False
            return True, item

    @property
    def full(self) -> bool:
        return self._full


def snapshot_intervals(pool: ExplorerPool) -> list:
    """The pool's remaining work as sorted, normalized decimal intervals."""
    return normalize(pool.snapshot())


def apply_work_update(pool: ExplorerPool, intervals) -> None:
    """Hand ``intervals`` to the explorers, one each; the rest go idle."""
    intervals = normalize(intervals)
    if len(intervals) > pool.K:
        raise ValueError(f"{len(intervals)} intervals for {pool.K} explorers")
    pool.assign(intervals)


def heuristic_loop(pool: ExplorerPool, incumbent: Incumbent, stop: threading.Event,
                   seeds: "SeedBuffer", slice_seconds: float = 0.5, rng=None):
    """Improve promoted schedules by local search until ``stop`` is set."""
    rng = np.random.default_rng(rng)
    inst = pool.inst
    while not stop.is_set():
        seed = seeds.take(timeout=0.1)
        if seed is None:
            continue
        result = insertion_local_search(inst, seed, SearchBudget(time_limit=slice_seconds), rng)
        incumbent.offer(result.cmax, result.perm)


class SeedBuffer:
    """Latest promoted schedules, handed out best-first."""

    def __init__(self):
        self._items: list = []
        self._cond = threading.Condition()

    def replace(self, items):
        with self._cond:
            self._items = sorted(items, key=lambda s: s.cmax)
            self._cond.notify_all()

    def take(self, timeout=None):
        with self._cond:
            if not self._cond.wait_for(lambda: self._items, timeout):
                return None
            return self._items.pop(0)


def _comm_loop(transport, outbox: Slot, inbox: Slot):
    while True:
        msg = outbox.get()
        if msg is None:
            return
        try:
            transport.send(msg)
            if isinstance(msg, End):
                inbox.offer(None)
                return
            inbox.offer(transport.receive())
        except Exception as exc:  # handed to the pool thread
            inbox.offer(exc)
            return


class _WorkerLoop:
    def __init__(self, transport, inst: Instance, cfg: WorkerConfig):
        self.transport = transport
        self.inst = inst
        self.cfg = cfg
        self.pool = ExplorerPool(inst, cfg.n_explorers, n_procs=cfg.n_procs,
                                 batch_size=cfg.batch_size, timeline=cfg.timeline,
                                 prune=cfg.prune, record_leaves=cfg.record_leaves)
        self.outbox = Slot()
        self.inbox = Slot()
        self.awaiting = False
        self.sent_snapshot: list = []
        self.sent_best = math.inf
        self.reported_nodes = 0
        self.last_checkpoint = time.monotonic()
        self.retry_at = 0.0
        self.stats = {"requests": 0, "best_sent": 0, "updates": 0, "empty_replies": 0,
                      "triggers_steal": 0, "triggers_timer": 0, "triggers_idle": 0}
        self.seeds = SeedBuffer()
        self.stop = threading.Event()

    def _post(self, msg):
        if not self.outbox.offer(msg):
            raise RuntimeError("outbox occupied while no request was pending")
        self.awaiting = True

    def _send_snapshot(self, reason: str):
        snap = snapshot_intervals(self.pool)
        nodes = self.pool.stats.decomposed - self.reported_nodes
        self.reported_nodes = self.pool.stats.decomposed
        self.sent_snapshot = snap
        self.pool.steals_since_mark = 0
        self.last_checkpoint = time.monotonic()
        self.stats["requests"] += 1
        self.stats[f"triggers_{reason}"] = self.stats.get(f"triggers_{reason}", 0) + 1
        self._post(WorkRequest(self.cfg.worker_id, nodes, self.pool.K, snap))

    def _apply_reply(self, reply) -> bool:
        """Returns False once the coordinator has said END."""
        self.awaiting = False
        if isinstance(reply, Exception):
            raise reply
        if isinstance(reply, End):
            self.pool.incumbent.offer(reply.makespan)
            return False
        if isinstance(reply, Best):
            self.pool.incumbent.offer(reply.makespan)
            return True
        if isinstance(reply, WorkReply):
            given = normalize(reply.intervals)
            if not given:
                self.stats["empty_replies"] += 1
                self.retry_at = time.monotonic() + self.cfg.idle_backoff
            # work explored since the snapshot was sent is not redone
            current = normalize(self.pool.snapshot())
            update = normalize(intersect_units(given, current) + subtract_units(given, self.sent_snapshot))
            if len(update) > self.pool.K:
                update = given
            apply_work_update(self.pool, update)
            self.stats["updates"] += 1
            return True
        raise TypeError(f"unexpected reply {type(reply).__name__}")

    def _triggers(self):
        if self.awaiting:
            return
        inc = self.pool.incumbent
        if inc.value < self.sent_best and inc.perm is not None:
            self.sent_best = inc.value
            self.stats["best_sent"] += 1
            self._post(Best(inc.value, inc.perm))
            return
        now = time.monotonic()
        if self.pool.exhausted:
            if now >= self.retry_at:
                self._send_snapshot("idle")
        elif self.pool.steals_since_mark >= max(1, math.ceil(self.cfg.steal_fraction * self.pool.K)):
            self._send_snapshot("steal")
        elif now - self.last_checkpoint >= self.cfg.checkpoint_period:
            self._send_snapshot("timer")

    def run(self) -> WorkerResult:
        cfg = self.cfg
        comm = threading.Thread(target=_comm_loop, args=(self.transport, self.outbox, self.inbox),
                                daemon=True)
        comm.start()
        helpers = []
        for h in range(cfg.heuristic_agents):
            seed = None if cfg.rng_seed is None else cfg.rng_seed + h
            t = threading.Thread(target=heuristic_loop,
                                 args=(self.pool, self.pool.incumbent, self.stop, self.seeds,
                                       cfg.heuristic_slice, seed), daemon=True)
            t.start()
            helpers.append(t)
        start = time.monotonic()
        status = 0
        try:
            self._send_snapshot("idle")
            while True:
                got, reply = self.inbox.poll()
                if got and not self._apply_reply(reply):
                    break
                if not self.pool.exhausted or self.pool.has_pending:
                    capacity = 2 * cfg.heuristic_agents
                    self.pool.run_round(promote_capacity=capacity)
                    if capacity:
                        self.seeds.replace(self.pool.promoted)
                self._triggers()
                if self.awaiting:
                    # let the communication thread take the interpreter lock now
                    time.sleep(0)
                if self.pool.exhausted and self.awaiting:
                    # nothing to explore: wait for the reply instead of spinning
                    try:
                        reply = self.inbox.get(timeout=cfg.idle_backoff)
                    except TimeoutError:
                        continue
                    if not self._apply_reply(reply):
                        break
                elif self.pool.exhausted:
                    time.sleep(max(0.0, min(cfg.idle_backoff, self.retry_at - time.monotonic())))
            inc = self.pool.incumbent
            self.outbox.offer(End(inc.value, inc.perm or ()))
            comm.join(timeout=10)
        except (TransportError, ProtocolError, OSError) as exc:
            log.error("worker %s: %s", cfg.worker_id, exc)
            status = 1
            self.outbox.offer(None)
        finally:
            self.stop.set()
            for t in helpers:
                t.join(timeout=5)
            self.pool.close()
            try:
                self.transport.close()
            except OSError:
                pass
        stats = dict(self.stats)
        stats.update(self.pool.stats.as_dict())
        stats["wall_time"] = time.monotonic() - start
        inc = self.pool.incumbent
        return WorkerResult(status, inc.value, inc.perm, stats, self.pool.timeline, self.pool.leaves)


def worker_run(transport, inst: Instance, config: WorkerConfig | None = None) -> WorkerResult:
    """Serve one coordinator until it answers END; ``status`` is 0 on a clean finish."""
    return _WorkerLoop(transport, inst, config or WorkerConfig()).run()
