"""Coordinator/worker messages, their binary framing, and two transports.

Frame layout (all integers big-endian)::

    u32 length     number of bytes that follow (tag + payload)
    u8  tag        1 = WORK, 2 = BEST, 3 = END
    payload

WORK sent by a worker carries ``u32 worker_id, u64 nodes, u32 kmax, u32 count``
followed by ``count`` intervals; WORK sent by the coordinator carries only
``u32 count`` and the intervals.  An interval is two counts, each a ``u16``
byte length followed by the minimal big-endian magnitude.  BEST and END carry
``u64 makespan, u32 length`` and ``length`` ``u32`` job indices; a makespan of
``2**64 - 1`` means "no solution yet".
"""
from __future__ import annotations

import enum
import itertools
import math
import queue
import select
import socket
import struct
import threading
from dataclasses import dataclass, field

from .factoradic import int_from_bytes, int_to_bytes

__all__ = [
    "Tag",
    "WorkRequest",
    "WorkReply",
    "Best",
    "End",
    "ProtocolError",
    "TransportError",
    "encode",
    "decode",
    "InProcessHub",
    "TcpCoordinatorTransport",
    "TcpWorkerTransport",
    "NO_MAKESPAN",
]


class Tag(enum.IntEnum):
    WORK = 1
    BEST = 2
    END = 3


WORK, BEST, END = Tag.WORK, Tag.BEST, Tag.END
NO_MAKESPAN = 2**64 - 1
MAX_FRAME = 1 << 30

_U16 = struct.Struct(">H")
_U32 = struct.Struct(">I")
_WORK_HEAD = struct.Struct(">IQII")
_BEST_HEAD = struct.Struct(">QI")


class ProtocolError(ValueError):
    """A frame that cannot be decoded."""


class TransportError(ConnectionError):
    """The peer went away or the channel broke."""


@dataclass
class WorkRequest:
    """Worker checkpoint: the intervals it still holds."""

    worker_id: int
    nodes: int
    kmax: int
    intervals: list = field(default_factory=list)


@dataclass
class WorkReply:
    intervals: list = field(default_factory=list)


@dataclass
class Best:
    makespan: float = math.inf
    schedule: tuple = ()


@dataclass
class End:
    makespan: float = math.inf
    schedule: tuple = ()


def _put_count(out: list, x: int):
    data = int_to_bytes(x)
    if len(data) > 0xFFFF:
        raise ProtocolError("count too large to encode")
    out.append(_U16.pack(len(data)))
    out.append(data)


def _put_intervals(out: list, intervals):
    for a, b in intervals:
        a, b = int(a), int(b)
        if not 0 <= a < b:
            raise ProtocolError(f"interval [{a}, {b}) is empty or negative")
        _put_count(out, a)
        _put_count(out, b)


def _put_solution(out: list, makespan, schedule):
    if makespan is None or makespan == math.inf:
        value = NO_MAKESPAN
    else:
        value = int(makespan)
        if not 0 <= value < NO_MAKESPAN:
            raise ProtocolError(f"makespan {makespan} out of range")
    out.append(_BEST_HEAD.pack(value, len(schedule)))
    out.extend(_U32.pack(int(j)) for j in schedule)


def encode(msg) -> bytes:
    out = [b""]
    if isinstance(msg, WorkRequest):
        out.append(bytes([WORK]))
        out.append(_WORK_HEAD.pack(msg.worker_id, msg.nodes, msg.kmax, len(msg.intervals)))
        _put_intervals(out, msg.intervals)
    elif isinstance(msg, WorkReply):
        out.append(bytes([WORK]))
        out.append(_U32.pack(len(msg.intervals)))
        _put_intervals(out, msg.intervals)
    elif isinstance(msg, (Best, End)):
        out.append(bytes([BEST if isinstance(msg, Best) else END]))
        _put_solution(out, msg.makespan, msg.schedule)
    else:
        raise TypeError(f"cannot encode {type(msg).__name__}")
    body = b"".join(out)
    return _U32.pack(len(body)) + body


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, k: int) -> bytes:
        end = self.pos + k
        if end > len(self.data):
            raise ProtocolError("truncated frame")
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def unpack(self, st: struct.Struct):
        return st.unpack(self.take(st.size))

    def count(self) -> int:
        (size,) = self.unpack(_U16)
        try:
            return int_from_bytes(self.take(size))
        except ValueError as exc:
            raise ProtocolError(str(exc)) from None

    def intervals(self, k: int) -> list:
        out = []
        for _ in range(k):
            a = self.count()
            b = self.count()
            if not a < b:
                raise ProtocolError(f"interval [{a}, {b}) is empty")
            out.append((a, b))
        return out


def decode(frame: bytes, sender: str = "worker"):
    """Inverse of :func:`encode`.

    ``sender`` (``"worker"`` or ``"coordinator"``) selects the WORK layout,
    which differs by direction.
    """
    if sender not in ("worker", "coordinator"):
        raise ValueError(f"sender must be 'worker' or 'coordinator', got {sender!r}")
    r = _Reader(frame)
    (length,) = r.unpack(_U32)
    if length != len(frame) - 4:
        raise ProtocolError(f"frame length {length} does not match {len(frame) - 4} bytes")
    if length < 1:
        raise ProtocolError("frame without tag")
    tag = r.take(1)[0]
    if tag == WORK:
        if sender == "worker":
            wid, nodes, kmax, k = r.unpack(_WORK_HEAD)
            msg = WorkRequest(wid, nodes, kmax, r.intervals(k))
        else:
            (k,) = r.unpack(_U32)
            msg = WorkReply(r.intervals(k))
    elif tag in (BEST, END):
        value, k = r.unpack(_BEST_HEAD)
        sched = tuple(_U32.unpack(r.take(4))[0] for _ in range(k))
        makespan = math.inf if value == NO_MAKESPAN else value
        msg = (Best if tag == BEST else End)(makespan, sched)
    else:
        raise ProtocolError(f"unknown tag {tag}")
    if r.pos != len(frame):
        raise ProtocolError(f"{len(frame) - r.pos} trailing bytes")
    return msg


# -- in-process transport ------------------------------------------------------
class InProcessHub:
    """Queue-backed transport; messages still pass through encode/decode."""

    def __init__(self):
        self._inbox: queue.Queue = queue.Queue()
        self._outboxes: dict = {}
        self._ids = itertools.count()
        self._lock = threading.Lock()

    def coordinator(self) -> "_InProcessCoordinator":
        return _InProcessCoordinator(self)

    def connect(self) -> "_InProcessWorker":
        with self._lock:
            source = next(self._ids)
            box: queue.Queue = queue.Queue()
            self._outboxes[source] = box
        return _InProcessWorker(self, source, box)


class _InProcessCoordinator:
    def __init__(self, hub: InProcessHub):
        self.hub = hub

    def receive(self, timeout=None):
        try:
            source, frame = self.hub._inbox.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError("no message") from None
        if frame is None:
            raise TransportError(f"worker {source} disconnected")
        return source, decode(frame, "worker")

    def send(self, dest, msg):
        box = self.hub._outboxes.get(dest)
        if box is None:
            raise TransportError(f"no worker {dest}")
        box.put(encode(msg))

    def close(self):
        for box in self.hub._outboxes.values():
            box.put(None)


class _InProcessWorker:
    def __init__(self, hub: InProcessHub, source: int, box: queue.Queue):
        self.hub = hub
        self.source = source
        self.box = box
        self._ended = False

    def send(self, msg):
        if isinstance(msg, End):
            self._ended = True
        self.hub._inbox.put((self.source, encode(msg)))

    def receive(self, timeout=None):
        try:
            frame = self.box.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError("no message") from None
        if frame is None:
            raise TransportError("coordinator closed the channel")
        return decode(frame, "coordinator")

    def close(self):
        if not self._ended:
            self.hub._inbox.put((self.source, None))


# -- TCP transport -------------------------------------------------------------
def _recv_exact(sock: socket.socket, k: int) -> bytes:
    chunks = []
    while k:
        chunk = sock.recv(k)
        if not chunk:
            raise TransportError("connection closed")
        chunks.append(chunk)
        k -= len(chunk)
    return b"".join(chunks)


def _read_frame(sock: socket.socket) -> bytes:
    head = _recv_exact(sock, 4)
    (length,) = _U32.unpack(head)
    if length > MAX_FRAME:
        raise ProtocolError(f"frame of {length} bytes exceeds limit")
    return head + _recv_exact(sock, length)


class TcpCoordinatorTransport:
    """Listening side; ``receive`` returns ``(worker_connection_id, message)``."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0, backlog: int = 64):
        self._server = socket.create_server((host, port), backlog=backlog, reuse_port=False)
        self.address = self._server.getsockname()[:2]
        self._inbox: queue.Queue = queue.Queue()
        self._conns: dict = {}
        self._ended: set = set()
        self._lock = threading.Lock()
        self._ids = itertools.count()
        self._closed = False
        self._acceptor = threading.Thread(target=self._accept_loop, daemon=True)
        self._acceptor.start()

    def _accept_loop(self):
        while not self._closed:
            try:
                conn, _ = self._server.accept()
            except OSError:
                return
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            with self._lock:
                source = next(self._ids)
                self._conns[source] = conn
            threading.Thread(target=self._read_loop, args=(source, conn), daemon=True).start()

    def _read_loop(self, source, conn):
        try:
            while True:
                frame = _read_frame(conn)
                msg = decode(frame, "worker")
                if isinstance(msg, End):
                    with self._lock:
                        self._ended.add(source)
                self._inbox.put((source, msg))
        except (TransportError, ProtocolError, OSError) as exc:
            with self._lock:
                ended = source in self._ended
            if not ended and not self._closed:
                self._inbox.put((source, TransportError(f"worker {source}: {exc}")))

    def receive(self, timeout=None):
        try:
            source, msg = self._inbox.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError("no message") from None
        if isinstance(msg, Exception):
            raise msg
        return source, msg

    def send(self, dest, msg):
        with self._lock:
            conn = self._conns.get(dest)
        if conn is None:
            raise TransportError(f"no worker {dest}")
        try:
            conn.sendall(encode(msg))
        except OSError as exc:
            raise TransportError(f"send to worker {dest} failed: {exc}") from None

    def close(self):
        self._closed = True
        try:
            self._server.close()
        except OSError:
            pass
        with self._lock:
            conns = list(self._conns.values())
        for conn in conns:
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            conn.close()


class TcpWorkerTransport:
    def __init__(self, host: str, port: int, connect_timeout: float = 10.0):
        try:
            self._sock = socket.create_connection((host, port), timeout=connect_timeout)
        except OSError as exc:
            raise TransportError(f"cannot connect to {host}:{port}: {exc}") from None
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._sock.settimeout(None)

    def send(self, msg):
        try:
            self._sock.sendall(encode(msg))
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from None

    def receive(self, timeout=None):
        # the timeout only covers waiting for a frame to start, so a slow
        # frame is never cut in half
        if timeout is not None:
            ready, _, _ = select.select([self._sock], [], [], timeout)
            if not ready:
                raise TimeoutError("no message")
        try:
            return decode(_read_frame(self._sock), "coordinator")
        except TransportError:
            raise
        except OSError as exc:
            raise TransportError(f"receive failed: {exc}") from None

    def close(self):
        try:
            self._sock.close()
        except OSError:
            pass
