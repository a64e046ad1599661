"""Flow-shop instances: representation, file I/O, Taillard generation, makespan."""
from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._validation import check_permutation, check_processing_times

__all__ = [
    "Instance",
    "Schedule",
    "load_instance",
    "save_instance",
    "generate_taillard",
    "taillard",
    "TAILLARD_SEEDS",
    "makespan",
    "completion_times",
    "brute_force",
    "random_instance",
]

# (n, m, time seed) for the published Taillard PFSP instances materialized here.
TAILLARD_SEEDS: dict[str, tuple[int, int, int]] = {}
_CLASSES = [
    (20, 5, 1, [873654221, 379008056, 1866992158, 216771124, 495070989,
                402959317, 1369363414, 2021925980, 573109518, 88325120]),
    (20, 10, 11, [587595453, 1401007982, 873136276, 268827376, 1634173168,
                  691823909, 73807235, 1273398721, 2065119309, 1672900551]),
    (20, 20, 21, [479340445, 268827376, 1958948863, 918272953, 555010963,
                  2010851491, 1519833303, 1748670931, 1923497586, 1829909967]),
]
for _n, _m, _first, _seeds in _CLASSES:
    for _i, _s in enumerate(_seeds):
        TAILLARD_SEEDS[f"ta{_first + _i:03d}"] = (_n, _m, _s)

_LCG_MOD = 2**31 - 1
_LCG_MUL = 16807
_LCG_Q = _LCG_MOD // _LCG_MUL  # 127773
_LCG_R = _LCG_MOD % _LCG_MUL  # 2836


@dataclass(frozen=True, eq=False)
class Instance:
    """n jobs by m machines; ``p[j, k]`` is the time of job ``j`` on machine ``k``.

    The matrix is stored read-only, so one instance can be shared by any
    number of explorers.
    """

    p: np.ndarray
    label: str = ""
    rows: tuple = field(init=False, repr=False)

    def __post_init__(self):
        arr = check_processing_times(self.p).astype(np.int32)
        arr.setflags(write=False)
        object.__setattr__(self, "p", arr)
        object.__setattr__(self, "rows", tuple(tuple(int(x) for x in r) for r in arr))

    @property
    def n(self) -> int:
        return self.p.shape[0]

    @property
    def m(self) -> int:
        return self.p.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return np.array_equal(self.p, other.p)

    def __hash__(self):
        return hash(self.fingerprint())

    def fingerprint(self) -> str:
        """``"<n> <m> <sha256 of p>"``, stable across label changes."""
        digest = hashlib.sha256(np.ascontiguousarray(self.p, dtype="<i4").tobytes()).hexdigest()
        return f"{self.n} {self.m} {digest}"

    def reversed(self) -> "Instance":
        """Mirror instance: machine order reversed for every job."""
        return Instance(self.p[:, ::-1].copy(), label=f"{self.label}-rev")


@dataclass
class Schedule:
    perm: tuple
    cmax: int | None = None

    def __post_init__(self):
        self.perm = tuple(int(j) for j in self.perm)


def load_instance(path, layout: str = "jobs", label: str | None = None) -> Instance:
    """Read a whitespace-separated instance file.

    The first two integers are ``n`` and ``m``.  With ``layout="jobs"`` the
    matrix follows with one row per job; with ``layout="machines"`` (the
    layout of the published Taillard files) one row per machine.  Lines
    starting with ``#`` are ignored.
    """
    path = Path(path)
    if layout not in ("jobs", "machines"):
        raise ValueError(f"layout must be 'jobs' or 'machines', got {layout!r}")
    lines = [ln.split("#", 1)[0] for ln in path.read_text().splitlines()]
    lines = [ln.split() for ln in lines if ln.strip()]
    if not lines or len(lines[0]) < 2:
        raise ValueError(f"{path}: header must hold n and m")
    try:
        n, m = int(lines[0][0]), int(lines[0][1])
        body = [[int(tok) for tok in ln] for ln in lines[1:]]
    except ValueError as exc:
        raise ValueError(f"{path}: non-integer token ({exc})") from None
    if len(lines[0]) != 2:
        raise ValueError(f"{path}: header must hold exactly n and m")
    if n < 1 or m < 1:
        raise ValueError(f"{path}: n and m must be >= 1, got {n} {m}")
    want_rows, want_cols = (n, m) if layout == "jobs" else (m, n)
    if len(body) != want_rows or any(len(r) != want_cols for r in body):
        shape = (len(body), sorted({len(r) for r in body}))
        raise ValueError(
            f"{path}: dimension mismatch, header says {want_rows} rows of "
            f"{want_cols} values, got {shape[0]} rows of {shape[1]}"
        )
    mat = np.array(body, dtype=np.int64)
    if layout == "machines":
        mat = mat.T
    if (mat < 0).any():
        raise ValueError(f"{path}: negative processing time")
    return Instance(mat, label=label if label is not None else path.stem)


def save_instance(inst: Instance, path, layout: str = "jobs") -> None:
    mat = inst.p if layout == "jobs" else inst.p.T
    lines = [f"{inst.n} {inst.m}"] + [" ".join(str(int(x)) for x in r) for r in mat]
    Path(path).write_text("\n".join(lines) + "\n")


def _unif(seed: int, low: int, high: int) -> tuple[int, int]:
    k = seed // _LCG_Q
    seed = _LCG_MUL * (seed % _LCG_Q) - k * _LCG_R
    if seed < 0:
        seed += _LCG_MOD
    return low + int(seed / _LCG_MOD * (high - low + 1)), seed


def generate_taillard(n: int, m: int, seed: int, label: str | None = None) -> Instance:
    """Taillard's generator: times uniform in [1, 99], drawn machine by machine."""
    if not 1 <= seed <= _LCG_MOD - 1:
        raise ValueError(f"seed must be in [1, 2^31-2], got {seed}")
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    p = np.zeros((n, m), dtype=np.int64)
    for k in range(m):
        for j in range(n):
            p[j, k], seed = _unif(seed, 1, 99)
    return Instance(p, label=label or f"taillard-{n}x{m}-{seed}")


def taillard(name: str) -> Instance:
    """Materialize a named benchmark instance, e.g. ``taillard("ta021")``."""
    key = name.lower()
    if key.startswith("ta") and key[2:].isdigit():
        key = f"ta{int(key[2:]):03d}"
    try:
        n, m, seed = TAILLARD_SEEDS[key]
    except KeyError:
        raise ValueError(f"unknown Taillard instance {name!r}") from None
    return generate_taillard(n, m, seed, label=key)


def completion_times(inst: Instance, perm: Sequence[int]) -> list[int]:
    """Per-machine completion times of the last job of ``perm`` (may be partial)."""
    rows = inst.rows
    front = [0] * inst.m
    for j in perm:
        pj = rows[j]
        t = 0
        for k, f in enumerate(front):
            t = (f if f > t else t) + pj[k]
            front[k] = t
    return front


def makespan(inst: Instance, perm) -> int:
    if isinstance(perm, Schedule):
        perm = perm.perm
    perm = check_permutation(perm, inst.n)
    return completion_times(inst, perm)[-1]


def brute_force(inst: Instance, max_n: int = 10) -> Schedule:
    """Enumerate all ``n!`` schedules; the reference oracle for small instances.

    Vectorized over permutations so it shares no code with :func:`makespan`.
    Ties resolve to the lexicographically smallest permutation.
    """
    if inst.n > max_n:
        raise ValueError(f"brute force refused for n={inst.n} > {max_n}")
    perms = np.array(list(itertools.permutations(range(inst.n))), dtype=np.int8)
    p = inst.p.astype(np.int64)
    comp = np.zeros((len(perms), inst.m), dtype=np.int64)
    for pos in range(inst.n):
        times = p[perms[:, pos]]  # (n!, m)
        prev = np.zeros(len(perms), dtype=np.int64)
        for k in range(inst.m):
            prev = np.maximum(prev, comp[:, k]) + times[:, k]
            comp[:, k] = prev
    best = int(np.argmin(comp[:, -1]))
    return Schedule(tuple(int(j) for j in perms[best]), int(comp[best, -1]))


def random_instance(n: int, m: int, rng: np.random.Generator | int | None = None,
                    high: int = 99) -> Instance:
    rng = np.random.default_rng(rng)
    return Instance(rng.integers(1, high + 1, size=(n, m)), label=f"random-{n}x{m}")


def machine_load_bound(inst: Instance) -> int:
    return int(inst.p.sum(axis=0).max())


def job_length_bound(inst: Instance) -> int:
    return int(inst.p.sum(axis=1).max())
