"""Work units: sorted unions of disjoint half-open intervals of leaf indices."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

__all__ = [
    "Interval",
    "WorkUnit",
    "normalize",
    "intersect_units",
    "subtract_units",
    "split_unit",
    "unit_size",
]


class Interval(NamedTuple):
    a: int
    b: int

    @property
    def length(self) -> int:
        return self.b - self.a


@dataclass
class WorkUnit:
    id: int
    intervals: list = field(default_factory=list)
    kmax: int = 1
    modified: bool = False

    @property
    def size(self) -> int:
        return unit_size(self.intervals)

    def __bool__(self):
        return bool(self.intervals)


def normalize(intervals: Iterable) -> list:
    """Sorted, non-empty, overlap-free interval list.

    Overlapping intervals are merged; intervals that merely touch
    (``[a, b)`` and ``[b, c)``) stay separate.
    """
    items = []
    for iv in intervals:
        a, b = int(iv[0]), int(iv[1])
        if a > b:
            raise ValueError(f"interval [{a}, {b}) has start after end")
        if a < 0:
            raise ValueError(f"interval [{a}, {b}) starts below zero")
        if a < b:
            items.append((a, b))
    items.sort()
    out: list = []
    for a, b in items:
        if out and a < out[-1].b:
            if b > out[-1].b:
                out[-1] = Interval(out[-1].a, b)
        else:
            out.append(Interval(a, b))
    return out


def intersect_units(first, second) -> list:
    """Intersection of two normalized interval lists in one merge pass."""
    out = []
    i = j = 0
    while i < len(first) and j < len(second):
        a1, b1 = first[i]
        a2, b2 = second[j]
        lo = a1 if a1 > a2 else a2
        hi = b1 if b1 < b2 else b2
        if lo < hi:
            out.append(Interval(lo, hi))
        if b1 <= b2:
            i += 1
        else:
            j += 1
    return out


def subtract_units(first, second) -> list:
    """Parts of ``first`` not covered by ``second`` (both normalized)."""
    out = []
    j = 0
    for a, b in first:
        while j < len(second) and second[j][1] <= a:
            j += 1
        k = j
        lo = a
        while k < len(second) and second[k][0] < b:
            sa, sb = second[k]
            if sa > lo:
                out.append(Interval(lo, sa))
            lo = max(lo, sb)
            k += 1
        if lo < b:
            out.append(Interval(lo, b))
    return out


def split_unit(victim: WorkUnit, kmax: int, new_id: int = -1) -> WorkUnit:
    """Move the right halves of the victim's first ``kmax`` splittable intervals to a new unit.

    Intervals shorter than 2 are skipped.  The victim is marked modified when
    anything moves.
    """
    kept = []
    taken = []
    for a, b in victim.intervals:
        if len(taken) < kmax and b - a >= 2:
            mid = (a + b) // 2
            kept.append(Interval(a, mid))
            taken.append(Interval(mid, b))
        else:
            kept.append(Interval(a, b))
    if taken:
        victim.intervals = kept
        victim.modified = True
    return WorkUnit(new_id, taken, kmax)


def unit_size(intervals) -> int:
    return sum(b - a for a, b in intervals)
