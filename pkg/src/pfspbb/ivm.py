"""Integer-vector-matrix state of one depth-first explorer.

Row ``l`` of the matrix holds the ``n - l`` jobs that can be scheduled at
tree level ``l``; the position vector says which cell of each row lies on the
current path, and ``depth`` is the level of the current node.  A cell holding
``~job`` (a negative value) is pruned or already visited.  Each row also has a
direction saying whether its job goes to the front or to the back of the
schedule.

The position vector read as a factoradic number is the index of the leftmost
leaf below the current node, so an explorer restricted to ``[a, b)`` simply
stops once that index reaches ``b``.
"""
from __future__ import annotations

import enum
import math

from .bound import Decomposition, Direction, Subproblem, decompose
from .factoradic import check_digits, to_decimal
from .instance import Instance

__all__ = ["IVM", "State"]


class State(enum.Enum):
    EMPTY = "empty"
    ACTIVE = "active"
    INITIALIZING = "initializing"


class IVM:
    def __init__(self, n: int):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.n = n
        self.depth = -1
        self.position = [0] * n
        self.matrix = [list(range(n - level)) for level in range(n)]
        self.directions = [Direction.FORWARD] * n
        self.end: list | None = None  # None stands for n!, which has no vector form
        self.state = State.EMPTY

    # -- selection -------------------------------------------------------
    def select_next(self) -> bool:
        """Move to the deepest leftmost open cell; False once the interval is done.

        Calling it again without branching or consuming is a no-op.
        """
        if self.state is not State.ACTIVE:
            return False
        pos = self.position
        mat = self.matrix
        level = self.depth
        while level >= 0:
            row = mat[level]
            v = pos[level]
            size = len(row)
            while v < size and row[v] < 0:
                v += 1
            if v < size:
                pos[level] = v
                break
            # row exhausted: backtrack
            pos[level] = 0
            level -= 1
            if level >= 0:
                pos[level] += 1
        self.depth = level
        # deeper entries of pos are all zero, so this is the padded comparison
        if level < 0 or (self.end is not None and pos >= self.end):
            self._exhaust()
            return False
        return True

    def _exhaust(self):
        self.state = State.EMPTY
        self.depth = -1
        self.position = [0] * self.n

    def consume(self):
        """Mark the current cell as visited (used after evaluating a leaf)."""
        row = self.matrix[self.depth]
        v = self.position[self.depth]
        if row[v] >= 0:
            row[v] = ~row[v]

    # -- decoding and branching ------------------------------------------
    def decode(self) -> Subproblem:
        level = self.depth
        if level < 0:
            raise ValueError("no node selected")
        mat = self.matrix
        pos = self.position
        dirs = self.directions
        prefix = []
        suffix = []
        for lv in range(level + 1):
            job = mat[lv][pos[lv]]
            if job < 0:
                job = ~job
            if dirs[lv] == Direction.FORWARD:
                prefix.append(job)
            else:
                suffix.append(job)
        suffix.reverse()
        sel = pos[level]
        free = [c if c >= 0 else ~c for i, c in enumerate(mat[level]) if i != sel]
        return Subproblem(prefix + free + suffix, len(prefix), len(suffix))

    def branch(self, dec: Decomposition):
        """Open the current node: its free jobs become the next row."""
        level = self.depth
        if level >= self.n - 1:
            raise ValueError("cannot branch a leaf")
        sel = self.position[level]
        row = [c if c >= 0 else ~c for i, c in enumerate(self.matrix[level]) if i != sel]
        if len(dec.pruned) != len(row):
            raise ValueError(f"decomposition has {len(dec.pruned)} children, node has {len(row)}")
        for i, pruned in enumerate(dec.pruned):
            if pruned:
                row[i] = ~row[i]
        self.matrix[level + 1] = row
        self.directions[level + 1] = dec.direction
        self.depth = level + 1
        self.position[level + 1] = 0

    def set_root(self, dec: Decomposition):
        """Fill row 0 from the decomposition of the root (natural job order)."""
        row = list(range(self.n))
        for i, pruned in enumerate(dec.pruned):
            if pruned:
                row[i] = ~row[i]
        self.matrix[0] = row
        self.directions[0] = dec.direction
        self.depth = 0
        self.position = [0] * self.n

    # -- intervals -------------------------------------------------------
    def init_at(self, a, b, inst: Instance, incumbent=math.inf) -> int:
        """Restrict the explorer to ``[a, b)`` and replay the path to ``a``.

        ``a`` and ``b`` are factoradic vectors; ``b=None`` means ``n!``.
        Returns the number of node decompositions the replay performed.
        """
        n = self.n
        a = list(check_digits(a))
        if len(a) != n:
            raise ValueError(f"start vector has length {len(a)}, expected {n}")
        if b is not None:
            b = list(check_digits(b))
            if len(b) != n:
                raise ValueError(f"end vector has length {len(b)}, expected {n}")
            if a > b:
                raise ValueError("interval start lies after its end")
            if a == b:
                self.end = b
                self._exhaust()
                return 0
        self.state = State.INITIALIZING
        self.end = b
        root = Subproblem(list(range(n)), 0, 0)
        self.set_root(decompose(inst, root, incumbent))
        replayed = 1
        for level in range(n):
            row = self.matrix[level]
            digit = a[level]
            for c in range(min(digit, len(row))):
                if row[c] >= 0:
                    row[c] = ~row[c]
            self.position[level] = digit
            self.depth = level
            if row[digit] < 0 or level >= n - 2:
                # path died, or the node is a leaf left for the explorer
                break
            self.branch(decompose(inst, self.decode(), incumbent))
            replayed += 1
        self.state = State.ACTIVE
        return replayed

    def position_decimal(self) -> int:
        return to_decimal(self.position)

    def interval(self):
        """``(start, end)`` vectors of the remaining work, or None when empty."""
        if self.state is State.EMPTY:
            return None
        return tuple(self.position), (None if self.end is None else tuple(self.end))

    def set_end(self, end):
        self.end = None if end is None else list(end)

    def clear(self):
        self.end = None
        self._exhaust()

    def check_invariants(self):
        """Raise AssertionError if the matrix or position vector is inconsistent."""
        n = self.n
        for level in range(n):
            assert len(self.matrix[level]) == n - level, f"row {level} has wrong length"
        if self.state is State.EMPTY:
            return
        seen = set()
        for level in range(self.depth + 1):
            row = self.matrix[level]
            vals = [c if c >= 0 else ~c for c in row]
            assert len(set(vals)) == len(vals), f"row {level} repeats a job"
            assert 0 <= self.position[level] < len(row), f"position out of row {level}"
            job = vals[self.position[level]]
            assert job not in seen, f"job {job} selected twice"
            seen.add(job)
            if level > 0:
                prev = [c if c >= 0 else ~c for c in self.matrix[level - 1]]
                del prev[self.position[level - 1]]
                assert prev == vals, f"row {level} is not its parent row minus the selection"
        assert all(v == 0 for v in self.position[self.depth + 1:]), "non-zero digits below depth"
