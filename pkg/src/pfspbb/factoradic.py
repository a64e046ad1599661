"""Factorial-number-system position vectors.

A vector of length ``n`` has digit ``l`` in ``[0, n-1-l]`` with weight
``(n-1-l)!``; digit 0 is the most significant and the last digit is always 0.
Such vectors number the ``n!`` leaves of a permutation tree from left to
right.  Decimal equivalents are plain Python ints.
"""
from __future__ import annotations

import math
from typing import Sequence

__all__ = [
    "to_decimal",
    "from_decimal",
    "compare",
    "midpoint",
    "add",
    "halve",
    "check_digits",
    "int_to_bytes",
    "int_from_bytes",
]


def check_digits(v: Sequence[int]) -> tuple:
    n = len(v)
    for level, d in enumerate(v):
        if not 0 <= d <= n - 1 - level:
            raise ValueError(f"digit {d} at level {level} outside [0, {n - 1 - level}]")
    return tuple(v)


def to_decimal(v: Sequence[int]) -> int:
    check_digits(v)
    # Horner over the mixed radices n, n-1, ..., 1
    n = len(v)
    x = 0
    for level, d in enumerate(v):
        x = x * (n - level) + d
    return x


def from_decimal(x: int, n: int) -> tuple:
    if x < 0 or x >= math.factorial(n):
        raise ValueError(f"{x} outside [0, {n}!)")
    digits = [0] * n
    for level in range(n - 1, -1, -1):
        radix = n - level
        x, digits[level] = divmod(x, radix)
    return tuple(digits)


def compare(a: Sequence[int], b: Sequence[int]) -> int:
    """-1, 0 or 1 as ``a`` is below, equal to or above ``b``."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    a, b = tuple(a), tuple(b)
    return (a > b) - (a < b)


def add(a: Sequence[int], b: Sequence[int]) -> tuple[int, tuple]:
    """Digit-wise sum; returns ``(carry, digits)`` with ``carry`` worth ``n!``."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    n = len(a)
    out = [0] * n
    carry = 0
    for level in range(n - 1, -1, -1):
        carry, out[level] = divmod(a[level] + b[level] + carry, n - level)
    return carry, tuple(out)


def halve(carry: int, v: Sequence[int]) -> tuple:
    """Floor of ``(carry * n! + v) / 2``, the carry being 0 or 1."""
    n = len(v)
    out = [0] * n
    rem = carry
    for level in range(n):
        out[level], rem = divmod(rem * (n - level) + v[level], 2)
    return tuple(out)


def midpoint(a: Sequence[int], b: Sequence[int]) -> tuple:
    """``floor((a + b) / 2)`` computed on the digit vectors.

    ``b`` may equal ``n!``, which has no vector form; pass ``None`` for it.
    """
    if b is None:
        # n! is the carry alone
        carry, total = 1, tuple(a)
    else:
        if compare(a, b) >= 0:
            raise ValueError("midpoint needs a < b")
        carry, total = add(a, b)
    return halve(carry, total)


def int_to_bytes(x: int) -> bytes:
    """Big-endian magnitude, minimal length (zero is the empty string)."""
    if x < 0:
        raise ValueError("negative count")
    return x.to_bytes((x.bit_length() + 7) // 8, "big")


def int_from_bytes(data: bytes) -> int:
    if data[:1] == b"\x00":
        raise ValueError("non-minimal encoding: leading zero byte")
    return int.from_bytes(data, "big")
