import pytest
from hypothesis import given
from hypothesis import strategies as st

from pfspbb.workunit import (
    Interval,
    WorkUnit,
    intersect_units,
    normalize,
    split_unit,
    subtract_units,
    unit_size,
)

from helpers import interval_set

raw_intervals = st.lists(
    st.tuples(st.integers(0, 200), st.integers(0, 40)).map(lambda t: (t[0], t[0] + t[1])),
    max_size=8,
)


def test_normalize_examples():
    assert normalize([(5, 5), (0, 3)]) == [(0, 3)]
    assert normalize([(0, 4), (2, 6)]) == [(0, 6)]
    assert normalize([]) == []
    assert normalize([(3, 5), (0, 3)]) == [(0, 3), (3, 5)]  # touching stays split
    assert normalize([(0, 10), (2, 3)]) == [(0, 10)]
    with pytest.raises(ValueError):
        normalize([(4, 2)])


@given(raw_intervals)
def test_normalize_is_canonical(ivs):
    out = normalize(ivs)
    assert normalize(out) == out
    assert interval_set(out) == interval_set(ivs)
    assert all(a < b for a, b in out)
    assert all(b1 <= a2 for (_, b1), (a2, _) in zip(out, out[1:]))


def test_intersect_examples():
    assert intersect_units([(3, 10)], [(5, 20)]) == [(5, 10)]
    assert intersect_units([(0, 4), (8, 12)], [(2, 9)]) == [(2, 4), (8, 9)]
    a = [Interval(0, 4), Interval(8, 12)]
    assert intersect_units(a, a) == a


@given(raw_intervals, raw_intervals, raw_intervals)
def test_intersect_set_algebra(x, y, z):
    x, y, z = normalize(x), normalize(y), normalize(z)
    xy = intersect_units(x, y)
    assert interval_set(xy) == interval_set(x) & interval_set(y)
    assert interval_set(intersect_units(y, x)) == interval_set(xy)
    assert interval_set(intersect_units(xy, z)) == interval_set(intersect_units(x, intersect_units(y, z)))
    assert unit_size(xy) <= min(unit_size(x), unit_size(y))


@given(raw_intervals, raw_intervals)
def test_subtract(x, y):
    x, y = normalize(x), normalize(y)
    assert interval_set(subtract_units(x, y)) == interval_set(x) - interval_set(y)


def test_split_examples():
    v = WorkUnit(1, [Interval(0, 8)])
    new = split_unit(v, 4, new_id=2)
    assert new.intervals == [(4, 8)] and v.intervals == [(0, 4)] and v.modified
    v = WorkUnit(1, normalize([(0, 8), (10, 20), (30, 31)]))
    new = split_unit(v, 2)
    assert new.intervals == [(4, 8), (15, 20)]
    assert v.intervals == [(0, 4), (10, 15), (30, 31)]


def test_split_unsplittable():
    v = WorkUnit(1, [Interval(0, 1), Interval(5, 6)])
    new = split_unit(v, 3)
    assert not new and not v.modified


@given(raw_intervals, st.integers(1, 10))
def test_split_conserves(ivs, kmax):
    v = WorkUnit(0, normalize(ivs))
    before = interval_set(v.intervals)
    size = v.size
    new = split_unit(v, kmax)
    assert new.size + v.size == size
    assert interval_set(new.intervals) | interval_set(v.intervals) == before
    assert not interval_set(new.intervals) & interval_set(v.intervals)
    assert len(new.intervals) <= kmax


def test_unit_size():
    assert unit_size([]) == 0
    assert unit_size([(0, 9), (9, 15), (16, 24)]) == 23
