import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pfspbb.bound import (
    BoundTables,
    Direction,
    Subproblem,
    bound_tables,
    children_bounds,
    decompose,
    decompose_bounds,
    lb1,
    min_min,
)
from pfspbb.instance import Instance, makespan, random_instance

from helpers import best_completion, random_node, random_open_node


def test_tables_at_root(tiny):
    t = bound_tables(tiny, Subproblem([0, 1]))
    assert t.front == [0, 0] and t.tail == [0, 0] and t.remain == [6, 4]


def test_tables_with_prefix(tiny):
    t = bound_tables(tiny, Subproblem([0, 1], 1, 0))
    assert (t.front, t.remain, t.tail) == ([2, 5], [4, 1], [0, 0])


def test_tables_with_suffix(tiny):
    # job 1 alone at the end: 4 + 1 from the first machine, 1 from the last
    t = bound_tables(tiny, Subproblem([0, 1], 0, 1))
    assert t.tail == [5, 1]
    assert t.remain == [2, 3]


def test_lb1_arithmetic():
    t = BoundTables(front=[8, 10, 11], tail=[11, 7, 6], remain=[8, 6, 9])
    assert t.lower_bound() == 27


def test_lb1_root(tiny):
    assert lb1(tiny, Subproblem([0, 1])) == 6


def test_root_children(tiny):
    # job 0 first: front (2, 5), job 1 left: max(2 + 4, 5 + 1) = 6
    # job 1 first: front (4, 5), job 0 left: max(4 + 2, 5 + 3) = 8
    fwd, bwd = children_bounds(tiny, Subproblem([0, 1]))
    assert fwd == [6, 8]
    assert bwd == [lb1(tiny, Subproblem([1, 0], 0, 1)), lb1(tiny, Subproblem([0, 1], 0, 1))]


def test_single_free_job_children_are_the_leaf(rng):
    for _ in range(50):
        inst = random_instance(int(rng.integers(1, 8)), int(rng.integers(1, 6)), rng)
        perm = [int(j) for j in rng.permutation(inst.n)]
        d1 = int(rng.integers(0, inst.n))
        sub = Subproblem(perm, d1, inst.n - 1 - d1)
        fwd, bwd = children_bounds(inst, sub)
        assert fwd == bwd == [makespan(inst, perm)]
        assert decompose(inst, sub, math.inf).direction == Direction.FORWARD


def test_children_need_free_job(tiny):
    with pytest.raises(ValueError, match="no free job"):
        children_bounds(tiny, Subproblem([0, 1], 1, 1))
    with pytest.raises(ValueError):
        decompose(tiny, Subproblem([0, 1], 2, 0), 10)


def test_leaf_bound_is_makespan(rng):
    for _ in range(200):
        inst = random_instance(int(rng.integers(1, 10)), int(rng.integers(1, 6)), rng)
        perm = [int(j) for j in rng.permutation(inst.n)]
        d1 = int(rng.integers(0, inst.n + 1))
        assert lb1(inst, Subproblem(perm, d1, inst.n - d1)) == makespan(inst, perm)


def test_admissible_and_monotone(rng):
    for _ in range(300):
        inst = random_instance(int(rng.integers(2, 8)), int(rng.integers(1, 6)), rng)
        sub = random_open_node(inst, rng)
        bound = lb1(inst, sub)
        assert bound <= best_completion(inst, sub)
        for job in sub.free:
            for d in Direction:
                assert lb1(inst, sub.child(job, d)) >= bound


def test_incremental_matches_direct(rng):
    for _ in range(500):
        inst = random_instance(int(rng.integers(1, 12)), int(rng.integers(1, 8)), rng)
        sub = random_open_node(inst, rng)
        fwd, bwd = children_bounds(inst, sub)
        assert fwd == [lb1(inst, sub.child(j, Direction.FORWARD)) for j in sub.free]
        assert bwd == [lb1(inst, sub.child(j, Direction.BACKWARD)) for j in sub.free]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 50), min_size=1, max_size=8).flatmap(
    lambda f: st.tuples(st.just(f), st.lists(st.integers(0, 50), min_size=len(f), max_size=len(f)))))
def test_min_min_rule(pair):
    fwd, bwd = pair
    low = min(min(fwd), min(bwd))
    cf, cb = fwd.count(low), bwd.count(low)
    d = min_min(fwd, bwd)
    if cf != cb:
        assert d == (Direction.FORWARD if cf < cb else Direction.BACKWARD)
    elif sum(fwd) != sum(bwd):
        assert d == (Direction.FORWARD if sum(fwd) > sum(bwd) else Direction.BACKWARD)
    else:
        assert d == Direction.FORWARD


def test_min_min_examples():
    dec = decompose_bounds([19, 17, 17], [21, 17, 19], 18)
    assert dec.direction == Direction.BACKWARD
    assert dec.pruned == [True, False, True] and dec.n_pruned == 2
    assert min_min([5, 5], [5, 6]) == Direction.BACKWARD
    assert min_min([3, 4, 5], [3, 4, 5]) == Direction.FORWARD


def test_prune_threshold_is_inclusive():
    dec = decompose_bounds([10, 11, 12], [10, 10, 20], 11)
    assert dec.direction == Direction.FORWARD
    assert dec.pruned == [False, True, True]


def test_direction_ignores_incumbent(rng):
    for _ in range(100):
        inst = random_instance(int(rng.integers(2, 10)), 4, rng)
        sub = random_open_node(inst, rng)
        dirs = {decompose(inst, sub, ub).direction for ub in (1, 100, 10**6, math.inf)}
        assert len(dirs) == 1
        dec = decompose(inst, sub, math.inf)
        assert not any(dec.pruned)
        assert len(dec.child_lb) == len(dec.pruned) == len(sub.free)


def test_subproblem_validate():
    Subproblem([2, 0, 1], 1, 1).validate(3)
    with pytest.raises(ValueError):
        Subproblem([0, 0, 1]).validate()
    with pytest.raises(ValueError):
        Subproblem([0, 1], 2, 1).validate()
    with pytest.raises(ValueError):
        Subproblem([0, 1]).validate(3)


def test_child_construction():
    sub = Subproblem([3, 0, 1, 2, 4], 1, 1)
    assert sub.child(1, Direction.FORWARD) == Subproblem((3, 1, 0, 2, 4), 2, 1)
    assert sub.child(1, Direction.BACKWARD) == Subproblem((3, 0, 2, 1, 4), 1, 2)
