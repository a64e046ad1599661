import csv
import math

import numpy as np
import pytest

from pfspbb.bound import Subproblem
from pfspbb.explorer import (
    ExplorerPool,
    Incumbent,
    StepOutcome,
    explore_step,
    plan_steals,
    pool_run,
    promote,
    steal_right_half,
    write_timeline,
)
from pfspbb.factoradic import from_decimal, to_decimal
from pfspbb.instance import Instance, brute_force, makespan, random_instance
from pfspbb.ivm import IVM


def dec(v, n):
    return math.factorial(n) if v is None else to_decimal(v)


def test_step_on_empty_ivm(tiny):
    assert explore_step(IVM(2), tiny, Incumbent())[0] is StepOutcome.EXHAUSTED


def test_tiny_optimum(tiny):
    r = pool_run(tiny)
    assert r.makespan == 7 and r.schedule.perm == (0, 1) and r.improved and r.completed


def test_incumbent_is_monotone():
    inc = Incumbent()
    assert inc.offer(10, (0, 1))
    assert not inc.offer(10, (1, 0))
    assert not inc.offer(12, (1, 0))
    assert inc.offer(9)
    assert inc.value == 9 and inc.perm is None


def test_matches_brute_force(rng):
    for _ in range(30):
        inst = random_instance(int(rng.integers(1, 9)), int(rng.choice([2, 3, 5])), rng)
        best = brute_force(inst)
        k = int(rng.choice([1, 2, 3, 4, 8]))
        r = pool_run(inst, k, batch_size=int(rng.integers(1, 64)))
        assert r.makespan == best.cmax
        assert makespan(inst, r.schedule.perm) == best.cmax


def test_no_improvement_below_optimum(rng):
    for _ in range(15):
        inst = random_instance(int(rng.integers(3, 9)), 3, rng)
        opt = brute_force(inst).cmax
        r = pool_run(inst, 2, initial_ub=opt - 1, batch_size=16)
        assert not r.improved and r.schedule is None and r.completed
        r = pool_run(inst, 2, initial_ub=opt, batch_size=16)
        assert not r.improved


def test_multiprocess_pool(rng):
    inst = random_instance(9, 4, rng)
    best = brute_force(inst).cmax
    r = pool_run(inst, 4, n_procs=2, batch_size=32)
    assert r.makespan == best


def test_steal_right_half():
    (va, vm), (tm, tb) = steal_right_half(from_decimal(0, 4), None)
    assert to_decimal(va) == 0 and to_decimal(vm) == 12 and vm == tm and tb is None
    assert steal_right_half(from_decimal(5, 4), from_decimal(6, 4)) is None
    assert steal_right_half(from_decimal(0, 4), from_decimal(10, 4), min_length=11) is None


def test_steal_conserves_work(rng):
    n = 9
    total = math.factorial(n)
    for _ in range(500):
        a = int(rng.integers(0, total - 2))
        b = int(rng.integers(a + 2, total + 1))
        vb = None if b == total else from_decimal(b, n)
        (va, vm), (tm, tb) = steal_right_half(from_decimal(a, n), vb)
        assert to_decimal(va) == a and dec(tb, n) == b
        assert a < to_decimal(vm) == to_decimal(tm) < b


def test_plan_all_idle():
    assert plan_steals([0] * 16, 2) == []
    assert plan_steals([], 2) == []


def test_plan_hypercube_single_victim():
    lengths = [0] * 16
    lengths[5] = 1000
    plan = plan_steals(lengths, 2)
    assert len(plan) == 1 and plan[0][1] == 5
    thief = plan[0][0]
    # thief and victim differ in exactly one base-4 digit
    diff = [(thief // 4**d) % 4 != (5 // 4**d) % 4 for d in range(2)]
    assert sum(diff) == 1


def test_plan_fallback_largest_first():
    plan = plan_steals([0, 50, 0, 200, 0, 10], 2)
    assert plan == [(0, 3), (2, 1)]


def test_plan_respects_thresholds():
    # average is 40: the 30 and 40 intervals are not eligible
    assert plan_steals([0, 30, 130, 40, 0], 2) == [(0, 2)]
    assert plan_steals([0, 100, 0], 150) == []


def test_plan_victims_unique(rng):
    for _ in range(300):
        k = int(rng.choice([3, 4, 5, 8, 16, 64]))
        lengths = [0 if rng.random() < 0.5 else int(rng.integers(1, 10**6)) for _ in range(k)]
        plan = plan_steals(lengths, int(rng.integers(1, 1000)))
        thieves = [t for t, _ in plan]
        victims = [v for _, v in plan]
        assert len(set(victims)) == len(victims) and len(set(thieves)) == len(thieves)
        assert all(lengths[t] == 0 and lengths[v] > 0 for t, v in plan)


def test_pool_steal_activates_thieves(rng):
    inst = random_instance(12, 3, rng)
    with ExplorerPool(inst, 16, batch_size=4) as pool:
        pool.assign([(0, math.factorial(12))])
        pool.run_round(steps=0)
        assert pool.active_count >= 2
        victim = pool.intervals[0]
        assert to_decimal(victim[0]) == 0
        snap = pool.snapshot()
        assert sum(b - a for a, b in snap) == math.factorial(12)
        assert all(a2 >= b1 for (_, b1), (a2, _) in zip(snap, snap[1:]))


def test_pool_assign_errors(rng):
    inst = random_instance(4, 2, rng)
    with ExplorerPool(inst, 2) as pool:
        with pytest.raises(ValueError):
            pool.assign([(0, 2), (4, 6), (8, 10)])
        with pytest.raises(ValueError):
            pool.assign([(0, 25)])
    with pytest.raises(ValueError):
        ExplorerPool(inst, 0)


def test_initial_intervals_overlap(rng):
    inst = random_instance(4, 2, rng)
    with pytest.raises(ValueError, match="overlap"):
        pool_run(inst, 2, intervals=[(0, 10), (5, 20)])


def test_census_any_partition(rng):
    for n in (5, 6):
        inst = random_instance(n, 3, rng)
        total = math.factorial(n)
        cuts = sorted({0, total, *map(int, rng.integers(0, total, 5))})
        parts = list(zip(cuts, cuts[1:]))
        r = pool_run(inst, 8, intervals=parts, prune=False, record_leaves=True, batch_size=5)
        assert len(r.leaves) == len(set(r.leaves)) == total


def test_fixed_tree_across_k(rng):
    inst = random_instance(9, 6, rng)
    opt = brute_force(inst).cmax
    runs = {k: pool_run(inst, k, initial_ub=opt, record_leaves=True, batch_size=8) for k in (1, 2, 4, 8)}
    base = runs[1]
    for k, r in runs.items():
        assert sorted(r.leaves) == sorted(base.leaves)
        assert len(r.leaves) == len(set(r.leaves))
        slack = (r.stats.intervals - 1) * inst.n
        assert abs(r.stats.decomposed - base.stats.decomposed) <= max(slack, 0)


def test_promote_rule():
    inst = Instance(np.array([[1, 2], [3, 4], [5, 6]]))
    sched = promote(inst, Subproblem((1, 0, 2), 1, 0), (2, 0, 1))
    assert sched.perm == (1, 2, 0)
    assert sched.cmax == makespan(inst, (1, 2, 0))
    full = promote(inst, Subproblem((2, 1, 0), 2, 1), (0, 1, 2))
    assert full.perm == (2, 1, 0)


def test_promote_solutions_best_first(rng):
    inst = random_instance(10, 4, rng)
    with ExplorerPool(inst, 4, batch_size=16) as pool:
        pool.assign([(0, math.factorial(10))])
        pool.run_round()
        sols = pool.promote_solutions(3)
    assert 1 <= len(sols) <= 3
    assert [s.cmax for s in sols] == sorted(s.cmax for s in sols)
    for s in sols:
        assert makespan(inst, s.perm) == s.cmax


def test_time_limit(rng):
    inst = random_instance(14, 10, rng)
    r = pool_run(inst, 2, time_limit=0.2, batch_size=64)
    assert not r.completed


def test_timeline(rng, tmp_path):
    inst = random_instance(8, 3, rng)
    r = pool_run(inst, 4, timeline=True, batch_size=16)
    assert r.timeline
    for t, i, active, length in r.timeline:
        assert 0 <= i < 4 and active in (0, 1)
        assert (active == 0) == (length == 0.0) or active == 1
    path = tmp_path / "tl.csv"
    write_timeline(r.timeline, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["timestamp_ms", "explorer_id", "active", "interval_length_log2"]
    assert len(rows) == len(r.timeline) + 1
    # samples come in groups of K, one per explorer
    assert len(r.timeline) % 4 == 0
