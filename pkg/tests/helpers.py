"""Shared generators and oracles for the tests."""
import itertools

import numpy as np

from pfspbb.bound import Subproblem
from pfspbb.instance import makespan, random_instance


def random_node(inst, rng, max_depth=None):
    n = inst.n
    perm = [int(j) for j in rng.permutation(n)]
    depth = int(rng.integers(0, n + 1 if max_depth is None else max_depth + 1))
    d1 = int(rng.integers(0, depth + 1))
    return Subproblem(perm, d1, depth - d1)


def random_open_node(inst, rng):
    """A node with at least one free job."""
    sub = random_node(inst, rng, max_depth=inst.n - 1)
    return sub


def completions(sub):
    """Every complete schedule below ``sub``."""
    for mid in itertools.permutations(sub.free):
        yield sub.prefix + mid + sub.suffix


def best_completion(inst, sub):
    return min(makespan(inst, p) for p in completions(sub))


def random_small_instance(rng, n_range=(2, 9), machines=(2, 3, 5)):
    n = int(rng.integers(*n_range))
    return random_instance(n, int(rng.choice(machines)), rng)


def interval_set(intervals):
    out = set()
    for a, b in intervals:
        out.update(range(a, b))
    return out


def rng_from(seed):
    return np.random.default_rng(seed)


# -- subprocess cluster ------------------------------------------------------
import os
import re
import subprocess
import sys
import time

CLI = [sys.executable, "-m", "pfspbb"]


def parse_stats(text):
    """``key=value`` lines and ``makespan:`` line of a CLI run."""
    out = {}
    for line in text.splitlines():
        if "=" in line and " " not in line.split("=", 1)[0]:
            k, v = line.split("=", 1)
            out[k] = v
        elif line.startswith("makespan: "):
            out["makespan"] = int(line.split()[1])
        elif line.startswith("schedule: "):
            out["schedule"] = tuple(int(t) for t in line.split()[1:])
    return out


def start_coordinator(instance_args, n_workers, extra=()):
    proc = subprocess.Popen(CLI + ["coordinator", *instance_args, "--listen", "127.0.0.1:0",
                                   "--workers", str(n_workers), *extra],
                            stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    line = proc.stdout.readline()
    m = re.match(r"listening on ([\d.]+):(\d+)", line)
    if not m:
        proc.kill()
        raise RuntimeError(f"coordinator did not start: {line!r} {proc.stderr.read()}")
    return proc, f"{m.group(1)}:{m.group(2)}"


def start_workers(instance_args, address, batch_sizes, explorers=2, extra=()):
    return [subprocess.Popen(CLI + ["worker", *instance_args, "--connect", address,
                                    "-K", str(explorers), "--batch-size", str(bs),
                                    "--checkpoint-period", "0.05", "--worker-id", str(i), *extra],
                             stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
            for i, bs in enumerate(batch_sizes)]


def finish(proc, timeout=120):
    out, err = proc.communicate(timeout=timeout)
    return proc.returncode, out, err


def run_cluster(instance_args, batch_sizes, coord_extra=(), explorers=2, timeout=120):
    """Coordinator plus one worker per batch size; returns (code, stats, worker codes, seconds)."""
    t0 = time.perf_counter()
    coord, address = start_coordinator(instance_args, len(batch_sizes), coord_extra)
    workers = start_workers(instance_args, address, batch_sizes, explorers)
    try:
        codes = [finish(w, timeout)[0] for w in workers]
        code, out, err = finish(coord, timeout)
    finally:
        for p in [coord, *workers]:
            if p.poll() is None:
                p.kill()
    return code, parse_stats(out), codes, time.perf_counter() - t0


# lines printed again in the terminal summary by conftest
ACCEPTANCE_LINES = []
