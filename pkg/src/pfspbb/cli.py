"""Command-line entry points.

Exit codes: 0 optimum proved, 2 search finished without beating the initial
upper bound, 3 time limit reached first, 1 error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

from .coordinator import CheckpointError, Coordinator
from .explorer import pool_run, write_timeline
from .heuristic import neh
from .instance import brute_force, generate_taillard, load_instance, save_instance, taillard
from .protocol import TcpCoordinatorTransport, TcpWorkerTransport, TransportError
from .worker import WorkerConfig, worker_run

EXIT_OPTIMAL = 0
EXIT_ERROR = 1
EXIT_NO_IMPROVEMENT = 2
EXIT_TIME_LIMIT = 3
BRUTE_FORCE_MAX_N = 10


class CliError(Exception):
    pass


def _default_explorers() -> int:
    return 2 * (os.cpu_count() or 1)


def _add_instance_args(p: argparse.ArgumentParser):
    src = p.add_argument_group("instance (give exactly one)")
    src.add_argument("instance", nargs="?", help="instance file")
    src.add_argument("--taillard", metavar="NAME", help="named benchmark instance, e.g. ta021")
    src.add_argument("--generate", nargs=3, type=int, metavar=("N", "M", "SEED"),
                     help="generate an instance with the benchmark generator")
    src.add_argument("--layout", choices=("jobs", "machines"), default="jobs",
                     help="file layout: one row per job (default) or per machine")


def _add_ub_args(p: argparse.ArgumentParser):
    p.add_argument("--initial-ub", type=int, help="only search for schedules strictly below this")
    p.add_argument("--ub-from-heuristic", action="store_true",
                   help="start from the NEH schedule")


def _load(args):
    given = [x for x in (args.instance, args.taillard, args.generate) if x]
    if len(given) != 1:
        raise CliError("give exactly one of: an instance file, --taillard, --generate")
    if args.taillard:
        return taillard(args.taillard)
    if args.generate:
        n, m, seed = args.generate
        return generate_taillard(n, m, seed)
    try:
        return load_instance(args.instance, layout=args.layout)
    except OSError as exc:
        raise CliError(f"cannot read {args.instance}: {exc.strerror or exc}") from None


def _initial_bound(args, inst):
    if args.initial_ub is not None and args.ub_from_heuristic:
        raise CliError("--initial-ub and --ub-from-heuristic are exclusive")
    if args.initial_ub is not None:
        if args.initial_ub <= 0:
            raise CliError("--initial-ub must be positive")
        return args.initial_ub, None
    if args.ub_from_heuristic:
        seed = neh(inst)
        return seed.cmax, seed.perm
    return math.inf, None


def _address(text: str):
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise CliError(f"address must be host:port, got {text!r}")
    return host or "127.0.0.1", int(port)


def _fmt(x):
    return "none" if x is None or x == math.inf else x


def _emit_stats(stats: dict, path):
    for key in sorted(stats):
        print(f"{key}={_fmt(stats[key])}")
    if path:
        clean = {k: (None if v == math.inf else v) for k, v in stats.items()}
        Path(path).write_text(json.dumps(clean, indent=2, default=str) + "\n")


# -- subcommands -------------------------------------------------------------
def cmd_solve(args) -> int:
    inst = _load(args)
    ub, start = _initial_bound(args, inst)
    k = args.explorers or _default_explorers()
    t0 = time.perf_counter()
    result = pool_run(inst, k, initial_ub=ub, n_procs=args.threads, batch_size=args.batch_size,
                      time_limit=args.time_limit, initial_schedule=start,
                      timeline=args.timeline_out is not None)
    elapsed = time.perf_counter() - t0
    st = result.stats
    found = result.schedule is not None
    if not result.completed:
        code, outcome = EXIT_TIME_LIMIT, "time limit reached"
    elif found:
        code, outcome = EXIT_OPTIMAL, "optimal"
    else:
        code, outcome = EXIT_NO_IMPROVEMENT, "no improving solution; initial UB is optimal-or-lower"
    print(f"instance: {inst.label} ({inst.n} jobs x {inst.m} machines)")
    print(f"result: {outcome}")
    if found:
        print(f"makespan: {result.makespan}")
        print("schedule: " + " ".join(map(str, result.schedule.perm)))
    stats = {
        "best_makespan": result.makespan if found else None,
        "initial_ub": ub,
        "improved": result.improved,
        "completed": result.completed,
        "nodes_decomposed": st.decomposed,
        "nodes_replayed": st.replayed,
        "leaves": st.leaves,
        "steals_local": st.steals,
        "steal_phases": st.steal_phases,
        "rounds": st.rounds,
        "explorers": k,
        "wall_time": round(elapsed, 6),
        "nodes_per_second": round(st.decomposed / elapsed, 1) if elapsed > 0 else 0.0,
        "exit_code": code,
    }
    _emit_stats(stats, args.stats_out)
    if args.timeline_out:
        write_timeline(result.timeline, args.timeline_out)
    return code


def cmd_bruteforce(args) -> int:
    inst = _load(args)
    if inst.n > BRUTE_FORCE_MAX_N:
        raise CliError(f"brute force refused: n={inst.n} exceeds {BRUTE_FORCE_MAX_N}")
    best = brute_force(inst, max_n=BRUTE_FORCE_MAX_N)
    print(f"makespan: {best.cmax}")
    print("schedule: " + " ".join(map(str, best.perm)))
    return EXIT_OPTIMAL


def cmd_generate(args) -> int:
    inst = generate_taillard(args.n, args.m, args.seed)
    if args.output:
        save_instance(inst, args.output, layout=args.layout)
    else:
        mat = inst.p if args.layout == "jobs" else inst.p.T
        print(f"{inst.n} {inst.m}")
        for row in mat:
            print(" ".join(str(int(x)) for x in row))
    return EXIT_OPTIMAL


def cmd_coordinator(args) -> int:
    inst = _load(args)
    ub, start = _initial_bound(args, inst)
    host, port = _address(args.listen)
    transport = TcpCoordinatorTransport(host, port)
    try:
        common = dict(checkpoint_path=args.checkpoint, checkpoint_period=args.checkpoint_period)
        if args.restore:
            coord = Coordinator.from_checkpoint(args.restore, transport, args.workers,
                                                inst.fingerprint(), **common)
            if ub < coord.best:
                coord.best, coord.schedule = ub, start
        else:
            coord = Coordinator(transport, args.workers, inst.fingerprint(),
                                [(0, math.factorial(inst.n))], best=ub, schedule=start, **common)
        initial = coord.best
        # a checkpoint exists before any worker can connect
        coord.save_checkpoint()
        print(f"listening on {transport.address[0]}:{transport.address[1]}", flush=True)
        result = coord.run()
    finally:
        transport.close()
    found = result.schedule is not None
    if found:
        print(f"makespan: {result.makespan}")
        print("schedule: " + " ".join(map(str, result.schedule)))
    else:
        print("result: no improving solution; initial UB is optimal-or-lower")
    stats = dict(result.stats)
    stats["initial_ub"] = initial
    stats["best_makespan"] = result.makespan if found else None
    _emit_stats(stats, args.stats_out)
    return EXIT_OPTIMAL if found else EXIT_NO_IMPROVEMENT


def cmd_worker(args) -> int:
    inst = _load(args)
    host, port = _address(args.connect)
    transport = TcpWorkerTransport(host, port, connect_timeout=args.connect_timeout)
    cfg = WorkerConfig(
        n_explorers=args.explorers or _default_explorers(),
        n_procs=args.threads,
        batch_size=args.batch_size,
        checkpoint_period=args.checkpoint_period,
        heuristic_agents=args.heuristic_agents if args.hybrid else 0,
        worker_id=args.worker_id,
        timeline=args.timeline_out is not None,
        rng_seed=args.seed,
    )
    result = worker_run(transport, inst, cfg)
    stats = dict(result.stats)
    stats["best_makespan"] = result.best
    stats["status"] = result.status
    _emit_stats(stats, args.stats_out)
    if args.timeline_out and result.timeline is not None:
        write_timeline(result.timeline, args.timeline_out)
    return EXIT_OPTIMAL if result.status == 0 else EXIT_ERROR


def cmd_bench(args) -> int:
    inst = _load(args)
    ub, start = _initial_bound(args, inst)
    rows = []
    base = None
    for k in args.explorer_counts:
        t0 = time.perf_counter()
        r = pool_run(inst, k, initial_ub=ub, n_procs=min(k, args.threads or k),
                     batch_size=args.batch_size, initial_schedule=start)
        dt = time.perf_counter() - t0
        base = base if base is not None else dt
        rows.append({"explorers": k, "wall_time": round(dt, 4), "nodes": r.stats.decomposed,
                     "leaves": r.stats.leaves, "steals": r.stats.steals,
                     "best": None if r.makespan == math.inf else r.makespan,
                     "speedup": round(base / dt, 3)})
        print(" ".join(f"{key}={val}" for key, val in rows[-1].items()), flush=True)
    if args.stats_out:
        Path(args.stats_out).write_text(json.dumps(rows, indent=2) + "\n")
    return EXIT_OPTIMAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pfspbb", description="Exact permutation flow-shop solver.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve on this machine")
    _add_instance_args(p)
    _add_ub_args(p)
    p.add_argument("-K", "--explorers", type=int, help="explorer count (default 2 x CPUs)")
    p.add_argument("--threads", type=int, default=1, help="worker processes hosting the explorers")
    p.add_argument("--batch-size", type=int, default=1024)
    p.add_argument("--time-limit", type=float)
    p.add_argument("--timeline-out", help="CSV of per-explorer activity samples")
    p.add_argument("--stats-out", help="JSON statistics file")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bruteforce", help=f"enumerate all schedules (n <= {BRUTE_FORCE_MAX_N})")
    _add_instance_args(p)
    p.set_defaults(func=cmd_bruteforce)

    p = sub.add_parser("generate", help="write a generated instance")
    p.add_argument("n", type=int)
    p.add_argument("m", type=int)
    p.add_argument("seed", type=int)
    p.add_argument("-o", "--output")
    p.add_argument("--layout", choices=("jobs", "machines"), default="jobs")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("coordinator", help="serve work units to workers over TCP")
    _add_instance_args(p)
    _add_ub_args(p)
    p.add_argument("--listen", default="127.0.0.1:7878", help="host:port (port 0 picks one)")
    p.add_argument("--workers", type=int, required=True)
    p.add_argument("--checkpoint", help="checkpoint file written periodically")
    p.add_argument("--checkpoint-period", type=float, default=60.0)
    p.add_argument("--restore", help="resume from this checkpoint file")
    p.add_argument("--stats-out")
    p.set_defaults(func=cmd_coordinator)

    p = sub.add_parser("worker", help="explore work units from a coordinator")
    _add_instance_args(p)
    p.add_argument("--connect", default="127.0.0.1:7878", help="coordinator host:port")
    p.add_argument("--connect-timeout", type=float, default=10.0)
    p.add_argument("-K", "--explorers", type=int)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--batch-size", type=int, default=1024)
    p.add_argument("--checkpoint-period", type=float, default=30.0)
    p.add_argument("--hybrid", action="store_true", help="run heuristic threads")
    p.add_argument("--heuristic-agents", type=int, default=1)
    p.add_argument("--seed", type=int, help="random seed for heuristic threads")
    p.add_argument("--worker-id", type=int, default=0)
    p.add_argument("--timeline-out")
    p.add_argument("--stats-out")
    p.set_defaults(func=cmd_worker)

    p = sub.add_parser("bench", help="time pool runs over several explorer counts")
    _add_instance_args(p)
    _add_ub_args(p)
    p.add_argument("--explorer-counts", type=int, nargs="+", default=[1, 2, 4, 8])
    p.add_argument("--threads", type=int, help="process cap (default: one per explorer)")
    p.add_argument("--batch-size", type=int, default=1024)
    p.add_argument("--stats-out")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    for name in ("explorers", "threads", "batch_size", "workers"):
        value = getattr(args, name, None)
        if value is not None and value < 1:
            print(f"error: --{name.replace('_', '-')} must be >= 1", file=sys.stderr)
            return EXIT_ERROR
    try:
        return args.func(args)
    except (CliError, CheckpointError, TransportError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
