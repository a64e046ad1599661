import json
import math

import numpy as np
import pytest

from pfspbb.cli import main
from pfspbb.coordinator import checkpoint_load
from pfspbb.instance import brute_force, generate_taillard, load_instance, random_instance, save_instance

from helpers import finish, parse_stats, run_cluster, start_coordinator, start_workers


@pytest.fixture
def inst_file(tmp_path, rng):
    inst = random_instance(7, 4, rng)
    path = tmp_path / "inst.txt"
    save_instance(inst, path)
    return inst, str(path)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, parse_stats(capsys.readouterr().out)


def test_solve_matches_bruteforce(capsys, inst_file):
    inst, path = inst_file
    code, solved = run(capsys, "solve", path, "-K", 3, "--batch-size", 16)
    assert code == 0
    code, brute = run(capsys, "bruteforce", path)
    assert code == 0 and solved["makespan"] == brute["makespan"] == brute_force(inst).cmax
    assert int(solved["exit_code"]) == 0


def test_exit_codes(capsys, inst_file):
    inst, path = inst_file
    opt = brute_force(inst).cmax
    assert run(capsys, "solve", path, "--initial-ub", opt)[0] == 2
    assert run(capsys, "solve", path, "--initial-ub", opt + 1)[0] == 0
    assert run(capsys, "solve", "--generate", 14, 20, 3, "-K", 1, "--time-limit", 0.2)[0] == 3
    assert run(capsys, "solve", path, "--initial-ub", 5, "--ub-from-heuristic")[0] == 1
    assert run(capsys, "solve", str(path) + ".missing")[0] == 1
    assert run(capsys, "solve", "-K", 2)[0] == 1
    assert run(capsys, "solve", path, "-K", 0)[0] == 1


def test_heuristic_upper_bound(capsys, inst_file):
    inst, path = inst_file
    code, out = run(capsys, "solve", path, "--ub-from-heuristic")
    # NEH may already be optimal
    assert code in (0, 2)
    if code == 0:
        assert out["makespan"] == brute_force(inst).cmax


def test_bruteforce_refuses_large(capsys):
    code = main(["bruteforce", "--generate", "11", "3", "5"])
    assert code == 1
    assert "refused" in capsys.readouterr().err


def test_generate(capsys, tmp_path):
    assert main(["generate", "20", "5", "873654221"]) == 0
    lines = capsys.readouterr().out.split("\n")
    assert lines[0] == "20 5"
    rows = np.array([[int(t) for t in ln.split()] for ln in lines[1:21]])
    np.testing.assert_array_equal(rows, generate_taillard(20, 5, 873654221).p)
    out = tmp_path / "g.txt"
    assert main(["generate", "6", "3", "9", "-o", str(out), "--layout", "machines"]) == 0
    assert load_instance(out, layout="machines") == generate_taillard(6, 3, 9)


def test_taillard_name(capsys):
    code, out = run(capsys, "solve", "--taillard", "ta001", "--ub-from-heuristic", "-K", 2)
    assert code == 0 and out["makespan"] == 1278


def test_stats_and_timeline_files(capsys, inst_file, tmp_path):
    _, path = inst_file
    stats, timeline = tmp_path / "s.json", tmp_path / "t.csv"
    code, out = run(capsys, "solve", path, "-K", 4, "--batch-size", 8,
                    "--stats-out", stats, "--timeline-out", timeline)
    assert code == 0
    data = json.loads(stats.read_text())
    assert data["best_makespan"] == out["makespan"]
    assert data["nodes_decomposed"] > 0 and data["explorers"] == 4
    rows = timeline.read_text().splitlines()
    assert rows[0] == "timestamp_ms,explorer_id,active,interval_length_log2"
    assert len(rows) > 1 and {int(r.split(",")[1]) for r in rows[1:]} <= set(range(4))


def test_bench(capsys, inst_file, tmp_path):
    _, path = inst_file
    out = tmp_path / "b.json"
    assert main(["bench", path, "--explorer-counts", "1", "2", "--stats-out", str(out)]) == 0
    rows = json.loads(out.read_text())
    assert [r["explorers"] for r in rows] == [1, 2] and rows[0]["best"] == rows[1]["best"]


def test_worker_without_coordinator(capsys):
    code = main(["worker", "--generate", "6", "3", "1", "--connect", "127.0.0.1:1",
                 "--connect-timeout", "1"])
    assert code == 1


def test_coordinator_and_workers(inst_file):
    inst, path = inst_file
    code, stats, worker_codes, _ = run_cluster([path], [4, 32])
    assert code == 0 and worker_codes == [0, 0]
    assert stats["makespan"] == brute_force(inst).cmax


def test_restore_after_kill(tmp_path):
    args = ["--generate", "9", "5", "77"]
    opt = brute_force(generate_taillard(9, 5, 77)).cmax
    ck = tmp_path / "ck.txt"
    coord, _ = start_coordinator(args, 1, ["--checkpoint", str(ck)])
    coord.kill()
    coord.wait()
    saved = checkpoint_load(ck)
    assert saved.units[0].intervals == [(0, math.factorial(9))]
    coord, address = start_coordinator(args, 2, ["--restore", str(ck), "--checkpoint", str(ck)])
    workers = start_workers(args, address, [16, 64])
    assert [finish(w)[0] for w in workers] == [0, 0]
    code, out, _ = finish(coord)
    assert code == 0 and parse_stats(out)["makespan"] == opt
    assert checkpoint_load(ck).units == []


def test_restore_rejects_other_instance(tmp_path, capsys):
    ck = tmp_path / "ck.txt"
    coord, _ = start_coordinator(["--generate", "6", "3", "1"], 1, ["--checkpoint", str(ck)])
    coord.kill()
    coord.wait()
    code = main(["coordinator", "--generate", "6", "3", "2", "--listen", "127.0.0.1:0",
                 "--workers", "1", "--restore", str(ck)])
    assert code == 1
    assert "different instance" in capsys.readouterr().err
