import json

import numpy as np
import pytest

from graphclust.cli import main

from conftest import three_gaussians


def _csv(path, X):
    np.savetxt(path, np.asarray(X, dtype=float), delimiter=",", fmt="%.17g")
    return str(path)


def _edges(text):
    return [line for line in text.splitlines() if line and not line.startswith("#")]


@pytest.fixture
def blobs(tmp_path):
    rng = np.random.default_rng(0)
    X = np.vstack([rng.standard_normal((15, 5)) + 8 * j for j in range(3)])
    return _csv(tmp_path / "x.csv", X)


def test_estimate_json(blobs, tmp_path, capsys):
    out = tmp_path / "p.json"
    code = main(["estimate", "--input", blobs, "--kmax", "5", "--out", str(out)])
    printed = capsys.readouterr().out
    assert code == 0
    d = json.loads(out.read_text())
    assert [r["k"] for r in d["records"]] == [2, 3, 4, 5]
    assert printed.startswith(f"chosen_k: {d['chosen_k']}\n")
    assert d["meta"]["config"]["seed"] == 0 and d["meta"]["config"]["graph_k"] == 10


def test_estimate_csv_has_config_header(blobs, tmp_path):
    out = tmp_path / "p.csv"
    assert main(["estimate", "--input", blobs, "--kmax", "4", "--format", "csv",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# config: ")
    assert lines[1] == "k,W,E,var,Q,z,valid,reason"
    assert len(lines) == 5


def test_estimate_labels_dir_single_k(tmp_path, capsys):
    rng = np.random.default_rng(1)
    X = rng.standard_normal((12, 2))
    edges = tmp_path / "g.txt"
    assert main(["graph", "--input", _csv(tmp_path / "x.csv", X), "--graph-k", "2",
                 "--out", str(edges)]) == 0
    d = tmp_path / "labels"
    d.mkdir()
    (d / "labels_k4.txt").write_text("".join(f"{i % 4 + 1}\n" for i in range(12)))
    out = tmp_path / "p.json"
    code = main(["estimate", "--graph", "external", "--edges", str(edges),
                 "--clusterer", "labels-dir", "--labels-dir", str(d),
                 "--kmin", "4", "--kmax", "4", "--out", str(out)])
    assert code == 0
    assert [r["k"] for r in json.loads(out.read_text())["records"]] == [4]


def test_estimate_three_rows_is_input_error(tmp_path, capsys):
    code = main(["estimate", "--input", _csv(tmp_path / "x.csv", np.eye(3))])
    assert code == 1
    assert "n < 4: null variance undefined" in capsys.readouterr().err


def test_estimate_bad_range_and_bad_csv(blobs, tmp_path, capsys):
    assert main(["estimate", "--input", blobs, "--kmin", "5", "--kmax", "3"]) == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3,4\n5,x\n7,8\n")
    assert main(["estimate", "--input", str(bad)]) == 1
    assert "line 3" in capsys.readouterr().err


def test_estimate_no_valid_k_exits_two(tmp_path, capsys):
    # star graph: every balanced split has zero null variance
    edges = tmp_path / "star.txt"
    edges.write_text("0,1\n0,2\n0,3\n")
    d = tmp_path / "labels"
    d.mkdir()
    (d / "labels_k2.txt").write_text("1\n1\n2\n2\n")
    code = main(["estimate", "--graph", "external", "--edges", str(edges),
                 "--clusterer", "labels-dir", "--labels-dir", str(d),
                 "--kmin", "2", "--kmax", "2"])
    assert code == 2
    assert "degenerate-variance" in capsys.readouterr().err


def test_estimate_three_gaussians_2d_one_tree(tmp_path, capsys):
    hits = 0
    for seed in range(100):
        X, _ = three_gaussians(np.random.default_rng(seed))
        path = _csv(tmp_path / f"gauss_{seed}.csv", X)
        main(["estimate", "--input", path, "--graph-k", "1", "--seed", str(seed)])
        hits += capsys.readouterr().out.startswith("chosen_k: 3\n")
    assert hits >= 95


def test_graph_three_collinear(tmp_path, capsys):
    assert main(["graph", "--input", _csv(tmp_path / "x.csv", [[0], [1], [3]]),
                 "--graph-k", "1"]) == 0
    assert _edges(capsys.readouterr().out) == ["0,1,1.0", "1,2,2.0"]


def test_graph_four_points(tmp_path, capsys):
    path = _csv(tmp_path / "x.csv", [[0], [1], [3], [7]])
    assert main(["graph", "--input", path, "--graph-k", "2"]) == 0
    assert len(_edges(capsys.readouterr().out)) == 6
    assert main(["graph", "--input", path, "--graph-k", "3"]) == 1
    assert "max feasible K = 2" in capsys.readouterr().err


def test_external_graph_round_trip(blobs, tmp_path, capsys):
    edges = tmp_path / "g.txt"
    assert main(["graph", "--input", blobs, "--graph-k", "3", "--out", str(edges)]) == 0
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["estimate", "--input", blobs, "--graph-k", "3", "--kmax", "5", "--out", str(a)])
    main(["estimate", "--input", blobs, "--graph", "external", "--edges", str(edges),
          "--kmax", "5", "--out", str(b)])
    pa, pb = json.loads(a.read_text()), json.loads(b.read_text())
    assert pa["records"] == pb["records"] and pa["chosen_k"] == pb["chosen_k"]


def test_verify_passes_and_reports(tmp_path, capsys):
    out = tmp_path / "v.json"
    assert main(["verify", "--graphs", "5", "--mc-draws", "1000", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["pass"] and rep["max_rel_err"] < 1e-12


def test_verify_injected_fault_exits_three(capsys):
    assert main(["verify", "--graphs", "3", "--mc-draws", "1000",
                 "--inject-fault", "ge-sign"]) == 3
    assert "FAIL" in capsys.readouterr().err


def _simulate(out, *extra):
    assert main(["simulate", "--scenario", "I", "--reps", "5", "--restarts", "2",
                 "--kmax", "5", "--out", str(out), *extra]) == 0
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


def test_simulate_rows_sum_to_reps(tmp_path, capsys):
    files = _simulate(tmp_path / "r")
    assert set(files) == {"freq_I.csv", "accuracy_I.csv", "run_I.json"}
    rows = files["freq_I.csv"].decode().splitlines()[2:]
    for row in rows:
        cells = row.split(",")
        assert sum(int(c) for c in cells[1:] if c != "-") == 5


def test_simulate_deterministic_across_runs_and_threads(tmp_path, capsys):
    a = _simulate(tmp_path / "a", "--seed", "7")
    b = _simulate(tmp_path / "b", "--seed", "7")
    c = _simulate(tmp_path / "c", "--seed", "7", "--threads", "3")
    assert a == b == c


def test_simulate_input_errors(tmp_path, capsys):
    assert main(["simulate", "--scenario", "VII", "--out", str(tmp_path)]) == 1
    assert main(["simulate", "--scenario", "I", "--kmin", "6", "--kmax", "3",
                 "--out", str(tmp_path)]) == 1
