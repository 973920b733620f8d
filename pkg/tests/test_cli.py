import pytest

from flow.instance_io import load_instance, load_solution, save_instance
from main import main


@pytest.fixture
def settings_file(tmp_path, monkeypatch):
    path = tmp_path / "settings.json"
    path.write_text('{"lp_backend": "highs"}', encoding="utf-8")
    monkeypatch.setenv("UFLOW_SETTINGS", str(path))
    return path


@pytest.fixture
def grid_file(tmp_path, settings_file):
    path = tmp_path / "grid.txt"
    assert main(["gen", "grid", "--n", "3", "--capacity", "20", "--max-demand", "5",
                 "--seed", "2", "-o", str(path)]) == 0
    return path


def test_gen_and_validate(grid_file, capsys):
    instance = load_instance(grid_file)
    assert instance.graph.node_count == 12
    assert main(["validate", "-i", str(grid_file)]) == 0
    assert "valid" in capsys.readouterr().out


def test_gen_random(tmp_path, settings_file):
    path = tmp_path / "random.txt"
    assert main(["gen", "random", "--nodes", "15", "--degree", "3", "-o", str(path)]) == 0
    assert load_instance(path).graph.node_count == 15


def test_validate_reports_problems(tmp_path, settings_file, single_arc, capsys):
    from dataclasses import replace

    path = tmp_path / "bad.txt"
    save_instance(replace(single_arc, witness=((0,), (0,)), commodities=single_arc.commodities * 2), path)
    assert main(["validate", "-i", str(path)]) == 1
    assert "exceeds capacity" in capsys.readouterr().err


@pytest.mark.parametrize("algo", ["rr", "srr", "csrr", "sa"])
def test_solve_writes_solution(grid_file, tmp_path, algo):
    out = tmp_path / f"{algo}.sol"
    args = ["solve", "-i", str(grid_file), "-o", str(out), "--algo", algo, "--seed", "1"]
    if algo == "sa":
        args += ["--iterations", "200"]
    assert main(args) == 0
    assignment, footer = load_solution(out)
    assert len(assignment.paths) == load_instance(grid_file).commodity_count
    assert footer["algorithm"] == algo
    assert float(footer["overflow_ratio"]) >= 0


def test_solve_to_stdout(grid_file, capsys):
    assert main(["solve", "-i", str(grid_file), "--algo", "rr-sorted", "--objective", "mixed"]) == 0
    assert "# overflow_sum" in capsys.readouterr().out


def test_unknown_algorithm_fails_cleanly(grid_file, capsys):
    assert main(["solve", "-i", str(grid_file), "--algo", "magic"]) == 1
    assert "Unknown algorithm" in capsys.readouterr().err


def test_missing_file_fails_cleanly(tmp_path, settings_file):
    assert main(["validate", "-i", str(tmp_path / "nope.txt")]) == 1


def test_bound(capsys, settings_file):
    assert main(["bound", "--arcs", "100", "--epsilon", "0.1", "--gamma", "1"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("B ")
    assert "factor" in out


def test_tailcheck(tmp_path, settings_file, path_graph, capsys):
    path = tmp_path / "path.txt"
    save_instance(path_graph, path)
    assert main(["tailcheck", "-i", str(path), "--alpha", "1", "--runs", "4"]) == 0
    assert "every arc" in capsys.readouterr().out


def test_export_lp(grid_file, tmp_path):
    out = tmp_path / "lp.txt"
    assert main(["export-lp", "-i", str(grid_file), "-o", str(out), "--objective", "congestion"]) == 0
    assert out.read_text(encoding="utf-8").startswith("lp vars ")


def test_bench(tmp_path, settings_file, monkeypatch):
    spec = tmp_path / "tiny.yaml"
    spec.write_text("name: tiny\ndataset: order_study\ninstances_per_group: 2\n"
                    "instance: {n: 3, capacity: 20, max_demand: 5}\nalgorithms: [rr, srr]\n"
                    "backend: highs\n", encoding="utf-8")
    monkeypatch.setenv("UFLOW_OUT_DIR", str(tmp_path / "out"))
    assert main(["bench", "--spec", str(spec), "--no-progress"]) == 0
    assert (tmp_path / "out" / "tiny_results.csv").exists()
    assert (tmp_path / "out" / "tiny_summary.csv").exists()


def test_out_of_range_arc_fails_cleanly(tmp_path, settings_file, capsys):
    path = tmp_path / "broken.txt"
    path.write_text("nodes 2 arcs 1 commodities 1\n0 7 5\n0 1 3\n", encoding="utf-8")
    assert main(["solve", "-i", str(path)]) == 1
    assert "node 7 outside" in capsys.readouterr().err
