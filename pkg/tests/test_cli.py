import json
import subprocess
import sys

import pytest

from sparse_dflm.cli import EXIT_FAILED, EXIT_OK, EXIT_USAGE, main, new_run_dir, parse_seeds
from sparse_dflm.config import SolverConfig


def only_dir(root):
    dirs = [p for p in root.iterdir() if p.is_dir()]
    assert len(dirs) == 1
    return dirs[0]


def test_parse_seeds():
    assert parse_seeds("1..5") == [1, 2, 3, 4, 5]
    assert parse_seeds("3,1, 9") == [3, 1, 9]
    assert parse_seeds("7") == [7]


@pytest.mark.parametrize("text", ["", "5..1", "a..b", "1,x"])
def test_parse_seeds_rejects(text):
    from sparse_dflm.cli import UsageError

    with pytest.raises(UsageError):
        parse_seeds(text)


def test_run_dirs_never_collide(tmp_path):
    a = new_run_dir(tmp_path, "solve", {"x": 1})
    b = new_run_dir(tmp_path, "solve", {"x": 1})
    assert a != b and a.is_dir() and b.is_dir()


def test_solve_writes_history_and_summary(tmp_path):
    code = main(["solve", "--problem", "broyden", "--n", "30", "--p", "10", "--distribution", "bernoulli",
                 "--seed", "42", "--output-dir", str(tmp_path)])
    assert code == EXIT_OK
    run = only_dir(tmp_path)
    header = (run / "history.csv").read_text().splitlines()[0]
    assert header == "k,fevals,f,grad_model_norm,theta,lambda,rho,step_norm,accepted,p"
    summary = json.loads((run / "summary.json").read_text())
    assert summary["seed"] == 42
    cfg = SolverConfig.from_dict(summary["config"])
    assert cfg.p_policy.p == 10 and cfg.seed == 42


def test_solve_reproducible_from_summary(tmp_path):
    args = ["solve", "--problem", "broyden", "--n", "20", "--p", "8", "--seed", "3"]
    assert main(args + ["--output-dir", str(tmp_path / "a")]) == EXIT_OK
    first = only_dir(tmp_path / "a")
    assert main(["solve", "--problem", "broyden", "--n", "20", "--config", str(first / "summary.json"),
                 "--output-dir", str(tmp_path / "b")]) == EXIT_OK
    second = only_dir(tmp_path / "b")
    assert (first / "history.csv").read_bytes() == (second / "history.csv").read_bytes()


def test_solve_adaptive_p_column_varies(tmp_path):
    assert main(["solve", "--problem", "broyden", "--n", "30", "--p-adaptive", "--seed", "2",
                 "--output-dir", str(tmp_path)]) == EXIT_OK
    rows = (only_dir(tmp_path) / "history.csv").read_text().splitlines()[1:]
    assert len({r.split(",")[-1] for r in rows}) > 1


@pytest.mark.parametrize("argv", [
    ["solve", "--problem", "valley", "--n", "100"],
    ["solve", "--problem", "nosuch", "--n", "10"],
    ["solve", "--problem", "broyden", "--n", "10", "--set", "gamma1=2"],
    ["solve", "--problem", "broyden", "--n", "10", "--set", "nokey=1"],
    ["solve", "--problem", "broyden", "--n", "10", "--config", "/nonexistent.json"],
    ["solve"],
    ["bench", "--problems", "broyden", "--solvers", "nosuch"],
    ["bench", "--problems", "broyden:x"],
    ["bench", "--seeds", "9..1"],
    ["profile", "--records", "/nonexistent"],
    ["validate", "--recovery-tol", "-1"],
])
def test_usage_errors_exit_2(tmp_path, monkeypatch, argv):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == EXIT_USAGE
    assert not (tmp_path / "runs").exists()


def test_set_override_wins_over_config_file(tmp_path):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"max_fevals": 50, "seed": 1}))
    out = tmp_path / "out"
    assert main(["solve", "--problem", "broyden", "--n", "12", "--config", str(cfg_file), "--set", "max_fevals=30",
                 "--seed", "5", "--output-dir", str(out)]) == EXIT_OK
    cfg = json.loads((only_dir(out) / "summary.json").read_text())["config"]
    assert cfg["max_fevals"] == 30 and cfg["seed"] == 5


def _bench(out, *extra):
    return main(["-q", "bench", "--problems", "broyden:12,freudenstein:10", "--solvers", "dflm-p3,fd-lm",
                 "--seeds", "1..2", "--max-fevals", "150", "--workers", "1", "--output-dir", str(out), *extra])


def test_bench_then_profile(tmp_path):
    assert _bench(tmp_path / "bench") == EXIT_OK
    run = only_dir(tmp_path / "bench")
    lines = (run / "records.jsonl").read_text().splitlines()
    assert len(lines) == 2 * 2 * 2
    assert main(["profile", "--records", str(run), "--tau", "1e-4"]) == EXIT_OK
    assert (run / "profile_tau1e-04.csv").exists() and (run / "profile_tau1e-04.svg").exists()
    assert main(["profile", "--records", str(run), "--tau", "1e-4"]) == EXIT_USAGE
    assert main(["profile", "--records", str(run), "--tau", "1e-4", "--force"]) == EXIT_OK
    assert main(["profile", "--records", str(run), "--output-dir", str(tmp_path / "all")]) == EXIT_OK
    assert len(list((tmp_path / "all").glob("profile_tau*.csv"))) == 4
    assert len(list((tmp_path / "all").glob("profile_tau*.svg"))) == 4


def test_bench_csvs_byte_identical(tmp_path):
    assert _bench(tmp_path / "a") == EXIT_OK
    assert _bench(tmp_path / "b") == EXIT_OK
    a, b = only_dir(tmp_path / "a"), only_dir(tmp_path / "b")
    assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()
    assert (a / "records.jsonl").read_bytes() != b"" and (a / "summary.csv").read_text().count("\n") == 9


def test_profile_corrupted_records_names_file(tmp_path, capsys):
    bad = tmp_path / "records.jsonl"
    bad.write_text('{"solver_id": "a"\n')
    assert main(["profile", "--records", str(bad)]) == EXIT_USAGE
    assert str(bad) in capsys.readouterr().err


def test_validate_exit_codes(capsys):
    assert main(["validate", "--verbose"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "value=" in out and "7/7 checks passed" in out
    assert main(["validate", "--recovery-tol", "1e-30"]) == EXIT_FAILED


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "sparse_dflm", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "0.1.0" in res.stdout
