import json
import os

import pytest

from ginv import cli


def run_cli(argv):
    return cli.main(argv)


def read_result(path):
    with open(path) as fh:
        return json.load(fh)


def test_run_purity_experiment(tmp_path):
    out = tmp_path / "purity.json"
    code = run_cli(
        [
            "run",
            "--experiment", "purity",
            "--n", "2",
            "--b", "0.5",
            "--samples", "100",
            "--seed", "7",
            "--output", str(out),
        ]
    )
    assert code == 0
    result = read_result(out)
    assert result["schema"] == 1
    assert result["classification"]["accuracy"] == 1.0
    assert result["config"]["experiment"] == "purity"
    assert "wall_time_s" in result


def test_run_determinism_excluding_wall_time(tmp_path):
    args = [
        "run",
        "--experiment", "purity",
        "--n", "1",
        "--samples", "40",
        "--seed", "3",
    ]
    out_a, out_b = tmp_path / "a.json", tmp_path / "b.json"
    assert run_cli(args + ["--output", str(out_a)]) == 0
    assert run_cli(args + ["--output", str(out_b)]) == 0
    a, b = read_result(out_a), read_result(out_b)
    a.pop("wall_time_s")
    b.pop("wall_time_s")
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_run_commutant_symmetric(tmp_path):
    out = tmp_path / "comm.json"
    code = run_cli(
        [
            "run",
            "--experiment", "commutant",
            "--group", "symmetric",
            "--n", "3",
            "--k", "1",
            "--output", str(out),
        ]
    )
    assert code == 0
    result = read_result(out)
    assert result["dimension"] == 20
    assert result["gap_ratio"] is None or result["gap_ratio"] > 1e3


def test_run_time_reversal_dynamics(tmp_path):
    out = tmp_path / "dyn.json"
    code = run_cli(
        [
            "run",
            "--experiment", "time_reversal_dynamics",
            "--n", "2",
            "--samples", "60",
            "--mc-samples", "2000",
            "--seed", "1",
            "--output", str(out),
        ]
    )
    assert code == 0
    result = read_result(out)
    assert result["classification"]["accuracy"] == 1.0
    moments = result["moments"]
    assert abs(moments["empirical_mean"] - moments["analytic_mean"]) < 4 * moments["stderr"]


def test_run_ancilla(tmp_path):
    out = tmp_path / "anc.json"
    assert run_cli(["run", "--experiment", "ancilla", "--n", "1", "--output", str(out)]) == 0
    result = read_result(out)
    assert result["conjugation_deviation"] < 1e-10
    assert result["max_purity_deviation"] < 1e-10


def test_run_graph_experiment(tmp_path):
    out = tmp_path / "graph.json"
    code = run_cli(
        [
            "run",
            "--experiment", "graph",
            "--samples", "30",
            "--iterations", "40",
            "--seed", "2",
            "--output", str(out),
        ]
    )
    assert code == 0
    result = read_result(out)
    assert result["gap"] > 0.05
    assert result["test_accuracy"] == 1.0


def test_unknown_experiment_is_config_error(tmp_path, capsys):
    code = run_cli(["run", "--experiment", "purity", "--measure", "nope"])
    assert code == 2  # measure is not a purity field
    assert "unknown config fields" in capsys.readouterr().err


def test_unknown_field_in_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"experiment": "purity", "bogus": 1}))
    code = run_cli(["run", "--config", str(cfg)])
    assert code == 2
    assert "bogus" in capsys.readouterr().err


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    out = tmp_path / "r.json"
    cfg.write_text(
        json.dumps(
            {
                "experiment": "purity",
                "n": 1,
                "b": 0.6,
                "samples": 20,
                "seed": 5,
                "output": str(out),
            }
        )
    )
    assert run_cli(["run", "--config", str(cfg), "--samples", "30"]) == 0
    result = read_result(out)
    assert result["config"]["samples"] == 30  # flag wins
    assert result["config"]["b"] == 0.6


def test_runtime_error_leaves_no_partial_file(tmp_path, capsys):
    out = tmp_path / "never.json"
    code = run_cli(
        [
            "run",
            "--experiment", "entanglement",
            "--n", "1",  # no entangled states on one qubit: bisection fails
            "--output", str(out),
        ]
    )
    assert code == 3
    assert not out.exists()
    assert "runtime error" in capsys.readouterr().err


def test_report_classification_formats(tmp_path, capsys):
    out = tmp_path / "purity.json"
    run_cli(
        ["run", "--experiment", "purity", "--n", "1", "--samples", "20", "--output", str(out)]
    )
    assert run_cli(["report", str(out), "--format", "md"]) == 0
    md = capsys.readouterr().out
    assert "| true 1 |" in md and "accuracy" in md
    assert run_cli(["report", str(out), "--format", "csv"]) == 0
    csv_text = capsys.readouterr().out
    assert csv_text.startswith("metric,value")


def test_report_concentration_csv_and_idempotence(tmp_path):
    out = tmp_path / "conc.json"
    run_cli(
        [
            "run",
            "--experiment", "concentration",
            "--n-min", "1",
            "--n-max", "2",
            "--samples", "300",
            "--output", str(out),
        ]
    )
    rep_a = tmp_path / "a.csv"
    rep_b = tmp_path / "b.csv"
    assert run_cli(["report", str(out), "--format", "csv", "--output", str(rep_a)]) == 0
    assert run_cli(["report", str(out), "--format", "csv", "--output", str(rep_b)]) == 0
    assert rep_a.read_bytes() == rep_b.read_bytes()
    lines = rep_a.read_text().strip().splitlines()
    assert lines[0] == "n,empirical_var,analytic_var"
    assert len(lines) == 3


def test_report_missing_file_is_config_error(tmp_path, capsys):
    code = run_cli(["report", str(tmp_path / "missing.json")])
    assert code == 2


def test_malformed_config_file_is_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run_cli(["run", "--config", str(bad)]) == 2
    assert run_cli(["report", str(bad)]) == 2


def test_graph_preset_validation(capsys):
    code = run_cli(["run", "--experiment", "graph", "--g0", "heptagon"])
    assert code == 2
    assert "preset" in capsys.readouterr().err


def test_all_experiments_complete_at_defaults(tmp_path):
    # every experiment must finish its default desk-scale config in < 120 s
    import time

    for experiment in sorted(cli.SCHEMAS):
        out = tmp_path / f"{experiment}.json"
        start = time.perf_counter()
        code = run_cli(["run", "--experiment", experiment, "--output", str(out)])
        elapsed = time.perf_counter() - start
        assert code == 0, experiment
        assert elapsed < 120.0, (experiment, elapsed)
        result = read_result(out)
        assert result["schema"] == 1
        assert result["config"]["experiment"] == experiment


def test_worker_count_env(monkeypatch):
    monkeypatch.delenv("GINV_THREADS", raising=False)
    assert cli.worker_count() == 1
    monkeypatch.setenv("GINV_THREADS", "4")
    assert cli.worker_count() == 4
    monkeypatch.setenv("GINV_THREADS", "frog")
    assert cli.worker_count() == 1


def test_time_reversal_states_bell_observable(tmp_path):
    out = tmp_path / "trs.json"
    code = run_cli(
        [
            "run",
            "--experiment", "time_reversal_states",
            "--n", "2",
            "--observable", "bell",
            "--samples", "60",
            "--mc-samples", "2000",
            "--seed", "4",
            "--output", str(out),
        ]
    )
    assert code == 0
    result = read_result(out)
    assert result["threshold"]["c"] == 0.25  # 1/d at n=2
    assert result["classification"]["accuracy"] == 1.0
    assert result["moments"]["analytic_mean"] == 0.1  # 2/(d(d+1))


def test_graph_inline_json(tmp_path):
    out = tmp_path / "g.json"
    g0 = json.dumps({"n": 3, "edges": [[0, 1], [1, 2], [0, 2]]})
    code = run_cli(
        [
            "run",
            "--experiment", "graph",
            "--g0", g0,
            "--g1", "path3",
            "--samples", "10",
            "--iterations", "30",
            "--output", str(out),
        ]
    )
    assert code == 0
    assert read_result(out)["test_accuracy"] == 1.0


def test_entanglement_experiment(tmp_path):
    out = tmp_path / "ent.json"
    code = run_cli(
        [
            "run",
            "--experiment", "entanglement",
            "--n", "2",
            "--b", "0.4",
            "--measure", "meyer_wallach",
            "--samples", "40",
            "--output", str(out),
        ]
    )
    assert code == 0
    result = read_result(out)
    assert result["classification"]["accuracy"] == 1.0
    assert result["max_oracle_deviation"] < 1e-9
