"""End-to-end command-line workflows through main(argv)."""

import json

import numpy as np
import pytest

from forestlab.cli import main
from forestlab.rng import derive_seed, make_rng
from forestlab.synthetic import (
    Dataset,
    builtin_designs,
    generate_dataset,
    write_dataset_csv,
)

DESIGNS = {d.label: d for d in builtin_designs()}


@pytest.fixture()
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def write_demo_csv(path, n=120, p=2, seed_parts=(90, "cli-data")):
    rng = make_rng(derive_seed(*seed_parts))
    x = rng.standard_normal((n, p))
    logit = -0.5 + 1.2 * x[:, 0]
    y = (rng.random(n) < 1 / (1 + np.exp(-logit))).astype(int)
    write_dataset_csv(Dataset(x=x, y=y), str(path))
    return path


def test_simulate_writes_outputs_and_reruns_identically(workdir, capsys):
    out_a = workdir / "a"
    out_b = workdir / "b"
    out_a.mkdir()
    out_b.mkdir()
    args = [
        "simulate", "--filter", "b_4c_75_0_bal_2_200", "--runs", "2",
        "--test-size", "100", "--seed", "3000",
    ]
    assert main(args + ["--out", str(out_a)]) == 0
    assert main(args + ["--out", str(out_b)]) == 0
    summary_a = (out_a / "summary.csv").read_bytes()
    summary_b = (out_b / "summary.csv").read_bytes()
    assert summary_a == summary_b
    assert summary_a.decode().count("\n") == 2  # header plus one scenario

    meta = json.loads((out_a / "metadata.json").read_text())
    assert meta["command"] == "simulate"
    assert meta["scenarios_run"] == 1
    assert meta["failed_runs"] == 0
    assert meta["config"]["r_runs"] == 2
    assert meta["config"]["n_test"] == 100
    assert meta["config"]["master_seed"] == 3000
    assert "wall_time_seconds" in meta["timing"]
    out = capsys.readouterr().out
    assert "1 scenarios" in out


def test_simulate_env_and_flag_precedence(workdir, monkeypatch):
    config = workdir / "config.json"
    config.write_text(json.dumps({"r_runs": 5, "n_test": 100, "n_tree": 5,
                                  "filter": "b_4c_75_0_bal_2_200"}))
    out = workdir / "run"
    out.mkdir()
    monkeypatch.setenv("FORESTLAB_RUNS", "3")
    assert main(["simulate", "--config", str(config), "--out", str(out)]) == 0
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["config"]["r_runs"] == 3  # environment beats the config file

    assert main(["simulate", "--config", str(config), "--out", str(out),
                 "--runs", "2"]) == 0
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["config"]["r_runs"] == 2  # flag beats the environment


def test_simulate_rejects_bad_inputs(workdir, capsys, monkeypatch):
    assert main(["simulate", "--out", str(workdir / "missing"),
                 "--filter", "b_4c_75_0_bal_2_200"]) == 1
    assert "does not exist" in capsys.readouterr().err

    config = workdir / "config.json"
    config.write_text(json.dumps({"runs": 5}))
    assert main(["simulate", "--config", str(config)]) == 1
    assert "unknown config key 'runs'" in capsys.readouterr().err

    monkeypatch.setenv("FORESTLAB_RUNS", "plenty")
    assert main(["simulate", "--filter", "b_4c_75_0_bal_2_200"]) == 1
    assert "invalid value for FORESTLAB_RUNS: 'plenty'" in capsys.readouterr().err


def test_scenarios_listing(capsys):
    assert main(["scenarios"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 192
    assert lines[0] == "b_4c_75_0_bal_2_200"

    assert main(["scenarios", "--filter", "b_4b_75_0_bal_*_4000"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines == ["b_4b_75_0_bal_2_4000", "b_4b_75_0_bal_20_4000"]


def test_scenarios_describe_shows_fitted_node_size(capsys):
    assert main(["scenarios", "--filter", "b_4c_75_0_bal_2_200", "--describe"]) == 0
    line = capsys.readouterr().out.strip()
    assert "node_size=2(fits 20)" in line
    assert "target_auc=0.75" in line

    assert main(["scenarios", "--filter", "b_4c_75_0_bal_2_200", "--describe",
                 "--node-size-mapping", "literal"]) == 0
    assert "node_size=2(fits 2)" in capsys.readouterr().out


def test_fit_predict_evaluate_forest_round_trip(workdir, capsys):
    data_csv = write_demo_csv(workdir / "data.csv")
    assert main(["fit", "--data", str(data_csv), "--model", "forest",
                 "--trees", "20", "--seed", "7", "--out", "forest.npz"]) == 0
    meta = json.loads((workdir / "forest.npz.meta.json").read_text())
    assert meta["model_type"] == "forest"
    assert meta["n_train"] + meta["n_test"] == 120
    assert meta["n_test"] == 36  # round(120 * 0.3)
    assert 0.5 <= meta["train_metrics"]["c_statistic"] <= 1.0
    capsys.readouterr()

    assert main(["predict", "--model", "forest.npz", "--data", str(data_csv),
                 "--out", "preds.csv"]) == 0
    header = (workdir / "preds.csv").read_text().splitlines()[0]
    assert header == "id,p_class0,p_class1"
    capsys.readouterr()

    assert main(["evaluate", "--pred", "preds.csv", "--data", str(data_csv)]) == 0
    block = json.loads(capsys.readouterr().out)
    assert block["n"] == 120
    assert 0.5 < block["c_statistic"] <= 1.0
    assert "brier" in block and "logloss" in block


def test_fit_glm_and_evaluate_to_file(workdir, capsys):
    data_csv = write_demo_csv(workdir / "data.csv")
    assert main(["fit", "--data", str(data_csv), "--model", "glm",
                 "--out", "model.json", "--seed", "7"]) == 0
    assert main(["predict", "--model", "model.json", "--data", str(data_csv),
                 "--out", "preds.csv"]) == 0
    assert main(["evaluate", "--pred", "preds.csv", "--data", str(data_csv),
                 "--out", "metrics.json"]) == 0
    block = json.loads((workdir / "metrics.json").read_text())
    assert block["slope_converged"] is True
    assert abs(block["calibration_slope"] - 1.0) < 0.5


def test_five_class_evaluate_reports_pdi(workdir, capsys):
    rng = make_rng(derive_seed(90, "cli-5class"))
    n = 50
    x = rng.standard_normal((n, 2))
    y = np.arange(n) % 5
    lines = ["x1,x2,y"]
    for i in range(n):
        lines.append(f"{x[i, 0]:.6f},{x[i, 1]:.6f},{y[i]}")
    (workdir / "multi.csv").write_text("\n".join(lines) + "\n")

    assert main(["fit", "--data", "multi.csv", "--model", "glm",
                 "--test-size", "0", "--out", "multi.json"]) == 0
    assert main(["predict", "--model", "multi.json", "--data", "multi.csv",
                 "--out", "mpreds.csv"]) == 0
    header = (workdir / "mpreds.csv").read_text().splitlines()[0]
    assert header == "id," + ",".join(f"p_class{c}" for c in range(5))
    capsys.readouterr()
    assert main(["evaluate", "--pred", "mpreds.csv", "--data", "multi.csv"]) == 0
    block = json.loads(capsys.readouterr().out)
    assert "pdi" in block and 0.0 <= block["pdi"] <= 1.0
    assert block["calibration_slope"] is None


def test_predict_feature_mismatch_fails(workdir, capsys):
    write_demo_csv(workdir / "two.csv", p=2)
    write_demo_csv(workdir / "three.csv", p=3)
    assert main(["fit", "--data", "two.csv", "--trees", "5", "--out", "m.npz"]) == 0
    capsys.readouterr()
    assert main(["predict", "--model", "m.npz", "--data", "three.csv"]) == 1
    assert "fit on 2 features" in capsys.readouterr().err


def test_evaluate_missing_class_column_fails(workdir, capsys):
    (workdir / "preds.csv").write_text("id,p_class0,p_class1\n0,0.5,0.5\n1,0.4,0.6\n")
    (workdir / "obs.csv").write_text("x1,y\n0.1,1\n0.2,2\n")
    assert main(["evaluate", "--pred", "preds.csv", "--data", "obs.csv"]) == 1
    assert "no p_class2 column for observed class 2" in capsys.readouterr().err


def test_evaluate_row_count_mismatch_fails(workdir, capsys):
    (workdir / "preds.csv").write_text("id,p_class0,p_class1\n0,0.5,0.5\n")
    (workdir / "obs.csv").write_text("x1,y\n0.1,1\n0.2,0\n")
    assert main(["evaluate", "--pred", "preds.csv", "--data", "obs.csv"]) == 1
    assert "has 1 rows but" in capsys.readouterr().err


def test_heatmap_exports_csv_and_ppm(workdir, capsys):
    data_csv = write_demo_csv(workdir / "data.csv")
    assert main(["fit", "--data", str(data_csv), "--trees", "10",
                 "--seed", "7", "--out", "m.npz"]) == 0
    (workdir / "slice.json").write_text(json.dumps({
        "x_feature": 0, "y_feature": 1,
        "x_range": [-2.0, 2.0], "y_range": [-2.0, 2.0], "resolution": 12,
    }))
    assert main(["heatmap", "--model", "m.npz", "--slice", "slice.json",
                 "--data", str(data_csv), "--out", "surface"]) == 0
    csv_lines = (workdir / "surface.csv").read_text().splitlines()
    assert csv_lines[0] == "x,y,prob"
    assert len(csv_lines) == 1 + 12 * 12
    raw = (workdir / "surface.ppm").read_bytes()
    assert raw.startswith(b"P6\n12 12\n255\n")
    assert len(raw) == len(b"P6\n12 12\n255\n") + 12 * 12 * 3

    (workdir / "bad.json").write_text(json.dumps({"x_feature": 0, "y_feature": 1,
                                                  "surprise": True}))
    assert main(["heatmap", "--model", "m.npz", "--slice", "bad.json"]) == 1
    assert "unknown slice key 'surprise'" in capsys.readouterr().err


def test_dgm_check_tolerance_gates_exit_code(workdir, capsys):
    base = ["dgm-check", "--filter", "b_4c_75_0_bal", "--n", "5000"]
    assert main(base + ["--tolerance", "0.05", "--out", "report.json"]) == 0
    report = json.loads((workdir / "report.json").read_text())
    assert report["all_within_tolerance"] is True
    assert len(report["designs"]) == 1
    assert report["designs"][0]["label"] == "b_4c_75_0_bal"
    out = capsys.readouterr().out
    assert "ok" in out and "1 designs at n=5000" in out

    # the same frozen draw misses the default 0.01 tolerance
    assert main(base) == 2
    assert "OUT OF TOLERANCE" in capsys.readouterr().out

    assert main(["dgm-check", "--filter", "no_such_design"]) == 1
    assert "no designs match" in capsys.readouterr().err


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.startswith("forestlab ")
