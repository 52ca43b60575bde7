import csv

import numpy as np
import pytest

from gaqq.cli import cmd_dispatch
from gaqq.estimator import Hyperparams, fit
from gaqq.fileio import DataSchema, load_csv, load_model
from gaqq.predictor import predict_batch
from gaqq.simulation import misclassification_error, rmspe


def run(capsys, *argv):
    code = cmd_dispatch([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def sim_dir(tmp_path, capsys):
    out = tmp_path / "sim"
    code, _, _ = run(capsys, "simulate", "--precision-model", "M2", "--p", 8, "--sizes", "15,15",
                     "--sparsity", "S1", "--seed", 4, "--out-dir", out)
    assert code == 0
    return out


def test_version(capsys):
    code, out, _ = run(capsys, "version")
    assert code == 0 and out.startswith("gaqq ")


@pytest.mark.parametrize("argv", [[], ["bogus"], ["fit"], ["fit", "--data", "x", "--nope", "1"],
                                  ["--threads", "0", "version"]])
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 1 and err


def test_simulate_files(sim_dir):
    rows = list(csv.reader(open(sim_dir / "train.csv")))
    assert rows[0] == [f"x{j}" for j in range(1, 8)] + ["y", "label"]
    assert len(rows) == 31
    assert (sim_dir / "test.csv").exists() and (sim_dir / "truth.json").exists()


def test_fit_predict_matches_in_process(sim_dir, tmp_path, capsys):
    model_path, pred_path = tmp_path / "m.json", tmp_path / "p.csv"
    code, out, _ = run(capsys, "fit", "--data", sim_dir / "train.csv", "--label-col", "label",
                       "--response-col", "y", "--lambda1", 2, "--lambda2", 3,
                       "--out-model", model_path)
    assert code == 0 and "converged=True" in out
    code, out, _ = run(capsys, "predict", "--model", model_path, "--data", sim_dir / "test.csv",
                       "--out", pred_path, "--truth-label-col", "label",
                       "--truth-response-col", "y")
    assert code == 0

    train = load_csv(sim_dir / "train.csv", DataSchema("label", "y"))
    test = load_csv(sim_dir / "test.csv", DataSchema("label", "y"))
    model, _ = fit(train, Hyperparams(2.0, 3.0))
    direct = predict_batch(model, test.x)
    assert np.array_equal(load_model(model_path).c_hat, model.c_hat)

    rows = list(csv.DictReader(open(pred_path)))
    assert len(rows) == test.n
    assert [int(r["row"]) for r in rows] == list(range(test.n))
    np.testing.assert_array_equal([float(r["y_hat"]) for r in rows], direct.y_hat)
    np.testing.assert_array_equal([int(r["z_hat"]) for r in rows], direct.z_hat)
    metrics = dict(line.split("=") for line in out.split())
    assert float(metrics["me"]) == misclassification_error(test.z, direct.z_hat)
    assert float(metrics["rmspe"]) == rmspe(test.y, direct.y_hat)


def test_fit_tune_and_determinism(sim_dir, tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        code, _, _ = run(capsys, "fit", "--data", sim_dir / "train.csv", "--label-col", "label",
                         "--response-col", "y", "--tune", "--grid1", "1,5", "--grid2", "1,5",
                         "--out-model", path)
        assert code == 0
    assert a.read_bytes() == b.read_bytes()
    assert "bic" in load_model(a).meta


def test_fit_needs_penalties(sim_dir, tmp_path, capsys):
    code, _, _ = run(capsys, "fit", "--data", sim_dir / "train.csv", "--label-col", "label",
                     "--response-col", "y", "--out-model", tmp_path / "m.json")
    assert code == 1


def test_data_errors(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("z,a,y\n1,NA,2\n2,1,1\n")
    code, _, err = run(capsys, "fit", "--data", bad, "--label-col", "z", "--response-col", "y",
                       "--lambda1", 1, "--lambda2", 1, "--out-model", tmp_path / "m.json")
    assert code == 2 and "row 2" in err
    code, _, _ = run(capsys, "predict", "--model", tmp_path / "none.json", "--data", bad,
                     "--out", tmp_path / "p.csv")
    assert code == 2


def test_numerical_failure_exit_code(tmp_path, capsys):
    # constant response: the scatter diagonal is zero, so every grid point fails
    data = tmp_path / "flat.csv"
    data.write_text("z,a,y\n1,1,5\n1,2,5\n2,3,5\n2,4,5\n")
    code, _, err = run(capsys, "fit", "--data", data, "--label-col", "z", "--response-col", "y",
                       "--tune", "--grid1", "1", "--grid2", "1", "--out-model", tmp_path / "m.json")
    assert code == 3 and "numerical" in err


def test_benchmark_byte_identical(tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        code, _, _ = run(capsys, "benchmark", "--scenario", "t1-m1-s2-p12", "--reps", 2,
                         "--seed", 1, "--grid", "0.5,5", "--out", tmp_path / name)
        assert code == 0
        outs.append(tmp_path / name)
    for f in ("reps.csv", "summary.csv"):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
    assert (outs[0] / "reps.csv").read_text().startswith("scenario_id,method,rep,me,rmspe\n")


def test_benchmark_unknown_method(tmp_path, capsys):
    code, _, _ = run(capsys, "benchmark", "--scenario", "t1-m1-s2-p12", "--reps", 2,
                     "--methods", "ENET", "--out", tmp_path)
    assert code == 1
