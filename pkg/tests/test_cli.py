import csv
import json

import numpy as np
import pytest

from shapedyn import cli, io
from shapedyn import var_model as vm


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert cli.main(["simulate", "--n-per-class", "3", "--length", "50", "--n-points", "64",
                     "--seed", "1", "--out", str(out)]) == 0
    return out


def test_simulate_layout(dataset):
    manifest = io.read_json(dataset / "manifest.json")
    assert manifest["command"] == "simulate"
    table = rows(dataset / "manifest.csv")
    assert len(table) == 12 and len({r["class"] for r in table}) == 4
    seq = io.read_sequence(dataset / table[0]["path"])
    assert len(seq.frames) == 50 and seq.label == table[0]["class"]
    assert all(rel in manifest["outputs"] for rel in ("manifest.csv", table[0]["path"]))
    assert manifest["streams"]


def test_ingest_and_geodesic(dataset, tmp_path, capsys):
    files = sorted((dataset / "sequences").glob("*.json"))
    code, out, _ = run(capsys, "ingest", files[0], files[1], "--n-points", 40, "--out",
                       tmp_path / "ing")
    assert code == 0
    norm = io.read_sequence(tmp_path / "ing" / "normalized" / f"{files[0].stem}.json")
    assert norm.frames[0].shape == (40, 2)
    code, out, _ = run(capsys, "geodesic", files[0], files[-1], "--steps", 5,
                       "--out", tmp_path / "geo")
    assert code == 0
    assert json.loads(out)["summary"]["distance"] > 0
    assert len(rows(tmp_path / "geo" / "geodesic.csv")) == 5 * 100


def test_embed_fit_predict_chain(dataset, tmp_path, capsys):
    seqs = dataset / "sequences"
    code, _, _ = run(capsys, "embed", seqs, "--pca-dim", 3, "--n-points", 64, "--recon-errors",
                     "--out", tmp_path / "emb")
    assert code == 0
    basis = io.read_json(tmp_path / "emb" / "basis.json")
    assert basis["d"] == 3 and basis["grid_size"] == 64
    series = sorted((tmp_path / "emb" / "series").glob("*.csv"))
    assert len(series) == 12
    _, vals = io.read_matrix(series[0])
    assert vals.shape == (49, 3)
    assert rows(tmp_path / "emb" / "reconstruction_error.csv")

    code, out, _ = run(capsys, "fit", series[0], "--lag", 2, "--out", tmp_path / "fit")
    assert code == 0
    model = vm.VarModel.from_dict(io.read_json(
        tmp_path / "fit" / "models" / f"{series[0].stem}.var.json"))
    assert model.p == 2 and model.d == 3

    code, out, _ = run(capsys, "select-lag", series[0], "--p-max", 3, "--out", tmp_path / "sel")
    assert code == 0
    assert len(rows(tmp_path / "sel" / "criteria_vs_lag.csv")) == 3


def test_predict_picks_lag_one_on_var1_data(tmp_path, capsys):
    true = vm.VarModel(1, np.zeros(3), np.array([0.7 * np.eye(3)]), 0.01 * np.eye(3))
    path = tmp_path / "var1.csv"
    io.write_matrix(path, vm.synthesize(true, np.zeros((1, 3)), 400, seed=2), ["a", "b", "c"])
    code, out, _ = run(capsys, "predict", path, "--train-frac", 0.75, "--lags", "1..4",
                       "--out", tmp_path / "pred")
    assert code == 0
    table = rows(tmp_path / "pred" / "prediction_error_vs_lag.csv")
    assert [int(r["p"]) for r in table] == [1, 2, 3, 4]
    assert json.loads(out)["summary"]["best_lag"]["var1"] == 1
    code, out, _ = run(capsys, "compare-models", path, "--out", tmp_path / "cmp")
    assert code == 0
    row = rows(tmp_path / "cmp" / "model_comparison.csv")[0]
    assert float(row["var_error"]) < float(row["dcc_garch_error"])


def test_synth_writes_sequence(dataset, tmp_path, capsys):
    src = sorted((dataset / "sequences").glob("*.json"))[0]
    code, out, _ = run(capsys, "synth", src, "--n-points", 64, "--length", 20,
                       "--out", tmp_path / "syn")
    assert code == 0
    made = io.read_sequence(tmp_path / "syn" / f"{src.stem}_synth.json")
    assert len(made.frames) == 21


def test_features_and_classify(dataset, tmp_path, capsys):
    seqs = dataset / "sequences"
    code, _, _ = run(capsys, "features", seqs, "--n-points", 64, "--features", "combined",
                     "--out", tmp_path / "feat")
    assert code == 0
    ids, dist = io.read_matrix(tmp_path / "feat" / "distances.csv")
    assert dist.shape == (12, 12) and np.allclose(np.diag(dist), 0, atol=1e-10)
    code, out, _ = run(capsys, "classify", seqs, "--n-points", 64, "--folds", 3,
                       "--classifier", "knn", "--out", tmp_path / "cls")
    assert code == 0
    report = io.read_json(tmp_path / "cls" / "report.json")
    assert 0 <= report["accuracy"] <= 1 and len(report["folds"]) == 3
    for fold in report["folds"]:
        assert not set(fold["train"]) & set(fold["test"])
    assert (tmp_path / "cls" / "report.txt").read_text().strip().endswith(
        f"accuracy {report['accuracy']:.4f}")


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 5, "n_points": 48, "weights": [1, 2]}))
    code, _, _ = run(capsys, "simulate", "--config", cfg, "--seed", 6, "--n-per-class", 1,
                     "--length", 45, "--out", tmp_path / "s")
    assert code == 0
    conf = io.read_json(tmp_path / "s" / "manifest.json")["config"]
    assert conf["seed"] == 6 and conf["n_points"] == 48 and conf["weights"] == [1.0, 2.0]
    cfg.write_text(json.dumps({"bogus": 1}))
    code, _, err = run(capsys, "simulate", "--config", cfg, "--out", tmp_path / "t")
    assert code == 2 and "bogus" in err


def test_errors_are_structured(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"sequence_id": "broken", "frames": [[[0, 0]] * 10] * 8}))
    code, _, err = run(capsys, "embed", bad, "--out", tmp_path / "e")
    assert code == 2
    info = json.loads(err)
    assert info["input_id"] == "broken" and info["module"] and info["operation"]
    code, _, err = run(capsys, "ingest", tmp_path / "missing.json", "--out", tmp_path / "m")
    assert code == 2 and json.loads(err)["input_id"].endswith("missing.json")
    short = tmp_path / "short.csv"
    io.write_matrix(short, np.random.default_rng(0).normal(size=(40, 2)))
    code, _, err = run(capsys, "compare-models", short, "--out", tmp_path / "c")
    assert code == 2 and json.loads(err)["input_id"] == "short"


def test_rerun_is_byte_identical(dataset, tmp_path, capsys):
    seqs = dataset / "sequences"
    for name in ("a", "b"):
        assert run(capsys, "embed", seqs, "--pca-dim", 3, "--n-points", 64,
                   "--out", tmp_path / name)[0] == 0
    a = io.read_json(tmp_path / "a" / "manifest.json")["outputs"]
    b = io.read_json(tmp_path / "b" / "manifest.json")["outputs"]
    assert a == b
