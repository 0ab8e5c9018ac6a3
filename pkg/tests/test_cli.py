import json

import pytest

from feats.cli import main
from feats.data import load_panel_csv

SMALL_TRAIN = ["--max-epochs", "2", "--heads", "2", "--tau", "0", "--batch-size", "32"]


@pytest.fixture
def toy_dir(tmp_path):
    out = tmp_path / "toy"
    assert main(["generate", "--experiment", "toy25", "--n-train", "120", "--n-test", "40",
                 "--seed", "3", "--out", str(out)]) == 0
    return out


def test_generate_outputs(toy_dir):
    for name in ("train_X.csv", "train_y.csv", "test_X.csv", "test_truth.csv", "meta.json"):
        assert (toy_dir / name).exists()
    meta = json.loads((toy_dir / "meta.json").read_text())
    assert meta["spec"]["seed"] == 3 and meta["n_train"] == 120
    ds = load_panel_csv(toy_dir / "train_X.csv", toy_dir / "train_y.csv")
    assert ds.X.shape == (120, 3, 10)
    header = (toy_dir / "test_truth.csv").read_text().splitlines()[0]
    assert header == "sample_id,f1,f2"


def test_generate_sim32_truth_has_log_odds(tmp_path):
    assert main(["generate", "--experiment", "sim32", "--C", "5", "--n-train", "10", "--n-test", "5",
                 "--seed", "1", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "test_truth.csv").read_text().splitlines()[0].endswith(",log_odds")


def test_generate_is_deterministic(tmp_path):
    args = ["generate", "--experiment", "sim332", "--n-train", "20", "--n-test", "5", "--seed", "9", "--out"]
    main(args + [str(tmp_path / "a")])
    main(args + [str(tmp_path / "b")])
    for name in ("train_X.csv", "train_Z.csv", "test_y.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.mark.parametrize("argv", [
    ["generate", "--experiment", "toy25", "--n-train", "5", "--n-test", "5", "--out", "x"],  # no seed
    ["generate", "--experiment", "nope", "--n-train", "5", "--n-test", "5", "--seed", "1", "--out", "x"],
    ["train", "--seed", "1", "--out", "m.json"],  # no inputs
    [],
])
def test_usage_errors_exit_1(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    with pytest.raises(SystemExit) as info:
        code = main(argv)
        raise SystemExit(code)
    assert info.value.code == 1


def test_train_evaluate_explain(toy_dir, tmp_path, capsys):
    model = tmp_path / "model.json"
    assert main(["train", "--x", str(toy_dir / "train_X.csv"), "--y", str(toy_dir / "train_y.csv"),
                 "--seed", "1", "--out", str(model), "--history", str(tmp_path / "h.json"), *SMALL_TRAIN]) == 0
    assert json.loads(model.read_text())["format_version"] == 1
    assert len(json.loads((tmp_path / "h.json").read_text())["train_loss"]) <= 2

    capsys.readouterr()
    assert main(["evaluate", "--model", str(model), "--x", str(toy_dir / "test_X.csv"),
                 "--y", str(toy_dir / "test_y.csv")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["n"] == 40 and "mse" in report

    out = tmp_path / "explain"
    assert main(["explain", "--model", str(model), "--x", str(toy_dir / "test_X.csv"),
                 "--truth", str(toy_dir / "test_truth.csv"), "--out", str(out)]) == 0
    for name in ("weights.csv", "variance.csv", "boxstats.csv", "alignment.csv"):
        assert (out / name).exists()
    rows = (out / "weights.csv").read_text().splitlines()
    assert len(rows) == 1 + 40 * 2 * 3 * 10


def test_config_overrides_flags(toy_dir, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(f"seed: 5\nheads: 1\nmax_epochs: 1\ntau: 0\nx: {toy_dir / 'train_X.csv'}\n"
                   f"y: {toy_dir / 'train_y.csv'}\n")
    model = tmp_path / "m.json"
    assert main(["train", "--config", str(cfg), "--heads", "4", "--out", str(model)]) == 0
    d = json.loads(model.read_text())
    assert len(d["heads"]) == 1 and d["created_with_seed"] == 5


def test_data_error_exit_2(toy_dir, tmp_path):
    bad = tmp_path / "X.csv"
    bad.write_text((toy_dir / "train_X.csv").read_text().replace(",0,0,", ",0,0,abc", 1))
    assert main(["train", "--x", str(bad), "--y", str(toy_dir / "train_y.csv"), "--seed", "1",
                 "--out", str(tmp_path / "m.json")]) == 2
    assert main(["train", "--x", str(tmp_path / "missing.csv"), "--y", str(toy_dir / "train_y.csv"),
                 "--seed", "1", "--out", str(tmp_path / "m.json")]) == 2


def test_corrupt_model_exit_2(toy_dir, tmp_path):
    (tmp_path / "m.json").write_text("{\"format_version\": 1,")
    assert main(["evaluate", "--model", str(tmp_path / "m.json"), "--x", str(toy_dir / "test_X.csv"),
                 "--y", str(toy_dir / "test_y.csv")]) == 2


@pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
def test_training_failure_exit_3(toy_dir, tmp_path):
    y = tmp_path / "y.csv"
    lines = (toy_dir / "train_y.csv").read_text().splitlines()
    y.write_text("\n".join([lines[0]] + [f"{ln.split(',')[0]},1e200,1.0" for ln in lines[1:]]) + "\n")
    assert main(["train", "--x", str(toy_dir / "train_X.csv"), "--y", str(y), "--seed", "1",
                 "--out", str(tmp_path / "m.json"), *SMALL_TRAIN]) == 3
    assert not (tmp_path / "m.json").exists()


def test_bench_writes_manifest(tmp_path, capsys):
    cfg = tmp_path / "bench.json"
    cfg.write_text(json.dumps({"experiment": "toy25", "seed": 2, "data": {"n_train": 200, "n_test": 50},
                               "train": {"max_epochs": 2}}))
    out = tmp_path / "run"
    assert main(["bench", str(cfg), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    assert manifest["stages"] == ["data", "train", "evaluate", "explain"]
    assert manifest["config"]["model"]["heads"] == 2
    metrics = json.loads((out / "metrics.json").read_text())
    assert set(metrics["alignment"]) == {"f1", "f2"}
    # rerunning from the manifest reproduces the run bit for bit
    assert main(["bench", str(out / "manifest.json"), "--out", str(tmp_path / "rerun")]) == 0
    for name in ("model.json", "metrics.json", "weights.csv"):
        assert (out / name).read_bytes() == (tmp_path / "rerun" / name).read_bytes()


def test_bench_failure_flags_manifest(tmp_path):
    cfg = tmp_path / "bench.json"
    cfg.write_text(json.dumps({"experiment": "uea", "seed": 1, "task": "multiclass",
                               "data": {"train": str(tmp_path / "none.ts"), "test": str(tmp_path / "none.ts")}}))
    assert main(["bench", str(cfg), "--out", str(tmp_path / "run")]) == 2
    manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
    assert manifest["status"] == "failed" and manifest["failed_stage"] == "data"
    assert manifest["partial_outputs"] == []
