"""End-to-end experiment runner: data -> model -> metrics -> attributions -> manifest."""

from __future__ import annotations

import copy
import hashlib
import json
import platform
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .data import PanelDataset, atomic_write_text, load_panel_csv, load_uea_ts, write_csv
from .datagen import EXPERIMENTS, GeneratorSpec, generate, oracle_binary
from .errors import ConfigError, FeatsError
from .interpret import (align_heads, extract_weights, variance_tables, write_alignment_csv,
                        write_boxstats_csv, write_variance_csv, write_weights_csv)
from .layers import HeadConfig
from .metrics import metrics
from .model import FeatsModel, save_model
from .training import TrainConfig, ffnn_baseline, split_train_validation, train

DEFAULT_TASK = {"toy25": "regression", "sim31": "regression", "sim32": "binary",
                "sim332": "regression", "uea": "multiclass"}
DEFAULT_MODEL = {
    "toy25": {"heads": 2, "tau": 0},
    "sim31": {"heads": 3, "tau": 3},
    "sim32": {"heads": 3, "tau": 3},
    "sim332": {"heads": 2, "tau": 3, "downstream": "feature_attention", "gamnet": True},
}
DEFAULT_TRAIN = {"lr": 5e-3, "batch_size": 256, "max_epochs": 200, "patience": 10, "val_fraction": 0.1}


def load_config(path) -> dict:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() in (".yaml", ".yml"):
        import yaml

        cfg = yaml.safe_load(text)
    else:
        cfg = json.loads(text)
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    # a manifest from a previous run carries the resolved config
    return cfg["config"] if "config" in cfg and "status" in cfg else cfg


def resolve_config(cfg: dict) -> dict:
    """Fill defaults so the manifest records every setting that influenced the run."""
    cfg = copy.deepcopy(cfg)
    exp = cfg.get("experiment")
    if exp not in (*EXPERIMENTS, "uea", "csv"):
        raise ConfigError(f"unknown experiment {exp!r}")
    if "seed" not in cfg or not isinstance(cfg["seed"], int):
        raise ConfigError("config needs an integer 'seed'")
    cfg.setdefault("task", DEFAULT_TASK.get(exp))
    if cfg["task"] is None:
        raise ConfigError("csv experiments must declare 'task'")
    model = {"heads": 3, "tau": 3, "hidden": [10, 10], "downstream": None, "gamnet": None,
             "l1": 0.0, "l2": 0.0, **DEFAULT_MODEL.get(exp, {}), **cfg.get("model", {})}
    cfg["model"] = model
    cfg["train"] = {**DEFAULT_TRAIN, **cfg.get("train", {})}
    cfg.setdefault("data", {})
    cfg.setdefault("explain_samples", 1000)
    cfg.setdefault("baseline", None)
    return cfg


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def build_data(cfg: dict):
    """Return ``(train, test, truth_test, log_odds_test, input_hashes, meta)``."""
    exp, data = cfg["experiment"], cfg["data"]
    if exp in EXPERIMENTS:
        spec = GeneratorSpec(experiment=exp, seed=cfg["seed"], **data)
        gen = generate(spec)
        return gen.train, gen.test, gen.components_for("test"), gen.log_odds_for("test"), {}, gen.meta
    hashes = {}
    if exp == "uea":
        tr = load_uea_ts(data["train"], split="train")
        te = load_uea_ts(data["test"], split="test")
        if tr.class_labels != te.class_labels:
            raise ConfigError("train and test files declare different class labels")
        hashes = {data["train"]: _sha256(data["train"]), data["test"]: _sha256(data["test"])}
        return tr, te, None, None, hashes, {"problem": tr.meta.get("problem_name"),
                                           "class_labels": tr.class_labels}
    sets = []
    for split in ("train", "test"):
        paths = data[split]
        sets.append(load_panel_csv(paths["X"], paths["y"], paths.get("Z"), split=split))
        for p in paths.values():
            hashes[p] = _sha256(p)
    return sets[0], sets[1], None, None, hashes, {}


def build_model(cfg: dict, ds: PanelDataset, n_classes: int | None) -> FeatsModel:
    mc = cfg["model"]
    heads = mc["heads"]
    if isinstance(heads, int):
        heads = [HeadConfig(tau=mc["tau"], hidden=tuple(mc["hidden"])) for _ in range(heads)]
    else:
        heads = [HeadConfig.from_dict({"hidden": mc["hidden"], "tau": mc["tau"], **h}) for h in heads]
    return FeatsModel(ds.m, ds.length, ds.p, heads, task=cfg["task"], downstream=mc["downstream"],
                      n_classes=n_classes, gamnet=mc["gamnet"], hidden=tuple(mc["hidden"]),
                      l1=mc["l1"], l2=mc["l2"], seed=cfg["seed"])


def _n_classes(cfg, *sets):
    if cfg["task"] != "multiclass":
        return None
    labels = sets[0].class_labels
    if labels:
        return len(labels)
    return int(max(int(s.y.max()) for s in sets)) + 1


def run_experiment(config, out_dir=None) -> dict:
    """Run one configured experiment and write its artifacts.

    ``config`` is a dict, a JSON/YAML path, or a previous run's manifest.
    Writes ``model.json``, ``metrics.json``, attribution CSVs and
    ``manifest.json`` into the output directory and returns the manifest.
    """
    cfg = load_config(config) if not isinstance(config, dict) else config
    cfg = resolve_config(cfg)
    out = Path(out_dir or cfg.get("output_dir") or f"runs/{cfg['experiment']}")
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"status": "running", "config": cfg, "seeds": {"base": cfg["seed"]},
                "versions": {"feats": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                             "python": platform.python_version()},
                "input_hashes": {}, "stages": [], "outputs": {}}
    t0 = time.perf_counter()
    stage = "data"
    try:
        train_ds, test_ds, truth, log_odds, hashes, data_meta = build_data(cfg)
        manifest["input_hashes"] = hashes
        manifest["data"] = data_meta
        manifest["stages"].append(stage)

        stage = "train"
        tc = TrainConfig(seed=cfg["seed"], **cfg["train"])
        fit_ds, val_ds = split_train_validation(train_ds, tc.val_fraction, tc.seed)
        n_classes = _n_classes(cfg, train_ds, test_ds)
        model = build_model(cfg, train_ds, n_classes)
        model, hist = train(model, fit_ds, tc, validation=val_ds)
        save_model(model, out / "model.json")
        manifest["outputs"]["model"] = "model.json"
        manifest["stages"].append(stage)

        stage = "evaluate"
        report = {"experiment": cfg["experiment"], "task": cfg["task"], "seed": cfg["seed"],
                  "config_hash": hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest(),
                  "n_parameters": model.n_parameters(), "history": hist.to_dict(), "splits": {}}
        for name, ds in (("train", fit_ds), ("validation", val_ds), ("test", test_ds)):
            report["splits"][name] = metrics(model.predict(ds.X, ds.Z), ds.y, ds.weights, cfg["task"])
        if log_odds is not None:
            acc, auc_ = oracle_binary(log_odds, test_ds.y)
            report["oracle_test"] = {"accuracy": acc, "auc": auc_}
        if cfg["baseline"]:
            base, _ = ffnn_baseline(fit_ds, tuple(cfg["baseline"].get("widths", (40, 40))), tc,
                                    cfg["task"], n_classes, validation=val_ds)
            report["ffnn_test"] = metrics(base.predict(test_ds.X, test_ds.Z), test_ds.y, test_ds.weights,
                                          cfg["task"])
            report["ffnn_n_parameters"] = base.n_parameters()
        manifest["stages"].append(stage)

        stage = "explain"
        k = min(int(cfg["explain_samples"]), test_ds.n)
        ext = extract_weights(model, test_ds.X[:k])
        write_weights_csv(out / "weights.csv", ext)
        write_variance_csv(out / "variance.csv", variance_tables(ext))
        write_boxstats_csv(out / "boxstats.csv", ext)
        manifest["outputs"].update(weights="weights.csv", variance="variance.csv", boxstats="boxstats.csv")
        if truth is not None:
            _, feats_test, _ = model.head_weights(test_ds.X)
            table = align_heads(feats_test, truth)
            write_alignment_csv(out / "alignment.csv", table)
            manifest["outputs"]["alignment"] = "alignment.csv"
            report["alignment"] = {name: {"head": h, "abs_corr": r}
                                   for name, (h, r) in table.best_for_component().items()}
        if model.gamnet:
            for j in range(model.p):
                z, g = model.ridge_export(j)
                rows = ((repr(a), repr(b)) for a, b in zip(z.tolist(), g.tolist()))
                write_csv(out / f"ridge_{j}.csv", ["z", "g"], rows)
                manifest["outputs"][f"ridge_{j}"] = f"ridge_{j}.csv"
        manifest["stages"].append(stage)

        atomic_write_text(out / "metrics.json", json.dumps(report, indent=1, sort_keys=True) + "\n")
        manifest["outputs"]["metrics"] = "metrics.json"
        manifest["status"] = "ok"
        return manifest
    except (FeatsError, OSError, ValueError) as exc:
        manifest["status"] = "failed"
        manifest["failed_stage"] = stage
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        manifest["partial_outputs"] = sorted(manifest["outputs"].values())
        raise
    finally:
        manifest["wall_time_seconds"] = time.perf_counter() - t0
        atomic_write_text(out / "manifest.json", json.dumps(manifest, indent=1, sort_keys=True) + "\n")
