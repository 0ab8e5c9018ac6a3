"""Command-line entry point: ``feats generate|train|evaluate|explain|bench``.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 training failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .data import atomic_write_text, load_panel_csv, load_uea_ts, save_panel_csv, write_csv
from .datagen import EXPERIMENTS, GeneratorSpec, generate
from .errors import ConfigError, DataError, FeatsError, StateError, TrainingError
from .experiments import DEFAULT_TRAIN, load_config, run_experiment
from .interpret import (align_heads, extract_weights, variance_tables, write_alignment_csv,
                        write_boxstats_csv, write_variance_csv, write_weights_csv)
from .layers import HeadConfig
from .metrics import metrics
from .model import FeatsModel, load_model, save_model
from .training import TrainConfig, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TRAIN = 0, 1, 2, 3


def _apply_config(args, parser):
    """Values from ``--config`` override command-line flags of the same name."""
    if getattr(args, "config", None):
        cfg = load_config(args.config)
        for key, value in cfg.items():
            dest = key.replace("-", "_")
            if hasattr(args, dest):
                setattr(args, dest, value)
    if args.command in ("generate", "train") and args.seed is None:
        parser.error("--seed is required (directly or through --config)")
    return args


def cmd_generate(args) -> int:
    spec = GeneratorSpec(experiment=args.experiment, n_train=args.n_train, n_test=args.n_test,
                         seed=args.seed, C=args.C, omega=args.omega, alpha1=args.alpha1,
                         noise_sd=args.noise_sd)
    gen = generate(spec)
    out = Path(args.out)
    for split, ds in (("train", gen.train), ("test", gen.test)):
        if ds.n == 0:
            continue
        save_panel_csv(ds, out, prefix=f"{split}_")
        comps = gen.components_for(split)
        names = list(comps)
        cols = [comps[k] for k in names]
        lo = gen.log_odds_for(split)
        if lo is not None:
            names.append("log_odds")
            cols.append(lo)
        write_csv(out / f"{split}_truth.csv", ["sample_id", *names],
                  ((i, *(repr(float(c[i])) for c in cols)) for i in range(ds.n)))
    meta = {**gen.meta, "n_train": spec.n_train, "n_test": spec.n_test}
    atomic_write_text(out / "meta.json", json.dumps(meta, indent=1, sort_keys=True) + "\n")
    return EXIT_OK


def _load_inputs(args, with_y=True):
    if getattr(args, "ts", None):
        return load_uea_ts(args.ts)
    if not args.x:
        raise ConfigError("either --ts or --x/--y is required")
    if with_y and not args.y:
        raise ConfigError("--y is required")
    return load_panel_csv(args.x, args.y if with_y else None, args.z)


def cmd_train(args) -> int:
    ds = _load_inputs(args)
    n_classes = None
    if args.task == "multiclass":
        n_classes = len(ds.class_labels) if ds.class_labels else int(ds.y.max()) + 1
    hidden = tuple(args.hidden)
    heads = [HeadConfig(tau=args.tau, hidden=hidden) for _ in range(args.heads)]
    model = FeatsModel(ds.m, ds.length, ds.p, heads, task=args.task, downstream=args.downstream,
                       n_classes=n_classes, l1=args.l1, l2=args.l2, seed=args.seed)
    tc = TrainConfig(seed=args.seed, lr=args.lr, batch_size=args.batch_size, max_epochs=args.max_epochs,
                     patience=args.patience, val_fraction=args.val_fraction)
    model, hist = train(model, ds, tc)
    save_model(model, args.out)
    if args.history:
        atomic_write_text(args.history, json.dumps(hist.to_dict(), indent=1) + "\n")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    ds = _load_inputs(args)
    report = metrics(model.predict(ds.X, ds.Z), ds.y, ds.weights, model.task)
    text = json.dumps(report, indent=1, sort_keys=True) + "\n"
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_explain(args) -> int:
    model = load_model(args.model)
    if not isinstance(model, FeatsModel):
        raise ConfigError("explain needs a FEATS model file")
    Path(args.out).mkdir(parents=True, exist_ok=True)
    ds = _load_inputs(args, with_y=False)
    ext = extract_weights(model, ds.X)
    out = Path(args.out)
    ids = ds.meta.get("sample_ids")
    write_weights_csv(out / "weights.csv", ext, ids)
    write_variance_csv(out / "variance.csv", variance_tables(ext))
    write_boxstats_csv(out / "boxstats.csv", ext)
    if args.truth:
        truth = _read_truth(args.truth, ids)
        write_alignment_csv(out / "alignment.csv", align_heads(ext.features, truth))
    if model.gamnet:
        for j in range(model.p):
            z, g = model.ridge_export(j, *args.ridge_range)
            write_csv(out / f"ridge_{j}.csv", ["z", "g"], ((repr(a), repr(b)) for a, b in zip(z.tolist(), g.tolist())))
    return EXIT_OK


def _read_truth(path, ids) -> dict:
    import csv

    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[0] != "sample_id":
        raise DataError(f"{path}: first column must be sample_id")
    lookup = {r[0]: r[1:] for r in body}
    missing = [s for s in ids if s not in lookup]
    if missing:
        raise DataError(f"{path}: no truth row for sample {missing[0]}")
    vals = np.array([[float(v) for v in lookup[s]] for s in ids])
    return {name: vals[:, i] for i, name in enumerate(header[1:]) if name != "log_odds"}


def cmd_bench(args) -> int:
    cfg = load_config(args.bench_config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    manifest = run_experiment(cfg, args.out)
    sys.stdout.write(json.dumps({"status": manifest["status"], "outputs": manifest["outputs"]}) + "\n")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="feats", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a simulated dataset as panel CSV")
    g.add_argument("--experiment", choices=EXPERIMENTS, required=True)
    g.add_argument("--n-train", type=int, required=True)
    g.add_argument("--n-test", type=int, required=True)
    g.add_argument("--C", type=float, default=None, help="log-odds multiplier (sim32)")
    g.add_argument("--omega", type=float, default=1.0)
    g.add_argument("--alpha1", type=float, default=0.5)
    g.add_argument("--noise-sd", type=float, default=None)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    def data_args(p, targets=True):
        p.add_argument("--x", help="panel CSV (sample_id,series_id,time,value)")
        if targets:
            p.add_argument("--y", help="targets CSV (sample_id,target[,weight])")
        p.add_argument("--z", help="static covariates CSV (sample_id,covariate_id,value)")
        p.add_argument("--ts", help="UEA .ts classification file instead of CSV")

    t = sub.add_parser("train", help="fit a FEATS model")
    data_args(t)
    t.add_argument("--task", choices=("regression", "binary", "multiclass"), default="regression")
    t.add_argument("--heads", type=int, default=3)
    t.add_argument("--tau", type=int, default=3)
    t.add_argument("--hidden", type=int, nargs="+", default=[10, 10])
    t.add_argument("--downstream", default=None)
    t.add_argument("--l1", type=float, default=0.0)
    t.add_argument("--l2", type=float, default=0.0)
    for key in ("lr", "batch_size", "max_epochs", "patience", "val_fraction"):
        t.add_argument(f"--{key.replace('_', '-')}", type=type(DEFAULT_TRAIN[key]), default=DEFAULT_TRAIN[key])
    t.add_argument("--history", help="write per-epoch losses to this JSON file")
    t.add_argument("--out", required=True, help="model file to write")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="compute metrics of a model file on a dataset")
    e.add_argument("--model", required=True)
    data_args(e)
    e.add_argument("--out", help="metrics JSON (stdout when omitted)")
    e.set_defaults(func=cmd_evaluate)

    x = sub.add_parser("explain", help="export attention weights, variance tables and boxplot statistics")
    x.add_argument("--model", required=True)
    data_args(x, targets=False)
    x.add_argument("--truth", help="CSV of ground-truth components for head alignment")
    x.add_argument("--ridge-range", type=float, nargs=2, default=[-3.0, 3.0])
    x.add_argument("--out", required=True, help="output directory")
    x.set_defaults(func=cmd_explain)

    b = sub.add_parser("bench", help="run a configured experiment end to end")
    b.add_argument("bench_config", metavar="CONFIG", help="experiment config (JSON/YAML) or a run manifest")
    b.add_argument("--out", default=None)
    b.set_defaults(func=cmd_bench)

    for p in (g, t, e, x, b):
        p.add_argument("--seed", type=int, default=None)
        if p is not b:
            p.add_argument("--config", default=None, help="structured-text file overriding flags")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        _apply_config(args, parser)
        return args.func(args)
    except ConfigError as exc:
        print(f"feats: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"feats: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingError, StateError) as exc:
        print(f"feats: training failure: {exc}", file=sys.stderr)
        return EXIT_TRAIN
    except FeatsError as exc:
        print(f"feats: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError) as exc:
        print(f"feats: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
