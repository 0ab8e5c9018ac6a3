"""Multiclass classification on a UEA archive dataset (.ts files).

Run: python demos/06_uea_classification.py [TRAIN.ts TEST.ts]
Defaults to the BasicMotions copy shipped with the tests.
"""
import sys
from pathlib import Path

from feats import FeatsModel, HeadConfig, TrainConfig, load_uea_ts, train
from feats.metrics import accuracy

here = Path(__file__).resolve().parent.parent / "tests" / "data" / "BasicMotions"
tr_path, te_path = (sys.argv[1:3] if len(sys.argv) > 2
                    else (here / "BasicMotions_TRAIN.ts", here / "BasicMotions_TEST.ts"))
tr, te = load_uea_ts(tr_path, "train"), load_uea_ts(te_path, "test")
print(f"{tr.X.shape[0]} training series, {tr.m} channels, length {tr.length}, classes {tr.class_labels}")

heads = [HeadConfig(tau=10, series_subset=(j,)) for j in range(tr.m)]   # one head per channel
model = FeatsModel(tr.m, tr.length, heads=heads, task="multiclass", n_classes=len(tr.class_labels), seed=7)
model, hist = train(model, tr, TrainConfig(seed=7, lr=5e-3, batch_size=8, patience=30, val_fraction=0.2))
print(f"{len(hist.train_loss)} epochs, test accuracy {accuracy(model.predict(te.X), te.y):.3f}")
