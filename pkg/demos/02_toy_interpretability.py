"""Two heads on the toy generator: which head finds which planted feature, and where it looks.

A small L1 penalty on the scaling coefficients keeps each head on one feature;
without it the heads tend to learn mixtures that fit just as well.

Run: python demos/02_toy_interpretability.py
"""
import numpy as np

from feats import FeatsModel, GeneratorSpec, TrainConfig, align_heads, extract_weights, generate, train
from feats.interpret import variance_tables

gen = generate(GeneratorSpec("toy25", 4000, 1000, seed=5))
model, hist = train(FeatsModel(3, 10, heads=2, tau=0, l1=1e-4, seed=5), gen.train, TrainConfig(seed=5, lr=5e-3))
print(f"trained {len(hist.train_loss)} epochs, best validation MSE {hist.best_val_loss:.5f}")

ext = extract_weights(model, gen.test.X)
table = align_heads(ext.features, gen.components_for("test"))
for name, (h, r) in table.best_for_component().items():
    mean_abs = np.abs(ext.weights[h]).mean(axis=0)
    print(f"\n{name}: head {h}, |corr| {r:.3f}; mean |weight| per series x time")
    print(np.array2string(mean_abs, precision=2, suppress_small=True))

for h, t in enumerate(variance_tables(ext)):
    print(f"\nhead {h}: feature variance {t.feature:.3f}, per-series", np.round(t.series, 3))
