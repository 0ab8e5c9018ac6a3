"""Three heads on the continuous simulation: test MSE against the noise floor and head alignment.

Run: python demos/03_continuous_recovery.py [n_train]   (default 5000; the acceptance run uses 50000)

The weakest component (a zero-sum linear filter) needs the larger sample to get a head of its own.
"""
import sys

from feats import FeatsModel, GeneratorSpec, TrainConfig, align_heads, extract_weights, generate, train
from feats.metrics import mse

n = int(sys.argv[1]) if len(sys.argv) > 1 else 5000
gen = generate(GeneratorSpec("sim31", n, 2000, seed=7))
model, hist = train(FeatsModel(2, 50, heads=3, tau=3, seed=7), gen.train, TrainConfig(seed=7, lr=2e-2, patience=20))
print(f"test MSE {mse(model.predict(gen.test.X), gen.test.y):.4f} (noise variance {gen.noise_variance:.4g})")

table = align_heads(extract_weights(model, gen.test.X).features, gen.components_for("test"))
for name, (h, r) in table.best_for_component().items():
    print(f"  {name:8s} -> head {h}  |corr| {r:.3f}")
