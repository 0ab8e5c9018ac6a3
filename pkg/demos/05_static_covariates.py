"""Static covariates through GAM ridges and a sigmoid feature-attention downstream.

Run: python demos/05_static_covariates.py
"""
import numpy as np

from feats import FeatsModel, GeneratorSpec, TrainConfig, generate, train
from feats.metrics import mse

gen = generate(GeneratorSpec("sim332", 5000, 2000, seed=6))
model = FeatsModel(2, 50, p=2, heads=2, tau=3, downstream="feature_attention", gamnet=True, seed=6)
model, _ = train(model, gen.train, TrainConfig(seed=6, lr=5e-3))
print(f"train MSE {mse(model.predict(gen.train.X, gen.train.Z), gen.train.y):.4f}, "
      f"test MSE {mse(model.predict(gen.test.X, gen.test.Z), gen.test.y):.4f}")

# the second covariate enters the response through |z|, so its ridge should look even
z, g = model.ridge_export(1, -3.0, 3.0, 13)
for zi, gi in zip(z, g - g.mean()):
    print(f"  z={zi:+.1f}  g={gi:+.3f}  " + "#" * int(round(20 * abs(gi) / np.abs(g - g.mean()).max())))
