"""Binary outcome: FEATS AUC against the Bayes oracle that knows the true log-odds.

Run: python demos/04_binary_oracle.py
"""
from feats import FeatsModel, GeneratorSpec, TrainConfig, generate, oracle_binary, train
from feats.metrics import auc

for C in (50.0, 5.0, 1.0):
    gen = generate(GeneratorSpec("sim32", 5000, 2000, seed=11, C=C))
    model, _ = train(FeatsModel(2, 50, heads=3, task="binary", seed=11), gen.train, TrainConfig(seed=11, lr=5e-3))
    _, oracle_auc = oracle_binary(gen.log_odds_for("test"), gen.test.y)
    print(f"C={C:>4g}: FEATS AUC {auc(model.predict(gen.test.X), gen.test.y):.4f}, oracle AUC {oracle_auc:.4f}")
