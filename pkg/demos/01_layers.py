"""Attention layers by hand: one head on a single input, and the additive weight view.

Run: python demos/01_layers.py
"""
import numpy as np

from feats import FeatureHead, HeadConfig
from feats.layers import stacked_head
from feats.rng import make_rng

rng = np.random.default_rng(0)
x = rng.normal(size=(1, 2, 12))          # one sample, 2 series, 12 time points

head = FeatureHead(2, 12, HeadConfig(tau=1), rng=make_rng(0, 1))
feature, W = stacked_head(x, head)

print("head feature         :", float(feature.data[0]))
print("sum of W * x         :", float((W * x).sum()))
print("weights per series   :")
for j in range(2):
    print(f"  series {j}:", np.array2string(W[0, j], precision=3, suppress_small=True))

# restrict the head to series 1, times 3..6: everything else gets weight exactly 0
narrow = FeatureHead(2, 12, HeadConfig(tau=1, series_subset=(1,), time_window=(3, 6)), rng=make_rng(0, 2))
_, Wn = stacked_head(x, narrow)
print("restricted head, nonzero cells:", [tuple(map(int, c)) for c in np.argwhere(Wn[0] != 0)])
