"""Attention subnets, convolutional attention heads, feature attention and GAM ridges.

All layers take batch-first inputs.  A univariate series batch has shape
(B, L); a multivariate panel batch has shape (B, m, L).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import tensor as tn
from .errors import ConfigError, DimensionError
from .tensor import Parameter, Tensor

DEFAULT_HIDDEN = (10, 10)


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Subnet:
    """Small ReLU feed-forward network: in -> hidden... -> out (linear output).

    Used for every attention score generator (pre-activation scores ``e``)
    and for the one-input GAM ridge functions.
    """

    def __init__(self, in_dim: int, out_dim: int, hidden: Sequence[int] = DEFAULT_HIDDEN,
                 rng: np.random.Generator | None = None, name: str = "subnet"):
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)
        self.hidden = tuple(int(h) for h in hidden)
        self.name = name
        widths = (self.in_dim, *self.hidden, self.out_dim)
        self.weights = []
        self.biases = []
        for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
            w = glorot_uniform(rng, a, b) if rng is not None else np.zeros((a, b))
            self.weights.append(Parameter(w, name=f"{name}.W{i}"))
            self.biases.append(Parameter(np.zeros(b), name=f"{name}.b{i}"))

    @property
    def widths(self) -> tuple:
        return (self.in_dim, *self.hidden, self.out_dim)

    def parameters(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def zero_(self):
        for p in self.parameters():
            p.data[...] = 0.0
        return self

    def __call__(self, x) -> Tensor:
        x = tn.as_tensor(x)
        if x.shape[-1] != self.in_dim:
            raise DimensionError(f"{self.name}: expected input width {self.in_dim}, got {x.shape}")
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = tn.matmul(h, w) + b
            if i < last:
                h = tn.relu(h)
        return h


def scaling_coefficients(shape, name: str, init: float = 1.0) -> Parameter:
    """Trainable signed multipliers paired with attention scores (penalty-eligible)."""
    return Parameter(np.full(shape, float(init)), name=name, scaling=True)


def attention_feature(x, subnet: Subnet, s: Parameter):
    """Single-series attention layer.

    Returns ``(feature, weights)`` where ``feature = sum_k softmax(e)_k s_k x_k``
    over the last axis and ``weights = softmax(e) * s`` is a Tensor of the
    same shape as ``x``.
    """
    x = tn.as_tensor(x)
    L = x.shape[-1]
    if subnet.in_dim != L or subnet.out_dim != L or s.shape != (L,):
        raise DimensionError(
            f"attention_feature: series length {L} vs subnet {subnet.in_dim}->{subnet.out_dim}, s {s.shape}")
    scores = tn.softmax(subnet(x), axis=-1)
    weights = scores * s
    return tn.tsum(weights * x, axis=-1), weights


def check_tau(tau: int, length: int):
    if not isinstance(tau, (int, np.integer)) or tau < 0 or tau > length - 1:
        raise ConfigError(f"tau must be an integer in [0, {length - 1}], got {tau!r}")


def conv_attention(x, kernel: Subnet, s1: Parameter, tau: int):
    """Convolutional attention layer producing one intermediate feature per time point.

    ``x`` is (B, m, L).  At every focal time k the kernel subnet scores the
    zero-padded window of all m series over ``k - tau .. k + tau``; the scores
    are normalized jointly over the m*(2*tau+1) positions.  Returns
    ``(xi, scores)`` with ``xi`` a (B, L) Tensor and ``scores`` the (B, L, m,
    2*tau+1) numpy array of kernel attention scores.
    """
    x = tn.as_tensor(x)
    if x.ndim != 3:
        raise DimensionError(f"conv_attention expects (B, m, L), got {x.shape}")
    _, m, L = x.shape
    check_tau(tau, L)
    width = 2 * tau + 1
    if kernel.in_dim != m * width or kernel.out_dim != m * width or s1.shape != (m, width):
        raise DimensionError(
            f"conv_attention: window {m}x{width} vs kernel {kernel.in_dim}->{kernel.out_dim}, s1 {s1.shape}")
    win = tn.sliding_windows(x, tau)
    B = x.shape[0]
    flat = win.reshape(B, L, m * width)
    scores = tn.softmax(kernel(flat), axis=-1)
    xi = tn.tsum(scores * s1.reshape(m * width) * flat, axis=-1)
    return xi, scores.data.reshape(B, L, m, width)


def flatten_head_weights(kernel_scores: np.ndarray, s1: np.ndarray,
                         time_scores: np.ndarray, s2: np.ndarray) -> np.ndarray:
    """Per-input weights W[b, j, k] such that feature = sum_{j,k} W x.

    ``W_{j,k} = sum_l A1_{j,l}(window at k-l) s1_{j,l} A2_{k-l} s2_{k-l}``,
    keeping only focal indices ``k - l`` inside the series.
    """
    B, L, m, width = kernel_scores.shape
    tau = (width - 1) // 2
    coef = kernel_scores * s1[None, None] * (time_scores * s2)[:, :, None, None]
    W = np.zeros((B, m, L + 2 * tau))
    for off in range(width):
        # focal f contributes to input position f + off - tau
        W[:, :, off:off + L] += coef[:, :, :, off].transpose(0, 2, 1)
    return W[:, :, tau:tau + L]


@dataclass
class HeadConfig:
    """Shape and attention scope of one feature-engineering head.

    ``series_subset`` holds 0-based series indices (None = all series);
    ``time_window`` is an inclusive ``(start, stop)`` pair (None = all times).
    """

    tau: int = 3
    hidden: tuple = DEFAULT_HIDDEN
    series_subset: tuple | None = None
    time_window: tuple | None = None

    def resolve(self, m: int, length: int) -> tuple[tuple, tuple]:
        subset = tuple(range(m)) if self.series_subset is None else tuple(int(j) for j in self.series_subset)
        if not subset or any(j < 0 or j >= m for j in subset) or len(set(subset)) != len(subset):
            raise ConfigError(f"series_subset {self.series_subset} invalid for m={m}")
        window = (0, length - 1) if self.time_window is None else tuple(int(t) for t in self.time_window)
        if len(window) != 2 or not 0 <= window[0] <= window[1] <= length - 1:
            raise ConfigError(f"time_window {self.time_window} invalid for series length {length}")
        check_tau(self.tau, window[1] - window[0] + 1)
        return subset, window

    def to_dict(self) -> dict:
        return {"tau": int(self.tau), "hidden": list(self.hidden),
                "series_subset": None if self.series_subset is None else list(self.series_subset),
                "time_window": None if self.time_window is None else list(self.time_window)}

    @classmethod
    def from_dict(cls, d: dict) -> "HeadConfig":
        return cls(tau=int(d["tau"]), hidden=tuple(d["hidden"]),
                   series_subset=None if d.get("series_subset") is None else tuple(d["series_subset"]),
                   time_window=None if d.get("time_window") is None else tuple(d["time_window"]))


@dataclass
class HeadOutput:
    feature: Tensor
    kernel_scores: np.ndarray
    time_scores: np.ndarray
    xi: np.ndarray
    extras: dict = field(default_factory=dict)


class FeatureHead:
    """Kernel subnet + scaling s1 -> intermediate features -> time attention + scaling s2."""

    def __init__(self, m: int, length: int, config: HeadConfig | None = None,
                 rng: np.random.Generator | None = None, name: str = "head"):
        self.config = config or HeadConfig()
        self.m, self.length = int(m), int(length)
        self.subset, self.window = self.config.resolve(self.m, self.length)
        self.name = name
        tau = self.config.tau
        ms = len(self.subset)
        ls = self.window[1] - self.window[0] + 1
        width = 2 * tau + 1
        self.kernel = Subnet(ms * width, ms * width, self.config.hidden, rng, name=f"{name}.kernel")
        self.s1 = scaling_coefficients((ms, width), f"{name}.s1")
        self.time_net = Subnet(ls, ls, self.config.hidden, rng, name=f"{name}.time")
        self.s2 = scaling_coefficients((ls,), f"{name}.s2")

    @property
    def tau(self) -> int:
        return self.config.tau

    def parameters(self) -> list:
        return [*self.kernel.parameters(), self.s1, *self.time_net.parameters(), self.s2]

    def _select(self, x):
        x = tn.as_tensor(x)
        if x.ndim != 3 or x.shape[1:] != (self.m, self.length):
            raise DimensionError(f"{self.name}: expected (B, {self.m}, {self.length}), got {x.shape}")
        t0, t1 = self.window
        full = self.subset == tuple(range(self.m)) and (t0, t1) == (0, self.length - 1)
        if full:
            return x
        return tn.Tensor(x.data[:, list(self.subset), t0:t1 + 1]) if not x.requires_grad else \
            x[:, list(self.subset), t0:t1 + 1]

    def forward(self, x) -> HeadOutput:
        sub = self._select(x)
        xi, kscores = conv_attention(sub, self.kernel, self.s1, self.tau)
        tscores = tn.softmax(self.time_net(xi), axis=-1)
        feature = tn.tsum(tscores * self.s2 * xi, axis=-1)
        return HeadOutput(feature, kscores, tscores.data, xi.data)

    __call__ = forward

    def weights(self, out: HeadOutput) -> np.ndarray:
        """Flattened per-input weights on the full (m, L) grid for a forward result."""
        Wsub = flatten_head_weights(out.kernel_scores, self.s1.data, out.time_scores, self.s2.data)
        B = Wsub.shape[0]
        W = np.zeros((B, self.m, self.length))
        t0, t1 = self.window
        W[:, list(self.subset), t0:t1 + 1] = Wsub
        return W


def stacked_head(x, head: FeatureHead):
    """Return ``(feature, W)`` for a batch: feature as a Tensor, W as (B, m, L) array."""
    out = head.forward(x)
    return out.feature, head.weights(out)


def feature_attention(o, subnet: Subnet, s: Parameter):
    """Sigmoid-gated combination ``sum_j sigmoid(e_j(o)) s_j o_j``.

    Gates are independent (each in (0, 1)), not normalized.  Returns
    ``(prediction, gates)``.
    """
    o = tn.as_tensor(o)
    n = o.shape[-1]
    if subnet.in_dim != n or subnet.out_dim != n or s.shape != (n,):
        raise DimensionError(f"feature_attention: {n} inputs vs subnet {subnet.in_dim}->{subnet.out_dim}, s {s.shape}")
    gates = tn.sigmoid(subnet(o))
    return tn.tsum(gates * s * o, axis=-1), gates


class GamRidge:
    """One-input ridge function g(z) modeled by a 1 -> hidden -> 1 ReLU subnet."""

    def __init__(self, hidden: Sequence[int] = DEFAULT_HIDDEN,
                 rng: np.random.Generator | None = None, name: str = "gam"):
        self.net = Subnet(1, 1, hidden, rng, name=name)
        self.name = name

    def parameters(self) -> list:
        return self.net.parameters()

    def __call__(self, z) -> Tensor:
        z = tn.as_tensor(z)
        return self.net(z.reshape(*z.shape, 1)).reshape(z.shape)

    def grid(self, lo: float = -3.0, hi: float = 3.0, num: int = 121) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate the ridge on an evenly spaced grid (for ridge-function export)."""
        zs = np.linspace(lo, hi, num)
        return zs, self(zs).data.copy()


def gamnet_ridge(z, ridge: GamRidge) -> Tensor:
    return ridge(z)
