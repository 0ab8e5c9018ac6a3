"""The multi-head feature engineering machine, its losses, a plain MLP baseline, and model files."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import tensor as tn
from .data import atomic_write_text
from .errors import ConfigError, DataError, DimensionError, UnsupportedVersionError
from .layers import (DEFAULT_HIDDEN, FeatureHead, GamRidge, HeadConfig, HeadOutput, Subnet,
                     feature_attention, scaling_coefficients)
from .rng import STREAM_INIT, make_rng
from .tensor import Parameter, Tensor

FORMAT_VERSION = 1
TASKS = ("regression", "binary", "multiclass")
DOWNSTREAMS = ("linear", "logistic", "softmax", "feature_attention")
DEFAULT_DOWNSTREAM = {"regression": "linear", "binary": "logistic", "multiclass": "softmax"}
PROB_CLAMP = 1e-12


class Scaler:
    """Per-variable standardization fitted on training data (targets untouched)."""

    def __init__(self, m: int, p: int):
        self.x_mean = np.zeros(m)
        self.x_std = np.ones(m)
        self.z_mean = np.zeros(p)
        self.z_std = np.ones(p)

    def fit(self, X: np.ndarray, Z: np.ndarray | None = None):
        self.x_mean = X.mean(axis=(0, 2))
        sd = X.std(axis=(0, 2))
        self.x_std = np.where(sd > 0, sd, 1.0)
        if Z is not None and Z.shape[1]:
            self.z_mean = Z.mean(axis=0)
            sd = Z.std(axis=0)
            self.z_std = np.where(sd > 0, sd, 1.0)
        return self

    def transform_X(self, X: np.ndarray) -> np.ndarray:
        return (X - self.x_mean[None, :, None]) / self.x_std[None, :, None]

    def transform_Z(self, Z: np.ndarray) -> np.ndarray:
        return (Z - self.z_mean) / self.z_std

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("x_mean", "x_std", "z_mean", "z_std")}

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        s = cls(len(d["x_mean"]), len(d["z_mean"]))
        for k in ("x_mean", "x_std", "z_mean", "z_std"):
            setattr(s, k, np.asarray(d[k], dtype=np.float64).reshape(-1))
        return s


# losses -----------------------------------------------------------------------

def data_loss(output: Tensor, y, weights=None, task: str = "regression") -> Tensor:
    """Weighted mean loss of raw model outputs.

    ``output`` is the prediction (regression), the logit (binary) or the
    (B, K) logits (multiclass).  Probabilities are clamped to
    ``[1e-12, 1 - 1e-12]`` before taking logs.
    """
    output = tn.as_tensor(output)
    y = np.asarray(y, dtype=np.float64)
    if np.any(np.isnan(y)):
        raise DataError("target contains NaN")
    w = np.ones(len(y)) if weights is None else np.asarray(weights, dtype=np.float64)
    if output.shape[0] != len(y) or len(w) != len(y):
        raise DimensionError(f"loss: {output.shape[0]} predictions, {len(y)} targets, {len(w)} weights")
    wn = w / w.sum()
    if task == "regression":
        per = tn.square(output - y)
    elif task == "binary":
        p = tn.clip(tn.sigmoid(output), PROB_CLAMP, 1.0 - PROB_CLAMP)
        per = -(tn.log(p) * y + tn.log(1.0 - p) * (1.0 - y))
    elif task == "multiclass":
        yi = y.astype(np.int64)
        probs = tn.clip(tn.softmax(output, axis=-1), PROB_CLAMP, 1.0 - PROB_CLAMP)
        per = -tn.log(probs[np.arange(len(yi)), yi])
    else:
        raise ConfigError(f"unknown task {task!r}")
    return tn.tsum(per * wn)


def penalty_term(params: Sequence[Parameter], l1: float = 0.0, l2: float = 0.0):
    """L1/L2 penalty over the scaling coefficients among ``params`` (0.0 when both are zero)."""
    total = 0.0
    if not (l1 or l2):
        return total
    for p in params:
        if not p.scaling:
            continue
        if l1:
            total = total + l1 * tn.tsum(tn.tabs(p))
        if l2:
            total = total + l2 * tn.tsum(tn.square(p))
    return total


def loss(output, y, weights=None, task: str = "regression", params: Sequence[Parameter] = (),
         l1: float = 0.0, l2: float = 0.0) -> Tensor:
    return data_loss(output, y, weights, task) + penalty_term(params, l1, l2)


# models -------------------------------------------------------------------------

@dataclass
class ForwardResult:
    output: Tensor
    features: Tensor | None = None
    ridges: Tensor | None = None
    gates: np.ndarray | None = None
    heads: list | None = None

    @property
    def prediction(self) -> np.ndarray:
        return self.output.data


def link(output: np.ndarray, task: str) -> np.ndarray:
    """Map raw outputs to predictions: identity, sigmoid probability, or softmax probabilities."""
    if task == "binary":
        return tn._sigmoid_np(output)
    if task == "multiclass":
        return tn.softmax_np(output, axis=-1)
    return output


class _Model:
    kind = "base"

    def __init__(self, m: int, length: int, p: int, task: str, n_classes: int | None, seed: int):
        if task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {task!r}")
        if task == "multiclass" and (n_classes is None or n_classes < 2):
            raise ConfigError("multiclass task needs n_classes >= 2")
        self.m, self.length, self.p = int(m), int(length), int(p)
        self.task = task
        self.n_classes = int(n_classes) if task == "multiclass" else None
        self.seed = int(seed)
        self.scaler = Scaler(self.m, self.p)
        self.fitted = False
        self.l1 = 0.0
        self.l2 = 0.0

    @property
    def out_dim(self) -> int:
        return self.n_classes if self.task == "multiclass" else 1

    def parameters(self) -> list:
        raise NotImplementedError

    def named_parameters(self) -> dict:
        return {p.name: p for p in self.parameters()}

    def n_parameters(self) -> int:
        return int(sum(p.data.size for p in self.parameters()))

    def penalty(self):
        return penalty_term(self.parameters(), self.l1, self.l2)

    def _check_inputs(self, X, Z):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 2:
            X = X[None]
        if X.ndim != 3 or X.shape[1:] != (self.m, self.length):
            raise DimensionError(f"expected X of shape (B, {self.m}, {self.length}), got {X.shape}")
        if Z is None:
            Z = np.zeros((X.shape[0], 0))
        Z = np.asarray(Z, dtype=np.float64)
        if Z.ndim == 1:
            Z = Z[None] if self.p and Z.shape[0] == self.p and X.shape[0] == 1 else Z.reshape(-1, self.p)
        if Z.shape != (X.shape[0], self.p):
            raise DimensionError(f"expected Z of shape ({X.shape[0]}, {self.p}), got {Z.shape}")
        return X, Z

    def forward(self, X, Z=None) -> ForwardResult:
        X, Z = self._check_inputs(X, Z)
        return self._forward(self.scaler.transform_X(X), self.scaler.transform_Z(Z))

    def predict(self, X, Z=None, batch_size: int = 2048) -> np.ndarray:
        X, Z = self._check_inputs(X, Z)
        outs = [self.forward(X[i:i + batch_size], Z[i:i + batch_size]).output.data
                for i in range(0, X.shape[0], batch_size)]
        out = np.concatenate(outs, axis=0)
        return link(out, self.task)

    def _forward(self, Xs: np.ndarray, Zs: np.ndarray) -> ForwardResult:
        raise NotImplementedError

    def get_state(self) -> list:
        return [p.data.copy() for p in self.parameters()]

    def set_state(self, state: list):
        for p, v in zip(self.parameters(), state):
            p.data[...] = v


class FeatsModel(_Model):
    """Feature-engineering heads, optional GAM ridges and a downstream model trained jointly.

    The downstream input is ``[g_1(z_1) .. g_p(z_p), f_1(X) .. f_n(X)]`` (raw
    standardized covariates replace the ridges when ``gamnet=False``).
    """

    kind = "feats"

    def __init__(self, m: int, length: int, p: int = 0, heads: Sequence[HeadConfig] | int = 1,
                 task: str = "regression", downstream: str | None = None, n_classes: int | None = None,
                 gamnet: bool | None = None, gam_hidden: Sequence[int] = DEFAULT_HIDDEN,
                 downstream_hidden: Sequence[int] = DEFAULT_HIDDEN, tau: int = 3,
                 hidden: Sequence[int] = DEFAULT_HIDDEN, l1: float = 0.0, l2: float = 0.0,
                 seed: int = 0, _init: bool = True):
        super().__init__(m, length, p, task, n_classes, seed)
        if isinstance(heads, (int, np.integer)):
            heads = [HeadConfig(tau=tau, hidden=tuple(hidden)) for _ in range(int(heads))]
        self.head_configs = list(heads)
        if not self.head_configs:
            raise ConfigError("at least one head is required")
        self.downstream = downstream or DEFAULT_DOWNSTREAM[task]
        if self.downstream not in DOWNSTREAMS:
            raise ConfigError(f"downstream must be one of {DOWNSTREAMS}")
        allowed = {"regression": ("linear", "feature_attention"),
                   "binary": ("logistic", "feature_attention"),
                   "multiclass": ("softmax",)}[task]
        if self.downstream not in allowed:
            raise ConfigError(f"downstream {self.downstream!r} is not valid for task {task!r}")
        if l1 < 0 or l2 < 0:
            raise ConfigError("penalties must be non-negative")
        self.l1, self.l2 = float(l1), float(l2)
        self.gamnet = (self.p > 0) if gamnet is None else bool(gamnet and self.p > 0)
        self.gam_hidden = tuple(gam_hidden)
        self.downstream_hidden = tuple(downstream_hidden)

        rng = make_rng(self.seed, STREAM_INIT) if _init else None
        self.heads = [FeatureHead(self.m, self.length, cfg, rng, name=f"head{i}")
                      for i, cfg in enumerate(self.head_configs)]
        self.gams = [GamRidge(self.gam_hidden, rng, name=f"gam{j}") for j in range(self.p)] if self.gamnet else []
        n_in = len(self.heads) + self.p
        self.n_inputs = n_in
        if self.downstream == "feature_attention":
            self.fa_net = Subnet(n_in, n_in, self.downstream_hidden, rng, name="ds.gate")
            self.fa_s = scaling_coefficients((n_in,), "ds.s")
            self.ds_params = [*self.fa_net.parameters(), self.fa_s]
        else:
            k = self.out_dim
            # zero start: a random sign here can trap a head in a mirrored optimum
            self.ds_W = Parameter(np.zeros((n_in, k)), name="ds.W")
            self.ds_b = Parameter(np.zeros(k), name="ds.b")
            self.ds_params = [self.ds_W, self.ds_b]

    @property
    def n_heads(self) -> int:
        return len(self.heads)

    def parameters(self) -> list:
        out = []
        for h in self.heads:
            out += h.parameters()
        for g in self.gams:
            out += g.parameters()
        return out + self.ds_params

    def scaling_parameters(self) -> list:
        return [p for p in self.parameters() if p.scaling]

    def _forward(self, Xs, Zs) -> ForwardResult:
        head_outs: list[HeadOutput] = [h.forward(Xs) for h in self.heads]
        features = tn.stack([o.feature for o in head_outs], axis=-1)
        parts = []
        ridges = None
        if self.p:
            if self.gamnet:
                ridges = tn.stack([g(Zs[:, j]) for j, g in enumerate(self.gams)], axis=-1)
                parts.append(ridges)
            else:
                parts.append(tn.Tensor(Zs))
        parts.append(features)
        O = parts[0] if len(parts) == 1 else tn.concat(parts, axis=-1)
        gates = None
        if self.downstream == "feature_attention":
            out, g = feature_attention(O, self.fa_net, self.fa_s)
            gates = g.data
        else:
            out = tn.matmul(O, self.ds_W) + self.ds_b
            if self.out_dim == 1:
                out = out.reshape(out.shape[0])
        return ForwardResult(out, features, ridges, gates, head_outs)

    def head_weights(self, X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Flattened attention weights for every head.

        Returns ``(W, features, Xs)``: W is (n_heads, B, m, L) on the
        standardized inputs ``Xs`` that the heads consume, and features is
        (n_heads, B).
        """
        X = np.asarray(X, dtype=np.float64)
        X, _ = self._check_inputs(X, np.zeros((X.shape[0] if X.ndim == 3 else 1, self.p)))
        Xs = self.scaler.transform_X(X)
        Ws, feats = [], []
        for h in self.heads:
            out = h.forward(Xs)
            Ws.append(h.weights(out))
            feats.append(out.feature.data)
        return np.stack(Ws), np.stack(feats), Xs

    def ridge_export(self, j: int, lo: float = -3.0, hi: float = 3.0, num: int = 121):
        """Evaluate ridge ``g_j`` on a grid of raw covariate values."""
        if not self.gamnet:
            raise ConfigError("model has no GAM ridges")
        z = np.linspace(lo, hi, num)
        zs = (z - self.scaler.z_mean[j]) / self.scaler.z_std[j]
        return z, self.gams[j](zs).data.copy()

    # serialization ----------------------------------------------------------
    def to_dict(self) -> dict:
        def weights(params):
            return {p.name: p.data.tolist() for p in params}

        return {
            "format_version": FORMAT_VERSION,
            "kind": self.kind,
            "created_with_seed": self.seed,
            "fitted": self.fitted,
            "task": self.task,
            "n_classes": self.n_classes,
            "m": self.m, "T": self.length - 1, "p": self.p,
            "heads": [{**h.config.to_dict(), "subnet_widths": {"kernel": list(h.kernel.widths),
                                                              "time": list(h.time_net.widths)},
                       "weights": weights(h.parameters())} for h in self.heads],
            "gamnets": {"enabled": self.gamnet, "hidden": list(self.gam_hidden),
                        "ridges": [weights(g.parameters()) for g in self.gams]},
            "downstream": {"type": self.downstream, "hidden": list(self.downstream_hidden),
                           "weights": weights(self.ds_params)},
            "penalties": {"l1": self.l1, "l2": self.l2},
            "scaler": self.scaler.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatsModel":
        model = cls(d["m"], d["T"] + 1, d["p"], [HeadConfig.from_dict(h) for h in d["heads"]],
                    task=d["task"], downstream=d["downstream"]["type"], n_classes=d["n_classes"],
                    gamnet=d["gamnets"]["enabled"], gam_hidden=d["gamnets"]["hidden"],
                    downstream_hidden=d["downstream"]["hidden"], l1=d["penalties"]["l1"],
                    l2=d["penalties"]["l2"], seed=d["created_with_seed"], _init=False)
        blocks = [h["weights"] for h in d["heads"]] + d["gamnets"]["ridges"] + [d["downstream"]["weights"]]
        _load_weights(model.parameters(), blocks)
        model.scaler = Scaler.from_dict(d["scaler"])
        model.fitted = bool(d["fitted"])
        return model


class MLPModel(_Model):
    """Plain ReLU feed-forward baseline on the flattened panel and covariates."""

    kind = "mlp"

    def __init__(self, m: int, length: int, p: int = 0, hidden: Sequence[int] = (40, 40),
                 task: str = "regression", n_classes: int | None = None, seed: int = 0, _init: bool = True):
        super().__init__(m, length, p, task, n_classes, seed)
        self.hidden = tuple(int(h) for h in hidden)
        rng = make_rng(self.seed, STREAM_INIT) if _init else None
        self.net = Subnet(self.m * self.length + self.p, self.out_dim, self.hidden, rng, name="mlp")

    def parameters(self) -> list:
        return self.net.parameters()

    def _forward(self, Xs, Zs) -> ForwardResult:
        flat = np.concatenate([Xs.reshape(Xs.shape[0], -1), Zs], axis=1)
        out = self.net(flat)
        if self.out_dim == 1:
            out = out.reshape(out.shape[0])
        return ForwardResult(out)

    def to_dict(self) -> dict:
        return {"format_version": FORMAT_VERSION, "kind": self.kind, "created_with_seed": self.seed,
                "fitted": self.fitted, "task": self.task, "n_classes": self.n_classes,
                "m": self.m, "T": self.length - 1, "p": self.p, "hidden": list(self.hidden),
                "weights": {p.name: p.data.tolist() for p in self.parameters()},
                "scaler": self.scaler.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "MLPModel":
        model = cls(d["m"], d["T"] + 1, d["p"], d["hidden"], d["task"], d["n_classes"],
                    d["created_with_seed"], _init=False)
        _load_weights(model.parameters(), [d["weights"]])
        model.scaler = Scaler.from_dict(d["scaler"])
        model.fitted = bool(d["fitted"])
        return model


def mlp_parameter_count(n_inputs: int, hidden: Sequence[int], n_outputs: int = 1) -> int:
    widths = (n_inputs, *hidden, n_outputs)
    return int(sum(a * b + b for a, b in zip(widths[:-1], widths[1:])))


def _load_weights(params: list, blocks: list):
    values = {}
    for block in blocks:
        values.update(block)
    names = {p.name for p in params}
    if set(values) != names:
        raise DataError(f"model file weights do not match architecture: "
                        f"missing {sorted(names - set(values))[:3]}, extra {sorted(set(values) - names)[:3]}")
    for p in params:
        arr = np.asarray(values[p.name], dtype=np.float64)
        if arr.shape != p.data.shape:
            raise DataError(f"weight {p.name}: shape {arr.shape} != expected {p.data.shape}")
        p.data[...] = arr


def model_to_json(model) -> str:
    return json.dumps(model.to_dict(), indent=1, sort_keys=True) + "\n"


def model_from_dict(d: dict):
    if not isinstance(d, dict) or "format_version" not in d:
        raise DataError("not a feats model file")
    if d["format_version"] != FORMAT_VERSION:
        raise UnsupportedVersionError(f"model format version {d['format_version']} is not supported "
                                      f"(this build reads version {FORMAT_VERSION})")
    kinds = {"feats": FeatsModel, "mlp": MLPModel}
    if d.get("kind") not in kinds:
        raise DataError(f"unknown model kind {d.get('kind')!r}")
    try:
        return kinds[d["kind"]].from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (DataError, ConfigError)):
            raise
        raise DataError(f"malformed model file: {exc!r}") from exc


def save_model(model, path):
    atomic_write_text(path, model_to_json(model))


def load_model(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
        d = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: corrupted model file ({exc})") from exc
    return model_from_dict(d)
