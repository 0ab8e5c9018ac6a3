"""Mini-batch training with early stopping, plus head-count and tau searches."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import tensor as tn
from .data import PanelDataset
from .errors import ConfigError, TrainingError
from .layers import HeadConfig
from .model import FeatsModel, MLPModel, _Model, data_loss
from .optim import Adam
from .rng import STREAM_SHUFFLE, STREAM_SPLIT, make_rng

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    seed: int
    lr: float = 1e-3
    batch_size: int = 256
    max_epochs: int = 200
    patience: int = 10
    val_fraction: float = 0.1
    standardize: bool = True

    def __post_init__(self):
        if self.seed is None:
            raise ConfigError("TrainConfig.seed is mandatory")
        if self.lr <= 0 or self.batch_size <= 0 or self.max_epochs <= 0 or self.patience <= 0:
            raise ConfigError("lr, batch_size, max_epochs and patience must be positive")
        if not 0 < self.val_fraction < 1:
            raise ConfigError("val_fraction must lie in (0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class History:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = float("inf")
    stopped_early: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def split_train_validation(ds: PanelDataset, val_fraction: float, seed: int):
    n = ds.n
    n_val = max(1, int(round(n * val_fraction)))
    if n_val >= n:
        raise ConfigError(f"cannot split {n} samples with val_fraction={val_fraction}")
    perm = make_rng(seed, STREAM_SPLIT).permutation(n)
    return ds.subset(np.sort(perm[n_val:]), "train"), ds.subset(np.sort(perm[:n_val]), "validation")


def _targets(model: _Model, ds: PanelDataset) -> np.ndarray:
    if model.task == "multiclass":
        y = ds.y.astype(np.int64)
        if y.min() < 0 or y.max() >= model.n_classes:
            raise ConfigError(f"class indices must lie in [0, {model.n_classes})")
        return y
    return ds.y.astype(np.float64)


def evaluate_loss(model: _Model, ds: PanelDataset, batch_size: int = 4096) -> float:
    """Weighted data loss (no penalty) over a dataset."""
    y = _targets(model, ds)
    Xs = model.scaler.transform_X(ds.X)
    Zs = model.scaler.transform_Z(ds.Z)
    total, wsum = 0.0, 0.0
    for i in range(0, ds.n, batch_size):
        sl = slice(i, i + batch_size)
        out = model._forward(Xs[sl], Zs[sl]).output
        w = ds.weights[sl]
        total += data_loss(out, y[sl], w, model.task).item() * w.sum()
        wsum += w.sum()
    return total / wsum


def train(model: _Model, dataset: PanelDataset, config: TrainConfig,
          validation: PanelDataset | None = None, callback: Callable | None = None):
    """Fit ``model`` in place and return ``(model, history)``.

    When ``validation`` is omitted a ``config.val_fraction`` share of
    ``dataset`` is held out.  The parameters with the lowest validation loss
    are restored at the end.
    """
    if validation is None:
        train_ds, val_ds = split_train_validation(dataset, config.val_fraction, config.seed)
    else:
        train_ds, val_ds = dataset, validation
    if train_ds.X.shape[1:] != (model.m, model.length) or train_ds.p != model.p:
        raise ConfigError(f"dataset shape {train_ds.X.shape[1:]}, p={train_ds.p} does not match model")
    if config.standardize:
        model.scaler.fit(train_ds.X, train_ds.Z)
    y = _targets(model, train_ds)
    Xs = model.scaler.transform_X(train_ds.X)
    Zs = model.scaler.transform_Z(train_ds.Z)
    w = train_ds.weights
    params = model.parameters()
    opt = Adam(params, lr=config.lr)
    shuffle = make_rng(config.seed, STREAM_SHUFFLE)
    history = History()
    best_state = model.get_state()
    bad_epochs = 0
    n = train_ds.n
    for epoch in range(config.max_epochs):
        order = shuffle.permutation(n)
        running, seen = 0.0, 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            opt.zero_grad()
            out = model._forward(Xs[idx], Zs[idx]).output
            batch_loss = data_loss(out, y[idx], w[idx], model.task) + model.penalty()
            value = batch_loss.item()
            if not np.isfinite(value):
                raise TrainingError(f"loss became non-finite in epoch {epoch}",
                                    last_finite_epoch=epoch - 1 if epoch else None)
            tn.backward(batch_loss)
            try:
                opt.step()
            except TrainingError as exc:
                raise TrainingError(f"{exc} in epoch {epoch}",
                                    last_finite_epoch=epoch - 1 if epoch else None) from exc
            running += value * len(idx)
            seen += len(idx)
        train_loss = running / seen
        val_loss = evaluate_loss(model, val_ds)
        if not np.isfinite(val_loss):
            raise TrainingError(f"validation loss became non-finite in epoch {epoch}",
                                last_finite_epoch=epoch - 1 if epoch else None)
        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
        if val_loss < history.best_val_loss:
            history.best_val_loss = val_loss
            history.best_epoch = epoch
            best_state = model.get_state()
            bad_epochs = 0
        else:
            bad_epochs += 1
        log.debug("epoch %d train %.6g val %.6g", epoch, train_loss, val_loss)
        if callback is not None:
            callback(epoch, train_loss, val_loss)
        if bad_epochs >= config.patience:
            history.stopped_early = True
            break
    model.set_state(best_state)
    model.fitted = True
    return model, history


def ffnn_baseline(dataset: PanelDataset, widths: Sequence[int] = (40, 40), config: TrainConfig | None = None,
                  task: str = "regression", n_classes: int | None = None,
                  validation: PanelDataset | None = None):
    """Train a plain MLP on the flattened panel with the same loop; returns ``(model, history)``."""
    config = config or TrainConfig(seed=0)
    model = MLPModel(dataset.m, dataset.length, dataset.p, widths, task, n_classes, seed=config.seed)
    return train(model, dataset, config, validation)


# hyper-parameter protocols ----------------------------------------------------

@dataclass
class SearchTrace:
    values: list = field(default_factory=list)
    val_losses: list = field(default_factory=list)
    chosen: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _fit_feats(dataset, validation, config, seed, **model_kwargs):
    model = FeatsModel(dataset.m, dataset.length, dataset.p, seed=seed, **model_kwargs)
    model, hist = train(model, dataset, replace(config, seed=seed), validation)
    return model, hist.best_val_loss


def head_count_search(dataset: PanelDataset, config: TrainConfig, model_kwargs: dict | None = None,
                      initial: int | None = None, step: int = 2, threshold: float = 0.01,
                      max_heads: int = 16, validation: PanelDataset | None = None) -> SearchTrace:
    """Grow the head count by ``step`` until validation loss stops improving.

    Starts at ``initial`` heads (the number of series by default).  Stops when
    the relative improvement ``(prev - new) / prev`` is below ``threshold`` and
    keeps the previous count.
    """
    model_kwargs = dict(model_kwargs or {})
    if validation is None:
        dataset, validation = split_train_validation(dataset, config.val_fraction, config.seed)
    count = initial if initial is not None else dataset.m
    trace = SearchTrace()
    index = 0
    while True:
        _, score = _fit_feats(dataset, validation, config, config.seed + index, heads=count, **model_kwargs)
        trace.values.append(count)
        trace.val_losses.append(score)
        if len(trace.val_losses) > 1:
            prev = trace.val_losses[-2]
            improvement = (prev - score) / abs(prev) if prev != 0 else 0.0
            if improvement < threshold:
                trace.chosen = trace.values[-2]
                return trace
        if count + step > max_heads:
            trace.chosen = count
            return trace
        count += step
        index += 1


def tau_grid_search(dataset: PanelDataset, config: TrainConfig, grid: Sequence[int] | None = None,
                    model_kwargs: dict | None = None, tie_tolerance: float = 0.01,
                    validation: PanelDataset | None = None) -> SearchTrace:
    """Train one model per tau and return the validation-best, preferring smaller tau.

    Default grid spans ``0 .. floor(0.2 * T)``.  Any tau whose validation loss
    is within ``tie_tolerance`` (relative) of the best counts as tied.
    """
    model_kwargs = dict(model_kwargs or {})
    T = dataset.length - 1
    if grid is None:
        grid = list(range(0, int(np.floor(0.2 * T)) + 1))
    grid = sorted(int(t) for t in grid)
    if not grid:
        raise ConfigError("tau grid is empty")
    if validation is None:
        dataset, validation = split_train_validation(dataset, config.val_fraction, config.seed)
    heads = model_kwargs.pop("heads", dataset.m)
    hidden = model_kwargs.pop("hidden", (10, 10))
    trace = SearchTrace()
    for i, tau in enumerate(grid):
        if isinstance(heads, int):
            cfgs = [HeadConfig(tau=tau, hidden=tuple(hidden)) for _ in range(heads)]
        else:
            cfgs = [replace(h, tau=tau) for h in heads]
        _, score = _fit_feats(dataset, validation, config, config.seed + i, heads=cfgs, **model_kwargs)
        trace.values.append(tau)
        trace.val_losses.append(score)
    best = min(trace.val_losses)
    for tau, score in zip(trace.values, trace.val_losses):
        if score <= best + tie_tolerance * abs(best):
            trace.chosen = tau
            break
    return trace
