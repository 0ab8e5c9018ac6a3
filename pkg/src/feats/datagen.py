"""Seeded generators for the simulated experiments and the Bayes-oracle baseline."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.signal import lfilter

from .data import PanelDataset
from .errors import ConfigError
from .rng import STREAM_DATA, make_rng

BURN_IN = 50
EXPERIMENTS = ("toy25", "sim31", "sim32", "sim332")
LINEAR_COEFS = np.array([1, 3, 5, 3, 1, -1, -3, -5, -3, -1], dtype=np.float64)


def arch1_series(length: int, omega: float, alpha1: float, rng: np.random.Generator,
                 size: tuple = ()) -> np.ndarray:
    """ARCH(1) draws ``x_t = sigma_t eps_t`` with ``sigma_t^2 = omega + alpha1 x_{t-1}^2``.

    Returns an array of shape ``size + (length,)``; the first 50 steps
    (started from ``x = 0``) are discarded.
    """
    if not omega > 0 or not 0 <= alpha1 < 1:
        raise ConfigError(f"ARCH(1) needs omega > 0 and 0 <= alpha1 < 1, got omega={omega}, alpha1={alpha1}")
    size = tuple(size) if not isinstance(size, int) else (size,)
    eps = rng.standard_normal(size + (BURN_IN + length,))
    x = np.empty_like(eps)
    prev = np.zeros(size)
    for t in range(BURN_IN + length):
        prev = np.sqrt(omega + alpha1 * prev * prev) * eps[..., t]
        x[..., t] = prev
    return x[..., BURN_IN:]


def _check_lag_poly(coefs, what: str):
    # roots of 1 - c1 z - c2 z^2 (AR) or 1 + c1 z + c2 z^2 (MA) must lie outside the unit circle
    c = np.asarray(coefs, dtype=np.float64)
    if not np.any(c):
        return
    poly = np.r_[1.0, -c] if what == "AR" else np.r_[1.0, c]
    roots = np.roots(poly[::-1])
    if np.any(np.abs(roots) <= 1.0 + 1e-12):
        kind = "explosive/unit AR roots" if what == "AR" else "non-invertible MA roots"
        raise ConfigError(f"{what} coefficients {tuple(c)} give {kind}")


def arima_series(length: int, ar, ma, rng: np.random.Generator, size: tuple = ()) -> np.ndarray:
    """ARIMA(2, 1, 2): an ARMA(2, 2) with unit-variance innovations, integrated once.

    The ARMA core runs 50 burn-in steps from zero state; the kept increments
    are cumulatively summed starting from 0.
    """
    ar = np.asarray(ar, dtype=np.float64)
    ma = np.asarray(ma, dtype=np.float64)
    if ar.shape != (2,) or ma.shape != (2,):
        raise ConfigError("ARIMA needs exactly two AR and two MA coefficients")
    _check_lag_poly(ar, "AR")
    _check_lag_poly(ma, "MA")
    size = tuple(size) if not isinstance(size, int) else (size,)
    eps = rng.standard_normal(size + (BURN_IN + length,))
    w = lfilter(np.r_[1.0, ma], np.r_[1.0, -ar], eps, axis=-1)[..., BURN_IN:]
    return np.cumsum(w, axis=-1)


@dataclass
class GeneratorSpec:
    experiment: str
    n_train: int
    n_test: int
    seed: int
    C: float | None = None
    omega: float = 1.0
    alpha1: float = 0.5
    ar: tuple = (0.5, -0.3)
    ma: tuple = (0.4, 0.2)
    noise_sd: float | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if self.seed is None:
            raise ConfigError("a seed is mandatory")
        if self.n_train < 0 or self.n_test < 0 or self.n_train + self.n_test == 0:
            raise ConfigError("n_train and n_test must be non-negative and not both zero")
        if self.experiment == "sim32" and self.C is None:
            raise ConfigError("sim32 needs the multiplier C")
        if not 0 <= self.alpha1 < 1 or self.omega <= 0:
            raise ConfigError("ARCH(1) parameters must satisfy omega > 0, 0 <= alpha1 < 1")
        if self.noise_sd is None:
            self.noise_sd = 0.1 if self.experiment == "sim31" else 0.0
        self.ar = tuple(float(a) for a in self.ar)
        self.ma = tuple(float(a) for a in self.ma)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class GeneratedDataset:
    """All ``n_train + n_test`` samples; the first ``n_train`` form the training split."""

    spec: GeneratorSpec
    X: np.ndarray
    Z: np.ndarray
    y: np.ndarray
    components: dict
    noise: np.ndarray
    noise_variance: float
    log_odds: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def _split(self, sl, split):
        return PanelDataset(self.X[sl], self.y[sl], self.Z[sl], split=split,
                            meta={"experiment": self.spec.experiment})

    @property
    def train(self) -> PanelDataset:
        return self._split(slice(0, self.spec.n_train), "train")

    @property
    def test(self) -> PanelDataset:
        return self._split(slice(self.spec.n_train, None), "test")

    def components_for(self, split: str) -> dict:
        sl = slice(0, self.spec.n_train) if split == "train" else slice(self.spec.n_train, None)
        return {k: v[sl] for k, v in self.components.items()}

    def log_odds_for(self, split: str) -> np.ndarray | None:
        if self.log_odds is None:
            return None
        return self.log_odds[:self.spec.n_train] if split == "train" else self.log_odds[self.spec.n_train:]


def sim31_components(X: np.ndarray) -> dict:
    x1, x2 = X[:, 0], X[:, 1]
    return {
        "linear": 0.005 * (x1[:, 10:20] @ LINEAR_COEFS),
        "max": 0.5 * x1[:, 30:35].max(axis=1),
        "min_avg": np.minimum(x1[:, 42:47], x2[:, 42:47]).mean(axis=1),
    }


def toy25_components(X: np.ndarray) -> dict:
    return {
        "f1": np.maximum(X[:, 0, 6:9], X[:, 1, 6:9]).sum(axis=1) / 3.0,
        "f2": (X[:, 2, 1] + X[:, 2, 2] + X[:, 2, 3]) / 3.0,
    }


def sim332_components(X: np.ndarray, Z: np.ndarray) -> dict:
    x1, x2 = X[:, 0], X[:, 1]
    return {
        "avg_x1": x1[:, 0:11].mean(axis=1),
        "interaction": Z[:, 0] * np.abs(Z[:, 1]) * np.maximum(x1[:, 30:36], x2[:, 30:36]).mean(axis=1),
        "z1": Z[:, 0].copy(),
    }


def _sum(components: dict) -> np.ndarray:
    total = None
    for v in components.values():
        total = v.copy() if total is None else total + v
    return total


_STREAM_IDS = {name: STREAM_DATA + i for i, name in enumerate(EXPERIMENTS)}


def _make_continuous(spec: GeneratorSpec, X, Z, comps, rng) -> GeneratedDataset:
    n = X.shape[0]
    noise = spec.noise_sd * rng.standard_normal(n)
    y = _sum(comps) + noise
    return GeneratedDataset(spec, X, Z, y, comps, noise, spec.noise_sd ** 2,
                            meta=_meta(spec))


def _meta(spec: GeneratorSpec) -> dict:
    m = {"spec": spec.to_dict(), "burn_in": BURN_IN}
    if spec.experiment in ("sim31", "sim32"):
        m["process"] = {"type": "ARCH(1)", "omega": spec.omega, "alpha1": spec.alpha1}
    elif spec.experiment == "sim332":
        m["process"] = {"type": "ARIMA(2,1,2)", "ar": list(spec.ar), "ma": list(spec.ma)}
    else:
        m["process"] = {"type": "iid N(0,1)"}
    m["noise_variance"] = spec.noise_sd ** 2
    return m


def make_toy25(spec: GeneratorSpec) -> GeneratedDataset:
    rng = make_rng(spec.seed, _STREAM_IDS["toy25"])
    n = spec.n_train + spec.n_test
    X = rng.standard_normal((n, 3, 10))
    return _make_continuous(spec, X, np.zeros((n, 0)), toy25_components(X), rng)


def make_sim31(spec: GeneratorSpec) -> GeneratedDataset:
    rng = make_rng(spec.seed, _STREAM_IDS["sim31"])
    n = spec.n_train + spec.n_test
    X = arch1_series(50, spec.omega, spec.alpha1, rng, size=(n, 2))
    return _make_continuous(spec, X, np.zeros((n, 0)), sim31_components(X), rng)


def make_sim32(spec: GeneratorSpec) -> GeneratedDataset:
    rng = make_rng(spec.seed, _STREAM_IDS["sim32"])
    n = spec.n_train + spec.n_test
    X = arch1_series(50, spec.omega, spec.alpha1, rng, size=(n, 2))
    comps = sim31_components(X)
    log_odds = spec.C * _sum(comps)
    u = rng.uniform(size=n)
    prob = 1.0 / (1.0 + np.exp(-log_odds))
    y = (u < prob).astype(np.float64)
    return GeneratedDataset(spec, X, np.zeros((n, 0)), y, comps, np.zeros(n), float("nan"),
                            log_odds=log_odds, meta=_meta(spec))


def make_sim332(spec: GeneratorSpec) -> GeneratedDataset:
    rng = make_rng(spec.seed, _STREAM_IDS["sim332"])
    n = spec.n_train + spec.n_test
    X = arima_series(50, spec.ar, spec.ma, rng, size=(n, 2))
    Z = np.column_stack([(rng.uniform(size=n) < 0.5).astype(np.float64), rng.standard_normal(n)])
    return _make_continuous(spec, X, Z, sim332_components(X, Z), rng)


_MAKERS = {"toy25": make_toy25, "sim31": make_sim31, "sim32": make_sim32, "sim332": make_sim332}


def generate(spec: GeneratorSpec) -> GeneratedDataset:
    return _MAKERS[spec.experiment](spec)


def oracle_binary(log_odds, labels) -> tuple[float, float]:
    """Accuracy and AUC of the true-probability predictor.

    Accuracy thresholds the true probability at 0.5 (log-odds > 0); AUC ranks
    samples by the true log-odds.
    """
    from .metrics import auc

    log_odds = np.asarray(log_odds, dtype=np.float64)
    labels = np.asarray(labels).astype(np.int64)
    acc = float(np.mean((log_odds > 0).astype(np.int64) == labels))
    return acc, auc(log_odds, labels)
