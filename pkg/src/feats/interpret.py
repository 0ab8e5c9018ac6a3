"""Attribution tools for fitted FEATS models.

Every head feature is additive in its inputs, ``feature = sum_{j,k} W_{j,k}(X) X_{j,k}``,
so per-sample weights, per-series and per-time component variances and
their distributions can be read off directly.  Weights refer to the
standardized inputs that the heads consume.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .data import write_csv
from .errors import StateError, StatisticsError

log = logging.getLogger(__name__)

ADDITIVITY_TOL = 1e-9
EXHAUSTIVE_MAX = 8


@dataclass
class ExtractedWeights:
    weights: np.ndarray    # (heads, samples, m, L)
    features: np.ndarray   # (heads, samples)
    inputs: np.ndarray     # (samples, m, L) as seen by the heads
    max_additivity_error: float

    @property
    def n_heads(self) -> int:
        return self.weights.shape[0]

    def rows(self, sample_ids=None):
        """Long-format rows ``(sample_id, head, series, time, weight)``."""
        H, n, m, L = self.weights.shape
        ids = range(n) if sample_ids is None else sample_ids
        for i, sid in enumerate(ids):
            for h in range(H):
                for j in range(m):
                    for k in range(L):
                        yield sid, h, j, k, repr(float(self.weights[h, i, j, k]))


def extract_weights(model, X, tol: float = ADDITIVITY_TOL) -> ExtractedWeights:
    """Per-sample, per-head weights, re-checked against the head features."""
    if not getattr(model, "fitted", False):
        raise StateError("extract_weights needs a fitted model")
    W, feats, Xs = model.head_weights(X)
    recon = np.einsum("hbmk,bmk->hb", W, Xs)
    err = float(np.max(np.abs(recon - feats))) if feats.size else 0.0
    if err >= tol:
        raise StateError(f"additivity check failed: max |feature - sum W x| = {err:.3g}")
    return ExtractedWeights(W, feats, Xs, err)


@dataclass
class VarianceTable:
    feature: float
    series: np.ndarray   # (m,)
    time: np.ndarray     # (L,)

    def rows(self, head: int):
        yield head, "feature", "", repr(float(self.feature))
        for j, v in enumerate(self.series):
            yield head, "series", j, repr(float(v))
        for k, v in enumerate(self.time):
            yield head, "time", k, repr(float(v))


def _components(W: np.ndarray, Xs: np.ndarray):
    contrib = W * Xs
    return contrib.sum(axis=(1, 2)), contrib.sum(axis=2), contrib.sum(axis=1)


def variance_decomposition(W: np.ndarray, Xs: np.ndarray) -> VarianceTable:
    """Sample variances of one head's feature and its per-series / per-time components.

    ``W`` and ``Xs`` are (n, m, L) for a single head.
    """
    if W.shape[0] < 2:
        raise StatisticsError("variance decomposition needs at least 2 samples")
    feat, by_series, by_time = _components(W, Xs)
    return VarianceTable(float(np.var(feat, ddof=1)), np.var(by_series, axis=0, ddof=1),
                         np.var(by_time, axis=0, ddof=1))


def variance_tables(ext: ExtractedWeights) -> list:
    return [variance_decomposition(ext.weights[h], ext.inputs) for h in range(ext.n_heads)]


BOX_FIELDS = ("min", "q1", "median", "q3", "max")


def _box(v: np.ndarray) -> tuple:
    q = np.quantile(v, [0.0, 0.25, 0.5, 0.75, 1.0])
    return tuple(float(x) for x in q)


def component_distributions(W: np.ndarray, Xs: np.ndarray) -> list:
    """Boxplot statistics (whiskers at min/max) of the feature and every component.

    Returns rows ``(component, index, min, q1, median, q3, max)``.
    """
    if W.shape[0] < 5:
        raise StatisticsError("component distributions need at least 5 samples")
    feat, by_series, by_time = _components(W, Xs)
    rows = [("feature", "", *_box(feat))]
    rows += [("series", j, *_box(by_series[:, j])) for j in range(by_series.shape[1])]
    rows += [("time", k, *_box(by_time[:, k])) for k in range(by_time.shape[1])]
    return rows


@dataclass
class AlignmentTable:
    abs_corr: np.ndarray          # (heads, components)
    sign: np.ndarray              # (heads, components) in {-1, 0, 1}
    component_names: list
    pairs: list                   # [(head, component index), ...]

    @property
    def score(self) -> float:
        return float(sum(self.abs_corr[h, c] for h, c in self.pairs))

    def best_for_component(self) -> dict:
        return {self.component_names[c]: (h, float(self.abs_corr[h, c])) for h, c in self.pairs}

    def rows(self):
        matched = set(self.pairs)
        for h in range(self.abs_corr.shape[0]):
            for c, name in enumerate(self.component_names):
                yield (h, name, repr(float(self.abs_corr[h, c])), int(self.sign[h, c]),
                       int((h, c) in matched))


def _corr(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    den = np.sqrt(np.dot(a, a) * np.dot(b, b))
    if den == 0:
        log.warning("zero-variance series in correlation; reporting 0")
        return 0.0
    return float(np.clip(np.dot(a, b) / den, -1.0, 1.0))


def align_heads(head_features, truth) -> AlignmentTable:
    """Match heads to ground-truth components by maximal total |Pearson r|.

    ``head_features`` is (heads, n); ``truth`` is a dict name -> (n,) array or
    a (components, n) array.  Exhaustive search up to 8 heads, otherwise an
    optimal linear assignment.
    """
    F = np.atleast_2d(np.asarray(head_features, dtype=np.float64))
    if isinstance(truth, dict):
        names = list(truth)
        C = np.stack([np.asarray(truth[k], dtype=np.float64) for k in names])
    else:
        C = np.atleast_2d(np.asarray(truth, dtype=np.float64))
        names = [f"component{i}" for i in range(C.shape[0])]
    if F.shape[1] != C.shape[1]:
        raise StatisticsError("head features and components must be evaluated on the same samples")
    r = np.array([[_corr(f, c) for c in C] for f in F])
    absr = np.abs(r)
    H, K = absr.shape
    if H <= EXHAUSTIVE_MAX:
        best, best_pairs = -1.0, []
        if H >= K:
            for heads in itertools.permutations(range(H), K):
                s = absr[list(heads), range(K)].sum()
                if s > best + 1e-15:
                    best, best_pairs = s, [(h, c) for c, h in enumerate(heads)]
        else:
            for comps in itertools.permutations(range(K), H):
                s = absr[range(H), list(comps)].sum()
                if s > best + 1e-15:
                    best, best_pairs = s, list(enumerate(comps))
        pairs = best_pairs
    else:
        rows, cols = linear_sum_assignment(-absr)
        pairs = list(zip(rows.tolist(), cols.tolist()))
    pairs = sorted((int(h), int(c)) for h, c in pairs)
    return AlignmentTable(absr, np.sign(r).astype(int), names, pairs)


# CSV exports ------------------------------------------------------------------

def write_weights_csv(path, ext: ExtractedWeights, sample_ids=None):
    write_csv(path, ["sample_id", "head", "series", "time", "weight"], ext.rows(sample_ids))


def write_variance_csv(path, tables: list):
    rows = (row for h, t in enumerate(tables) for row in t.rows(h))
    write_csv(path, ["head", "component", "index", "variance"], rows)


def write_boxstats_csv(path, ext: ExtractedWeights):
    rows = []
    for h in range(ext.n_heads):
        for comp, idx, *stats in component_distributions(ext.weights[h], ext.inputs):
            rows.append((h, comp, idx, *(repr(float(s)) for s in stats)))
    write_csv(path, ["head", "component", "index", *BOX_FIELDS], rows)


def write_alignment_csv(path, table: AlignmentTable):
    write_csv(path, ["head", "component", "abs_corr", "sign", "matched"], table.rows())
