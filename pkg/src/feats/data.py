"""Panel datasets and their on-disk formats (panel CSV, UEA ``.ts``)."""

from __future__ import annotations

import csv
import io
import os
import re
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, UnsupportedFeatureError

_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


@dataclass
class PanelDataset:
    """n samples of an (m, T+1) panel, optional static covariates, targets and weights."""

    X: np.ndarray
    y: np.ndarray
    Z: np.ndarray | None = None
    weights: np.ndarray | None = None
    split: str | None = None
    class_labels: list | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 3:
            raise DataError(f"X must be (n, m, T+1), got shape {self.X.shape}")
        n = self.X.shape[0]
        self.y = np.asarray(self.y)
        if self.y.shape != (n,):
            raise DataError(f"y must have shape ({n},), got {self.y.shape}")
        if self.Z is None:
            self.Z = np.zeros((n, 0))
        self.Z = np.asarray(self.Z, dtype=np.float64)
        if self.Z.ndim != 2 or self.Z.shape[0] != n:
            raise DataError(f"Z must be ({n}, p), got {self.Z.shape}")
        self.weights = np.ones(n) if self.weights is None else np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (n,) or np.any(self.weights <= 0):
            raise DataError("weights must be positive, one per sample")
        for name, arr in (("X", self.X), ("Z", self.Z), ("y", self.y.astype(np.float64))):
            if not np.all(np.isfinite(arr)):
                raise DataError(f"{name} contains missing or non-finite values")
        if self.split is not None and self.split not in ("train", "validation", "test"):
            raise DataError(f"unknown split {self.split!r}")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    @property
    def length(self) -> int:
        return self.X.shape[2]

    @property
    def p(self) -> int:
        return self.Z.shape[1]

    def subset(self, idx, split: str | None = None) -> "PanelDataset":
        idx = np.asarray(idx)
        return PanelDataset(self.X[idx], self.y[idx], self.Z[idx], self.weights[idx],
                            split=split if split is not None else self.split,
                            class_labels=self.class_labels, meta=dict(self.meta))


def atomic_write_text(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header: list, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def _fmt(v) -> str:
    return repr(float(v))


# panel CSV --------------------------------------------------------------------

def _parse_number(tok: str, path, line: int) -> float:
    tok = tok.strip()
    if not _NUMBER.match(tok):
        raise DataError(f"{path}:{line}: cannot parse {tok!r} as a number")
    return float(tok)


def _parse_index(tok: str, what: str, path, line: int) -> int:
    tok = tok.strip()
    if not tok.isdigit():
        raise DataError(f"{path}:{line}: {what} must be a non-negative integer, got {tok!r}")
    return int(tok)


def _read_rows(path, header: list):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or [c.strip() for c in first] != header:
            raise DataError(f"{path}: header must be {','.join(header)}, got {first}")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            yield line, row


def _dense_grid(path, header):
    """Read a (sample, index..., value) table into sample order and a cell map."""
    samples: dict = {}
    cells: dict = {}
    for line, row in _read_rows(path, header):
        if len(row) != len(header):
            raise DataError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
        sid = row[0].strip()
        key = tuple(_parse_index(t, h, path, line) for t, h in zip(row[1:-1], header[1:-1]))
        val = _parse_number(row[-1], path, line)
        samples.setdefault(sid, len(samples))
        ck = (sid, *key)
        if ck in cells:
            raise DataError(f"{path}:{line}: duplicate key {ck}")
        cells[ck] = val
    return samples, cells


def load_panel_csv(path_X, path_y=None, path_Z=None, split: str | None = None) -> PanelDataset:
    """Load the dense panel CSV format.

    ``path_X`` has columns ``sample_id,series_id,time,value``; ``path_y`` has
    ``sample_id,target[,weight]``; optional ``path_Z`` has
    ``sample_id,covariate_id,value``.  Every (sample, series, time) cell must be
    present exactly once.  Without ``path_y`` the targets are all zero
    (prediction/explanation inputs).
    """
    samples, cells = _dense_grid(path_X, ["sample_id", "series_id", "time", "value"])
    if not samples:
        raise DataError(f"{path_X}: no rows")
    m = 1 + max(k[1] for k in cells)
    L = 1 + max(k[2] for k in cells)
    order = list(samples)
    X = np.empty((len(order), m, L))
    for i, sid in enumerate(order):
        for j in range(m):
            for t in range(L):
                try:
                    X[i, j, t] = cells[(sid, j, t)]
                except KeyError:
                    raise DataError(f"{path_X}: missing cell (sample={sid}, series={j}, time={t})") from None

    Z = None
    if path_Z is not None:
        zs, zcells = _dense_grid(path_Z, ["sample_id", "covariate_id", "value"])
        p = 1 + max((k[1] for k in zcells), default=-1)
        Z = np.empty((len(order), p))
        for sid in zs:
            if sid not in samples:
                raise DataError(f"{path_Z}: sample {sid} not present in {path_X}")
        for i, sid in enumerate(order):
            for c in range(p):
                try:
                    Z[i, c] = zcells[(sid, c)]
                except KeyError:
                    raise DataError(f"{path_Z}: missing cell (sample={sid}, covariate={c})") from None

    w = np.ones(len(order))
    if path_y is None:
        return PanelDataset(X, np.zeros(len(order)), Z, w, split=split, meta={"sample_ids": order})
    y = np.full(len(order), np.nan)
    seen = set()
    with open(path_y, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        head = [c.strip() for c in next(reader, [])]
        if head not in (["sample_id", "target"], ["sample_id", "target", "weight"]):
            raise DataError(f"{path_y}: header must be sample_id,target[,weight], got {head}")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(head):
                raise DataError(f"{path_y}:{line}: expected {len(head)} fields, got {len(row)}")
            sid = row[0].strip()
            if sid not in samples:
                raise DataError(f"{path_y}:{line}: sample {sid} not present in {path_X}")
            if sid in seen:
                raise DataError(f"{path_y}:{line}: duplicate sample {sid}")
            seen.add(sid)
            y[samples[sid]] = _parse_number(row[1], path_y, line)
            if len(head) == 3:
                w[samples[sid]] = _parse_number(row[2], path_y, line)
    missing = [sid for sid in order if sid not in seen]
    if missing:
        raise DataError(f"{path_y}: missing target for sample {missing[0]}")
    return PanelDataset(X, y, Z, w, split=split, meta={"sample_ids": order})


def save_panel_csv(ds: PanelDataset, directory, prefix: str = "") -> dict:
    """Write ``{prefix}X.csv``, ``{prefix}y.csv`` and (when p > 0) ``{prefix}Z.csv``."""
    directory = Path(directory)
    ids = ds.meta.get("sample_ids") or [str(i) for i in range(ds.n)]
    n, m, L = ds.X.shape
    paths = {"X": directory / f"{prefix}X.csv", "y": directory / f"{prefix}y.csv"}
    lines = ["sample_id,series_id,time,value"]
    for i in range(n):
        sid = ids[i]
        for j in range(m):
            row = ds.X[i, j].tolist()
            lines.extend(f"{sid},{j},{t},{row[t]!r}" for t in range(L))
    atomic_write_text(paths["X"], "\n".join(lines) + "\n")
    integer_y = np.issubdtype(ds.y.dtype, np.integer)
    write_csv(paths["y"], ["sample_id", "target", "weight"],
              ((ids[i], int(ds.y[i]) if integer_y else _fmt(ds.y[i]), _fmt(ds.weights[i])) for i in range(n)))
    if ds.p:
        paths["Z"] = directory / f"{prefix}Z.csv"
        write_csv(paths["Z"], ["sample_id", "covariate_id", "value"],
                  ((ids[i], c, _fmt(ds.Z[i, c])) for i in range(n) for c in range(ds.p)))
    return paths


# UEA .ts ----------------------------------------------------------------------

def load_uea_ts(path, split: str | None = None) -> PanelDataset:
    """Parse an equal-length, no-missing-value UEA/UCR ``.ts`` classification file.

    Class labels are mapped to indices in the order of the ``@classLabel``
    declaration.
    """
    path = Path(path)
    headers: dict = {}
    labels: list | None = None
    rows, targets = [], []
    in_data = False
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if not in_data:
                if not line.startswith("@"):
                    raise DataError(f"{path}:{line_no}: expected a header line, got {line[:40]!r}")
                parts = line.split()
                key = parts[0].lower()
                if key == "@data":
                    in_data = True
                    continue
                if key == "@classlabel":
                    if len(parts) < 2 or parts[1].lower() != "true":
                        raise UnsupportedFeatureError(f"{path}: only classification files are supported")
                    labels = parts[2:]
                    if not labels:
                        raise DataError(f"{path}:{line_no}: @classLabel true with no labels")
                    continue
                headers[key] = " ".join(parts[1:])
                continue
            dims = line.split(":")
            if len(dims) < 2:
                raise DataError(f"{path}:{line_no}: data line needs at least one dimension and a label")
            label = dims[-1].strip()
            series = []
            for d in dims[:-1]:
                vals = []
                for tok in d.split(","):
                    tok = tok.strip()
                    if tok in ("?", "") or tok.lower() == "nan":
                        raise DataError(f"{path}:{line_no}: missing value")
                    if tok.startswith("("):
                        raise UnsupportedFeatureError(f"{path}:{line_no}: timestamped series are not supported")
                    vals.append(_parse_number(tok, path, line_no))
                series.append(vals)
            rows.append((line_no, series))
            targets.append(label)

    if headers.get("@timestamps", "false").lower() == "true":
        raise UnsupportedFeatureError(f"{path}: timestamped series are not supported")
    if headers.get("@equallength", "true").lower() == "false":
        raise UnsupportedFeatureError(f"{path}: unequal-length series are not supported")
    if headers.get("@missing", "false").lower() == "true":
        raise UnsupportedFeatureError(f"{path}: files with missing values are not supported")
    if labels is None:
        raise DataError(f"{path}: missing @classLabel header")
    if not rows:
        raise DataError(f"{path}: no data lines")
    n_dims = len(rows[0][1])
    if headers.get("@univariate", "").lower() == "true" and n_dims != 1:
        raise DataError(f"{path}: @univariate true but {n_dims} dimensions found")
    if "@dimensions" in headers and int(headers["@dimensions"]) != n_dims:
        raise DataError(f"{path}: @dimensions {headers['@dimensions']} but {n_dims} found")
    length = len(rows[0][1][0])
    X = np.empty((len(rows), n_dims, length))
    for i, (line_no, series) in enumerate(rows):
        if len(series) != n_dims:
            raise DataError(f"{path}:{line_no}: expected {n_dims} dimensions, got {len(series)}")
        for j, vals in enumerate(series):
            if len(vals) != length:
                raise UnsupportedFeatureError(
                    f"{path}:{line_no}: series length {len(vals)} != {length}; unequal lengths are not supported")
            X[i, j] = vals
    index = {lab: k for k, lab in enumerate(labels)}
    y = np.empty(len(rows), dtype=np.int64)
    for i, lab in enumerate(targets):
        if lab not in index:
            raise DataError(f"{path}:{rows[i][0]}: unknown class label {lab!r}")
        y[i] = index[lab]
    return PanelDataset(X, y, split=split, class_labels=list(labels),
                        meta={"problem_name": headers.get("@problemname", path.stem)})
