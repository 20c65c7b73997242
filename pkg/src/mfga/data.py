"""Dataset ingestion, standardization, splitting and the bandwidth heuristic.

All randomized routines take an explicit integer seed and build their own
``numpy.random.Generator``, so results are pure functions of their inputs.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import (
    DegenerateResponse,
    DimensionMismatch,
    EmptyFile,
    MissingColumn,
    MulticlassLabels,
    NonNumericCell,
    TooFewRows,
)


class Task(str, Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


@dataclass(frozen=True)
class Schema:
    """Column specification for a CSV file.

    Parameters
    ----------
    response : str
        Name of the response column; every other column is a feature.
    task : Task
    positive_label : str, optional
        Raw label mapped to +1 for classification; everything else maps to -1.
    """

    response: str
    task: Task
    positive_label: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "task", Task(self.task))
        if self.task is Task.CLASSIFICATION and self.positive_label is None:
            raise ValueError("classification schema needs a positive_label")

    @classmethod
    def from_dict(cls, d: dict) -> "Schema":
        pos = d.get("positive_label")
        return cls(d["response"], Task(d["task"]), None if pos is None else str(pos))

    @classmethod
    def from_json(cls, path) -> "Schema":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        d = {"response": self.response, "task": self.task.value}
        if self.positive_label is not None:
            d["positive_label"] = self.positive_label
        return d


@dataclass
class RawDataset:
    """Unscaled feature rows and responses in file order."""

    X: np.ndarray
    y: np.ndarray
    task: Task
    feature_names: Optional[list] = None

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        self.task = Task(self.task)
        if self.X.shape[0] != self.y.shape[0]:
            raise DimensionMismatch(
                f"{self.X.shape[0]} feature rows but {self.y.shape[0]} responses"
            )
        if self.task is Task.CLASSIFICATION and not np.all(np.isin(self.y, (-1.0, 1.0))):
            raise ValueError("classification responses must be in {-1, +1}")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def take(self, idx) -> "RawDataset":
        return RawDataset(self.X[idx], self.y[idx], self.task, self.feature_names)


@dataclass
class Standardizer:
    feature_means: np.ndarray
    feature_stds: np.ndarray
    response_lo: Optional[float] = None
    response_hi: Optional[float] = None

    @property
    def d(self) -> int:
        return self.feature_means.shape[0]

    def transform_X(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.d:
            raise DimensionMismatch(f"expected {self.d} features, got {X.shape[1]}")
        return (X - self.feature_means) / self.feature_stds

    def transform_y(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.response_lo is None:
            return y.copy()
        return 2.0 * (y - self.response_lo) / (self.response_hi - self.response_lo) - 1.0

    def inverse_y(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.response_lo is None:
            return y.copy()
        return (y + 1.0) * 0.5 * (self.response_hi - self.response_lo) + self.response_lo

    def to_dict(self) -> dict:
        return {
            "feature_means": self.feature_means.tolist(),
            "feature_stds": self.feature_stds.tolist(),
            "response_lo": self.response_lo,
            "response_hi": self.response_hi,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(
            np.asarray(d["feature_means"], dtype=float),
            np.asarray(d["feature_stds"], dtype=float),
            d.get("response_lo"),
            d.get("response_hi"),
        )

    @classmethod
    def identity(cls, d: int) -> "Standardizer":
        return cls(np.zeros(d), np.ones(d))


@dataclass
class Dataset:
    """Standardized design rows ready for featurization."""

    X: np.ndarray
    y: np.ndarray
    task: Task
    standardizer: Optional[Standardizer] = field(default=None, repr=False)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        self.task = Task(self.task)
        if self.X.shape[0] != self.y.shape[0]:
            raise DimensionMismatch(
                f"{self.X.shape[0]} feature rows but {self.y.shape[0]} responses"
            )

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def take(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.task, self.standardizer)


def _parse_float(cell: str, row: int, col: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise NonNumericCell(row, col, cell) from None


def _same_label(cell: str, positive: str) -> bool:
    if cell == positive:
        return True
    try:
        return float(cell) == float(positive)
    except ValueError:
        return False


def load_csv(path: Union[str, Path], schema: Schema) -> RawDataset:
    """Read a comma-separated file with a header row.

    Row numbers in error messages are 1-based data rows (the header is row 0).
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not any(h.strip() for h in header):
            raise EmptyFile(f"{path} is empty")
        header = [h.strip() for h in header]
        if schema.response not in header:
            raise MissingColumn(schema.response, path)
        ycol = header.index(schema.response)
        feature_cols = [j for j in range(len(header)) if j != ycol]

        features, labels = [], []
        for i, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DimensionMismatch(
                    f"{path}: row {i} has {len(row)} cells, header has {len(header)}"
                )
            features.append([_parse_float(row[j].strip(), i, header[j]) for j in feature_cols])
            labels.append(row[ycol].strip())

    if not features:
        raise EmptyFile(f"{path} has a header but no data rows")

    if schema.task is Task.CLASSIFICATION:
        if len(set(labels)) > 2:
            raise MulticlassLabels(
                f"{path}: {len(set(labels))} distinct labels in {schema.response!r}; "
                "only binary classification is supported"
            )
        y = np.array([1.0 if _same_label(c, schema.positive_label) else -1.0 for c in labels])
    else:
        y = np.array([_parse_float(c, i, schema.response) for i, c in enumerate(labels, 1)])

    names = [header[j] for j in feature_cols]
    X = np.array(features, dtype=float).reshape(len(features), len(names))
    return RawDataset(X, y, schema.task, names)


def fit_standardizer(raw: RawDataset) -> Standardizer:
    """Per-column mean and sample std (ddof=1); responses mapped onto [-1, 1].

    Zero-variance columns get std 1 and so standardize to an all-zero column.
    """
    if raw.n < 2:
        raise TooFewRows("need at least 2 rows to fit a standardizer")
    means = raw.X.mean(axis=0)
    stds = raw.X.std(axis=0, ddof=1)
    stds = np.where(stds > 0, stds, 1.0)
    if raw.task is Task.CLASSIFICATION:
        return Standardizer(means, stds)
    lo, hi = float(raw.y.min()), float(raw.y.max())
    if not hi > lo:
        raise DegenerateResponse(f"all {raw.n} responses equal {lo}")
    return Standardizer(means, stds, lo, hi)


def apply_standardizer(s: Standardizer, raw: RawDataset) -> Dataset:
    if raw.d != s.d:
        raise DimensionMismatch(f"standardizer fitted on {s.d} features, data has {raw.d}")
    y = raw.y.copy() if raw.task is Task.CLASSIFICATION else s.transform_y(raw.y)
    return Dataset(s.transform_X(raw.X), y, raw.task, s)


def split(raw: RawDataset, test_fraction: float, seed: int):
    """Random disjoint train/test partition.

    The training part has ``ceil(N * (1 - test_fraction))`` rows. Both parts
    keep file order among their rows.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    if raw.n < 2:
        raise TooFewRows("need at least 2 rows to split")
    # round first so fractions such as 13083/39644 do not pick up an extra row
    n_train = math.ceil(round(raw.n * (1.0 - test_fraction), 9))
    perm = np.random.default_rng(seed).permutation(raw.n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return raw.take(train_idx), raw.take(test_idx)


def subsample(ds, fraction: float, seed: int):
    """Uniform subsample of ``floor(fraction * N)`` rows without replacement."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    n_keep = math.floor(round(fraction * ds.n, 9))
    if n_keep < 1:
        raise TooFewRows(f"fraction {fraction} of {ds.n} rows keeps nothing")
    if n_keep == ds.n:
        return ds.take(np.arange(ds.n))
    idx = np.random.default_rng(seed).choice(ds.n, size=n_keep, replace=False)
    return ds.take(np.sort(idx))


def kth_neighbor_distances(X: np.ndarray, anchors: np.ndarray, k: int, block: int = 256) -> np.ndarray:
    """Distance from each anchor row to its k-th nearest *other* row of X."""
    X = np.asarray(X, dtype=float)
    sq = np.einsum("ij,ij->i", X, X)
    out = np.empty(len(anchors))
    for start in range(0, len(anchors), block):
        a = anchors[start:start + block]
        d2 = sq[a, None] + sq[None, :] - 2.0 * X[a] @ X.T
        np.maximum(d2, 0.0, out=d2)
        d2[np.arange(len(a)), a] = np.inf  # drop the anchor itself
        out[start:start + block] = np.sqrt(np.partition(d2, k - 1, axis=1)[:, k - 1])
    return out


def bandwidth_heuristic(ds, k: int = 50, probe_count: Optional[int] = None, seed: int = 0) -> float:
    """Mean distance to the k-th nearest neighbour over sampled anchor rows.

    ``ds`` may be a :class:`Dataset` or a bare feature matrix. With
    ``probe_count >= N`` every row is an anchor and the result is exact.
    """
    X = np.asarray(getattr(ds, "X", ds), dtype=float)
    n = X.shape[0]
    if n <= k:
        raise TooFewRows(f"bandwidth heuristic with k={k} needs more than {k} rows, got {n}")
    if probe_count is None:
        probe_count = min(n, 1000)
    if probe_count >= n:
        anchors = np.arange(n)
    else:
        anchors = np.sort(np.random.default_rng(seed).choice(n, size=probe_count, replace=False))
    return float(np.mean(kth_neighbor_distances(X, anchors, k)))
