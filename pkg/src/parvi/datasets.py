"""Dataset ingestion for the Bayesian logistic-regression experiments.

Supported on-disk formats:

* CSV with a header row; the label column is selected by name or integer
  index (default: last column).
* libsvm sparse text: ``label idx:val idx:val ...`` with 1-based indices.

Labels are normalized to {-1, +1} at ingestion ({0, 1} ships in most
datasets).  Feature standardization (zero mean, unit variance per column)
and a trailing bias column are both on by default.
"""

import csv
import warnings
from dataclasses import dataclass

import numpy as np


@dataclass
class Dataset:
    features: np.ndarray   # (n, p)
    labels: np.ndarray     # (n,) in {-1, +1}
    feature_names: list

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]


def normalize_labels(raw: np.ndarray) -> np.ndarray:
    values = np.unique(raw)
    if values.size == 1:
        warnings.warn(
            "degenerate dataset: all labels identical", RuntimeWarning, stacklevel=2
        )
        only = float(values[0])
        if only in (-1.0, 1.0):
            return np.full(raw.shape, only)
        if only in (0.0, 1.0):
            return np.full(raw.shape, 2.0 * only - 1.0)
        raise ValueError(f"cannot interpret constant label value {only}")
    if values.size != 2:
        raise ValueError(f"labels must be binary, found values {values}")
    if set(values.tolist()) == {-1.0, 1.0}:
        return raw.astype(np.float64)
    if set(values.tolist()) == {0.0, 1.0}:
        return 2.0 * raw.astype(np.float64) - 1.0
    # any other two-value coding: map smaller -> -1, larger -> +1
    return np.where(raw == values[0], -1.0, 1.0)


def standardize(features: np.ndarray) -> np.ndarray:
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    std[std == 0.0] = 1.0
    return (features - mean) / std


def add_bias(features: np.ndarray) -> np.ndarray:
    return np.hstack([features, np.ones((features.shape[0], 1))])


def _postprocess(features, labels, names, do_standardize, do_bias) -> Dataset:
    features = np.asarray(features, dtype=np.float64)
    labels = normalize_labels(np.asarray(labels, dtype=np.float64))
    if do_standardize:
        features = standardize(features)
    if do_bias:
        features = add_bias(features)
        names = list(names) + ["bias"]
    return Dataset(features, labels, list(names))


def load_csv(
    path,
    label_column: str | int | None = None,
    standardize_features: bool = True,
    bias: bool = True,
) -> Dataset:
    """Load a CSV with header row; label column by name, index, or last."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{path}: need a header row and at least one data row")
    header, data = rows[0], rows[1:]
    if label_column is None:
        label_idx = len(header) - 1
    elif isinstance(label_column, int):
        label_idx = label_column
    else:
        if label_column not in header:
            raise ValueError(f"{path}: no column named {label_column!r}")
        label_idx = header.index(label_column)
    mat = np.array([[float(v) for v in row] for row in data], dtype=np.float64)
    labels = mat[:, label_idx]
    features = np.delete(mat, label_idx, axis=1)
    names = [h for i, h in enumerate(header) if i != label_idx]
    return _postprocess(features, labels, names, standardize_features, bias)


def load_libsvm(
    path, standardize_features: bool = True, bias: bool = True
) -> Dataset:
    """Load sparse libsvm text format (1-based feature indices)."""
    labels, entries, max_idx = [], [], 0
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            labels.append(float(parts[0]))
            row = {}
            for tok in parts[1:]:
                idx, val = tok.split(":")
                idx = int(idx)
                row[idx] = float(val)
                max_idx = max(max_idx, idx)
            entries.append(row)
    if not entries:
        raise ValueError(f"{path}: empty dataset")
    features = np.zeros((len(entries), max_idx), dtype=np.float64)
    for i, row in enumerate(entries):
        for idx, val in row.items():
            features[i, idx - 1] = val
    names = [f"f{i + 1}" for i in range(max_idx)]
    return _postprocess(features, labels, names, standardize_features, bias)


def load_dataset(path, **kwargs) -> Dataset:
    path = str(path)
    if path.endswith(".csv"):
        return load_csv(path, **kwargs)
    return load_libsvm(path, **kwargs)


def synthetic_separable(
    n: int = 1000,
    p: int = 5,
    margin: float = 1.0,
    noise: float = 0.0,
    seed: int = 0,
    standardize_features: bool = True,
    bias: bool = True,
) -> Dataset:
    """Linearly separable synthetic binary dataset with a known hyperplane.

    Points are drawn standard normal, labeled by the sign of w.x, and pushed
    ``margin`` apart along w; ``noise`` flips that fraction of labels.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    w = rng.standard_normal(p)
    w /= np.linalg.norm(w)
    x = rng.standard_normal((n, p))
    labels = np.where(x @ w >= 0.0, 1.0, -1.0)
    x += (margin / 2.0) * labels[:, None] * w[None, :]
    if noise > 0:
        flip = rng.random(n) < noise
        labels[flip] *= -1.0
    names = [f"x{i}" for i in range(p)]
    return _postprocess(x, labels, names, standardize_features, bias)


def train_test_split(
    dataset: Dataset, train_fraction: float, rng: np.random.Generator
) -> tuple[Dataset, Dataset]:
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    n = dataset.n
    perm = rng.permutation(n)
    cut = max(1, min(n - 1, int(round(train_fraction * n))))
    tr, te = perm[:cut], perm[cut:]
    return (
        Dataset(dataset.features[tr], dataset.labels[tr], dataset.feature_names),
        Dataset(dataset.features[te], dataset.labels[te], dataset.feature_names),
    )
