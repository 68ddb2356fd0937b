"""Dataset loading, splitting, standardization and minibatching."""

import csv
from dataclasses import dataclass, replace
from importlib import resources

import numpy as np

from steinflow.errors import InputError, ParseError

DEFAULT_SUBSAMPLE = 20_000


@dataclass(frozen=True)
class Standardization:
    """Per-column training statistics (population standard deviation)."""

    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float | None = None
    y_std: float | None = None

    def transform(self, features):
        return (np.asarray(features, dtype=float) - self.x_mean) / _safe_std(self.x_std)

    def inverse_transform(self, features):
        return np.asarray(features, dtype=float) * _safe_std(self.x_std) + self.x_mean

    def transform_target(self, y):
        if self.y_mean is None:
            return np.asarray(y, dtype=float)
        return (np.asarray(y, dtype=float) - self.y_mean) / _safe_std(self.y_std)

    def inverse_target(self, y):
        if self.y_mean is None:
            return np.asarray(y, dtype=float)
        return np.asarray(y, dtype=float) * _safe_std(self.y_std) + self.y_mean


def _safe_std(std):
    # zero-variance columns are centered but not scaled
    return np.where(np.asarray(std) > 0, std, 1.0)


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    targets: np.ndarray
    name: str = "dataset"
    task: str = "regression"
    stats: Standardization | None = None

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        y = np.asarray(self.targets, dtype=float).ravel()
        if x.ndim != 2 or x.shape[0] != y.size:
            raise InputError(f"features {x.shape} and targets {y.shape} disagree")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InputError("dataset contains missing or non-finite values")
        if self.task not in ("regression", "classification"):
            raise InputError(f"unknown task {self.task!r}")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "targets", y)

    def __len__(self):
        return self.targets.size

    @property
    def n_features(self):
        return self.features.shape[1]

    def take(self, idx):
        idx = np.asarray(idx, dtype=int)
        return replace(self, features=self.features[idx], targets=self.targets[idx])


@dataclass(frozen=True)
class CsvSchema:
    """How to read a delimited file.

    ``label`` is a column index (negative counts from the end) or a header
    name. ``delimiter=None`` splits on runs of whitespace. For classification,
    ``label_values=(negative, positive)`` fixes the mapping to {0, 1};
    otherwise the two distinct values found are mapped in sorted order.
    """

    label: int | str = -1
    delimiter: str | None = ","
    header: bool = False
    task: str = "regression"
    label_values: tuple | None = None


def _read_rows(path, delimiter):
    with open(path, newline="") as fh:
        if delimiter is None:
            for i, line in enumerate(fh, start=1):
                if line.strip():
                    yield i, line.split()
        else:
            for i, row in enumerate(csv.reader(fh, delimiter=delimiter), start=1):
                if row and any(c.strip() for c in row):
                    yield i, row


def load_csv(path, schema=CsvSchema(), name=None):
    rows = _read_rows(path, schema.delimiter)
    header = None
    if schema.header:
        try:
            _, header = next(rows)
        except StopIteration:
            raise ParseError("file is empty", row=1) from None
        header = [h.strip() for h in header]

    width = None
    values = []
    raw_labels = []
    label_col = None
    for lineno, row in rows:
        if width is None:
            width = len(row)
            if header is not None and len(header) != width:
                raise ParseError(f"header has {len(header)} columns, data has {width}", row=lineno)
            label_col = _label_column(schema.label, header, width)
        if len(row) != width:
            raise ParseError(f"expected {width} columns, found {len(row)}", row=lineno)
        cells = [c.strip() for c in row]
        raw_labels.append((lineno, cells[label_col]))
        del cells[label_col]
        try:
            values.append([float(c) for c in cells])
        except ValueError as exc:
            raise ParseError(f"non-numeric cell ({exc})", row=lineno) from None
    if not values:
        raise ParseError("no data rows", row=None)

    if schema.task == "classification":
        targets = _binary_labels(raw_labels, schema.label_values)
    else:
        targets = []
        for lineno, cell in raw_labels:
            try:
                targets.append(float(cell))
            except ValueError:
                raise ParseError(f"non-numeric target {cell!r}", row=lineno) from None
    return Dataset(np.array(values, dtype=float), np.array(targets, dtype=float), name or str(path), schema.task)


def _label_column(label, header, width):
    if isinstance(label, str):
        if header is None or label not in header:
            raise InputError(f"label column {label!r} not found in header")
        return header.index(label)
    col = label + width if label < 0 else label
    if not 0 <= col < width:
        raise InputError(f"label column {label} out of range for {width} columns")
    return col


def _binary_labels(raw_labels, label_values):
    def key(cell):
        try:
            return float(cell)
        except ValueError:
            return cell

    if label_values is None:
        seen = sorted({key(c) for _, c in raw_labels}, key=lambda v: (isinstance(v, str), v))
        if len(seen) > 2:
            known = set(seen[:2])
            lineno = next(i for i, c in raw_labels if key(c) not in known)
            raise ParseError(f"more than two label values {seen}", row=lineno)
        label_values = tuple(seen) if len(seen) == 2 else (None, seen[0])
    neg, pos = (key(v) if v is not None else None for v in label_values)
    out = []
    for lineno, cell in raw_labels:
        v = key(cell)
        if v == pos:
            out.append(1.0)
        elif v == neg:
            out.append(0.0)
        else:
            raise ParseError(f"unknown label value {cell!r}", row=lineno)
    return out


def libsvm_to_csv(src, dst, n_features=None):
    """Convert sparse ``label idx:value ...`` lines (1-based indices) to dense CSV.

    The label is written as the last column. Returns ``(rows, n_features)``.
    """
    labels, entries = [], []
    max_idx = 0
    with open(src) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            row = {}
            for tok in parts[1:]:
                try:
                    idx, val = tok.split(":")
                    idx = int(idx)
                    row[idx] = float(val)
                except ValueError:
                    raise ParseError(f"bad sparse entry {tok!r}", row=lineno) from None
                if idx < 1:
                    raise ParseError(f"feature index {idx} must be >= 1", row=lineno)
                max_idx = max(max_idx, idx)
            labels.append(parts[0])
            entries.append(row)
    width = n_features or max_idx
    if max_idx > width:
        raise InputError(f"feature index {max_idx} exceeds n_features={width}")
    with open(dst, "w", newline="") as fh:
        writer = csv.writer(fh)
        for label, row in zip(labels, entries):
            dense = ["0"] * width
            for idx, val in row.items():
                dense[idx - 1] = repr(val)
            writer.writerow(dense + [label])
    return len(labels), width


def load_boston():
    """Boston housing (506 rows, 13 features, median value target), bundled."""
    path = resources.files("steinflow") / "datasets" / "boston.csv"
    with resources.as_file(path) as p:
        return load_csv(p, CsvSchema(label="MEDV", header=True), name="boston")


def split(dataset, train_fraction, seed):
    """Seeded random train/test partition; train size is ``floor(fraction * n)``."""
    n = len(dataset)
    if n < 2:
        raise InputError("need at least two rows to split")
    if not 0 < train_fraction < 1:
        raise InputError(f"train fraction must lie in (0, 1), got {train_fraction}")
    n_train = int(np.floor(train_fraction * n + 1e-9))
    if n_train < 1 or n_train >= n:
        raise InputError(f"fraction {train_fraction} of {n} rows leaves an empty side")
    perm = np.random.default_rng(seed).permutation(n)
    return dataset.take(perm[:n_train]), dataset.take(perm[n_train:])


def subsample(dataset, size, seed):
    if size is None or size >= len(dataset):
        return dataset
    idx = np.sort(np.random.default_rng(seed).choice(len(dataset), size=size, replace=False))
    return dataset.take(idx)


def standardize(train, test, scale_targets=None):
    """Standardize features (and regression targets) with training statistics."""
    if len(train) == 0:
        raise InputError("training set is empty")
    if scale_targets is None:
        scale_targets = train.task == "regression"
    x_mean = train.features.mean(axis=0)
    x_std = train.features.std(axis=0)
    y_mean = y_std = None
    if scale_targets:
        y_mean = float(train.targets.mean())
        y_std = float(train.targets.std())
    stats = Standardization(x_mean, x_std, y_mean, y_std)

    def apply(ds):
        return replace(ds, features=stats.transform(ds.features), targets=stats.transform_target(ds.targets), stats=stats)

    return apply(train), apply(test), stats


def epoch_batches(n, batch_size, rng):
    perm = rng.permutation(n)
    return [perm[i : i + batch_size] for i in range(0, n, batch_size)]


def minibatch_stream(n, batch_size, seed):
    """Endless stream of index arrays, one shuffled partition per epoch."""
    if not isinstance(n, (int, np.integer)):
        n = len(n)
    if batch_size < 1:
        raise InputError("batch size must be positive")
    if batch_size > n:
        raise InputError(f"batch size {batch_size} exceeds {n} training rows")
    rng = np.random.default_rng(seed)
    while True:
        yield from epoch_batches(n, batch_size, rng)
