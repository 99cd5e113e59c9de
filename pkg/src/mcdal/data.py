"""Datasets, labeled/unlabeled pool bookkeeping, generators, CSV I/O.

A Dataset is an immutable bundle of float64 features and int64 class
labels. A Pool partitions the indices of one training Dataset into a
labeled and an unlabeled part; the Oracle hands out ground-truth labels at
transfer time. Synthetic generators (blobs / moons / rings) stand in for
image benchmarks at desk scale.
"""

import csv
import math
from dataclasses import dataclass, replace

import numpy as np


class DataError(ValueError):
    """Malformed input data (CSV parsing, degenerate generator arguments)."""


class PoolError(ValueError):
    """A pool operation would violate the labeled/unlabeled partition."""


def _round_half_up(x):
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (n, input_dim) float64
    labels: np.ndarray  # (n,) int64 in [0, num_classes)
    num_classes: int
    label_names: tuple = None  # original label values, index = class id
    feature_means: np.ndarray = None  # set when standardized
    feature_stds: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "features", np.ascontiguousarray(self.features, dtype=np.float64))
        object.__setattr__(self, "labels", np.ascontiguousarray(self.labels, dtype=np.int64))
        if self.features.ndim != 2 or self.labels.ndim != 1:
            raise DataError("features must be 2-D and labels 1-D")
        if self.features.shape[0] != self.labels.shape[0]:
            raise DataError(
                f"{self.features.shape[0]} feature rows vs {self.labels.shape[0]} labels"
            )
        if self.n < 1:
            raise DataError("dataset is empty")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise DataError(f"labels must lie in [0, {self.num_classes})")

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def input_dim(self):
        return self.features.shape[1]

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return replace(self, features=self.features[indices], labels=self.labels[indices])


class Oracle:
    """Ground-truth label provider; a pure lookup into the dataset."""

    def __init__(self, dataset):
        self.dataset = dataset

    def label(self, indices):
        return self.dataset.labels[np.asarray(indices, dtype=np.int64)].copy()


class Pool:
    """Disjoint labeled/unlabeled index sets over one training dataset.

    Index order is deterministic: the unlabeled set stays ascending, the
    labeled set grows in transfer order.
    """

    def __init__(self, dataset, labeled_indices, unlabeled_indices):
        self.dataset = dataset
        self.labeled_indices = np.asarray(labeled_indices, dtype=np.int64)
        self.unlabeled_indices = np.asarray(unlabeled_indices, dtype=np.int64)
        self.check_partition()

    def check_partition(self):
        lab, unl = self.labeled_indices, self.unlabeled_indices
        combined = np.concatenate([lab, unl])
        if len(np.unique(combined)) != len(combined):
            raise PoolError("labeled and unlabeled sets overlap or contain duplicates")
        if not np.array_equal(np.sort(combined), np.arange(self.dataset.n)):
            raise PoolError("labeled + unlabeled do not cover the dataset")

    @property
    def labeled_count(self):
        return len(self.labeled_indices)

    @property
    def unlabeled_count(self):
        return len(self.unlabeled_indices)

    def labeled_features(self):
        return self.dataset.features[self.labeled_indices]

    def labeled_labels(self):
        return self.dataset.labels[self.labeled_indices]

    def unlabeled_features(self):
        return self.dataset.features[self.unlabeled_indices]

    def copy(self):
        return Pool(self.dataset, self.labeled_indices.copy(), self.unlabeled_indices.copy())


# --- synthetic generators --------------------------------------------------


def make_blobs(n_per_class, num_classes, rng, centers=None, spread=1.0):
    """Gaussian clusters, one per class; default centers on a circle."""
    if n_per_class < 1 or num_classes < 2:
        raise DataError("need n_per_class >= 1 and num_classes >= 2")
    if spread < 0.0:
        raise DataError(f"spread must be >= 0, got {spread}")
    if centers is None:
        angles = 2.0 * np.pi * np.arange(num_classes) / num_classes
        centers = 2.0 * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    centers = np.asarray(centers, dtype=np.float64)
    if centers.shape[0] != num_classes:
        raise DataError(f"{centers.shape[0]} centers for {num_classes} classes")
    dim = centers.shape[1]
    feats, labels = [], []
    for c in range(num_classes):
        pts = np.tile(centers[c], (n_per_class, 1))
        if spread > 0.0:
            pts = pts + rng.normal(0.0, spread, (n_per_class, dim))
        feats.append(pts)
        labels.append(np.full(n_per_class, c, dtype=np.int64))
    return Dataset(np.vstack(feats), np.concatenate(labels), num_classes)


def make_moons(n, noise, rng):
    """Two interleaving half-circles; |n_class0 - n_class1| <= 1."""
    if n < 2:
        raise DataError(f"need n >= 2, got {n}")
    n0 = (n + 1) // 2
    n1 = n // 2
    t0 = np.linspace(0.0, np.pi, n0)
    t1 = np.linspace(0.0, np.pi, n1)
    outer = np.stack([np.cos(t0), np.sin(t0)], axis=1)
    inner = np.stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)], axis=1)
    feats = np.vstack([outer, inner])
    if noise > 0.0:
        feats = feats + rng.normal(0.0, noise, feats.shape)
    labels = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    return Dataset(feats, labels, 2)


def make_rings(n, noise, rng):
    """Two concentric circles (radii 1.0 and 0.5)."""
    if n < 2:
        raise DataError(f"need n >= 2, got {n}")
    n0 = (n + 1) // 2
    n1 = n // 2
    t0 = np.linspace(0.0, 2.0 * np.pi, n0, endpoint=False)
    t1 = np.linspace(0.0, 2.0 * np.pi, n1, endpoint=False)
    outer = np.stack([np.cos(t0), np.sin(t0)], axis=1)
    inner = 0.5 * np.stack([np.cos(t1), np.sin(t1)], axis=1)
    feats = np.vstack([outer, inner])
    if noise > 0.0:
        feats = feats + rng.normal(0.0, noise, feats.shape)
    labels = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    return Dataset(feats, labels, 2)


# --- standardization --------------------------------------------------------


def fit_standardization(features):
    """Per-column mean and stddev; zero-variance columns get stddev 1."""
    means = features.mean(axis=0)
    stds = features.std(axis=0)
    stds = np.where(stds > 0.0, stds, 1.0)
    return means, stds


def apply_standardization(features, means, stds):
    return (features - means) / stds


def standardize_features(dataset):
    """Standardize columns over the whole dataset; records the stats."""
    means, stds = fit_standardization(dataset.features)
    return replace(
        dataset,
        features=apply_standardization(dataset.features, means, stds),
        feature_means=means,
        feature_stds=stds,
    )


# --- CSV input/output -------------------------------------------------------


def load_csv(path, label_column, standardize=False):
    """Read a header-full comma CSV into a Dataset.

    Labels (any strings or ints) map to contiguous class ids in order of
    first appearance; the original values are kept in label_names.
    """
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if label_column not in header:
            raise DataError(f"{path}: no column {label_column!r} in header {header}")
        label_pos = header.index(label_column)
        feat_pos = [i for i in range(len(header)) if i != label_pos]
        if not feat_pos:
            raise DataError(f"{path}: no feature columns besides {label_column!r}")
        rows, raw_labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(
                    f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}"
                )
            values = []
            for i in feat_pos:
                try:
                    values.append(float(row[i]))
                except ValueError:
                    raise DataError(
                        f"{path}: line {lineno}, column {header[i]!r}: "
                        f"non-numeric value {row[i]!r}"
                    ) from None
            rows.append(values)
            raw_labels.append(row[label_pos])
    if not rows:
        raise DataError(f"{path}: no data rows")
    mapping = {}
    labels = np.empty(len(raw_labels), dtype=np.int64)
    for i, raw in enumerate(raw_labels):
        if raw not in mapping:
            mapping[raw] = len(mapping)
        labels[i] = mapping[raw]
    dataset = Dataset(
        np.asarray(rows, dtype=np.float64),
        labels,
        num_classes=len(mapping),
        label_names=tuple(mapping),
    )
    return standardize_features(dataset) if standardize else dataset


def save_csv(dataset, path, label_column="label"):
    """Write a Dataset snapshot in the load_csv format."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(dataset.input_dim)] + [label_column])
        for row, label in zip(dataset.features, dataset.labels):
            name = dataset.label_names[label] if dataset.label_names else int(label)
            writer.writerow([format(v, ".17g") for v in row] + [name])


# --- splits ------------------------------------------------------------------


def _stratified_take(class_of, candidate_indices, count, rng):
    """Pick `count` of the candidates, allocated per class by largest
    remainder; within a class the pick is a seeded random subset."""
    classes = {}
    for idx in candidate_indices:
        classes.setdefault(int(class_of[idx]), []).append(idx)
    total = len(candidate_indices)
    quotas = {c: count * len(m) / total for c, m in classes.items()}
    alloc = {c: min(int(q), len(classes[c])) for c, q in quotas.items()}
    leftover = count - sum(alloc.values())
    by_remainder = sorted(classes, key=lambda c: (-(quotas[c] - int(quotas[c])), c))
    while leftover > 0:
        progressed = False
        for c in by_remainder:
            if leftover == 0:
                break
            if alloc[c] < len(classes[c]):
                alloc[c] += 1
                leftover -= 1
                progressed = True
        if not progressed:
            raise DataError(f"cannot allocate {count} samples from {total}")
    chosen = []
    for c in sorted(classes):
        members = np.asarray(classes[c], dtype=np.int64)
        perm = rng.permutation(len(members))
        chosen.append(members[perm[: alloc[c]]])
    return np.sort(np.concatenate(chosen))


def initial_split(dataset, initial_fraction, test_fraction, rng, stratified=True, standardize=True):
    """Carve out a test set, then an initial labeled pool from the rest.

    Both picks are stratified by class (unless disabled); labeled pool size
    is round(initial_fraction * train size), rounding half up. When
    standardize is on, column stats are fit on the train part only and
    applied to both splits.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must be in (0,1), got {test_fraction} (test set required)")
    if not 0.0 < initial_fraction < 1.0:
        raise DataError(f"initial_fraction must be in (0,1), got {initial_fraction}")
    n = dataset.n
    test_size = _round_half_up(test_fraction * n)
    if test_size < 1 or test_size >= n:
        raise DataError(f"test_fraction {test_fraction} leaves no usable split of {n}")
    all_idx = np.arange(n)
    if stratified:
        test_idx = _stratified_take(dataset.labels, all_idx, test_size, rng)
    else:
        test_idx = np.sort(rng.permutation(n)[:test_size])
    train_idx = np.setdiff1d(all_idx, test_idx)
    train_ds = dataset.subset(train_idx)
    test_ds = dataset.subset(test_idx)
    if standardize:
        means, stds = fit_standardization(train_ds.features)
        train_ds = replace(
            train_ds,
            features=apply_standardization(train_ds.features, means, stds),
            feature_means=means,
            feature_stds=stds,
        )
        test_ds = replace(
            test_ds,
            features=apply_standardization(test_ds.features, means, stds),
            feature_means=means,
            feature_stds=stds,
        )
    n_train = train_ds.n
    labeled_size = _round_half_up(initial_fraction * n_train)
    if labeled_size < 1:
        raise DataError(f"initial_fraction {initial_fraction} yields an empty labeled pool")
    local = np.arange(n_train)
    if stratified:
        labeled = _stratified_take(train_ds.labels, local, labeled_size, rng)
    else:
        labeled = np.sort(rng.permutation(n_train)[:labeled_size])
    unlabeled = np.setdiff1d(local, labeled)
    return Pool(train_ds, labeled, unlabeled), test_ds
