"""Synthetic dataset generation, CSV ingestion, and stratified splitting.

All generators are deterministic in their seed. Feature ranges (per-column
min/max) are recorded at generation/load time and inherited by splits, so
downstream input perturbations can clamp to the source data domain.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .rng import SplitMix64, derive_seed


@dataclass
class Dataset:
    """Feature matrix, class labels, and per-column range metadata."""

    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64
    num_classes: int
    feature_ranges: np.ndarray  # (d, 2) per-column (min, max)

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        if self.labels.shape != (self.features.shape[0],):
            raise DataError("labels length must match feature rows")
        if self.features.shape[0] == 0:
            raise DataError("dataset must contain at least one sample")
        if not np.isfinite(self.features).all():
            raise DataError("features contain non-finite values")
        if self.num_classes < 2:
            raise DataError("num_classes must be >= 2")
        present = np.unique(self.labels)
        if present.min() < 0 or present.max() >= self.num_classes:
            raise DataError("label outside 0..num_classes-1")
        if len(present) != self.num_classes:
            missing = sorted(set(range(self.num_classes)) - set(present.tolist()))
            raise DataError(f"classes with no samples: {missing}")
        self.feature_ranges = np.ascontiguousarray(self.feature_ranges, dtype=np.float64)
        if self.feature_ranges.shape != (self.features.shape[1], 2):
            raise DataError("feature_ranges must be (n_features, 2)")

    @classmethod
    def from_arrays(cls, features, labels, num_classes) -> "Dataset":
        features = np.ascontiguousarray(features, dtype=np.float64)
        ranges = np.stack([features.min(axis=0), features.max(axis=0)], axis=1)
        return cls(features, labels, num_classes, ranges)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass
class SplitDataset:
    """Disjoint stratified train/test partition of one source dataset."""

    train: Dataset
    test: Dataset
    split_seed: int
    test_fraction: float


def _simplex_centers(num_classes: int, dims: int) -> np.ndarray:
    """num_classes mutually equidistant points (edge length 1) in R^dims.

    Uses the classic construction in num_classes-1 coordinates: the first
    m-1 basis vectors plus a*(1,..,1) with a = (1-sqrt(m))/(m-1), centered
    on the centroid. Needs dims >= num_classes-1.
    """
    m = num_classes
    if dims < m - 1:
        raise ConfigError(
            f"cannot place {m} equidistant class centers in {dims} dimensions "
            f"(needs at least {m - 1})"
        )
    verts = np.zeros((m, m - 1), dtype=np.float64)
    for i in range(m - 1):
        verts[i, i] = 1.0
    verts[m - 1, :] = (1.0 - math.sqrt(m)) / (m - 1)
    verts -= verts.mean(axis=0)
    verts /= math.sqrt(2.0)  # basis-vector edges have length sqrt(2)
    centers = np.zeros((m, dims), dtype=np.float64)
    centers[:, : m - 1] = verts
    return centers


def gen_blobs(
    num_classes: int,
    samples_per_class: int,
    dims: int,
    spread: float,
    seed: int,
    center_scale: float = 4.0,
) -> Dataset:
    """Isotropic Gaussian clusters on a scaled simplex.

    Inter-center distance is center_scale * spread (default 4x), which keeps
    the default instance learnable but imperfect.
    """
    if num_classes < 2:
        raise ConfigError("num_classes must be >= 2")
    if samples_per_class < 1:
        raise ConfigError("samples_per_class must be >= 1")
    if dims < 1:
        raise ConfigError("dims must be >= 1")
    if spread < 0:
        raise ConfigError("spread must be >= 0")
    centers = _simplex_centers(num_classes, dims) * (center_scale * spread)
    features = np.empty((num_classes * samples_per_class, dims), dtype=np.float64)
    labels = np.empty(num_classes * samples_per_class, dtype=np.int64)
    row = 0
    for c in range(num_classes):
        gen = SplitMix64(derive_seed(seed, "blobs", c))
        for _ in range(samples_per_class):
            for j in range(dims):
                features[row, j] = centers[c, j] + spread * gen.normal()
            labels[row] = c
            row += 1
    return Dataset.from_arrays(features, labels, num_classes)


def gen_rings(
    num_rings: int, samples_per_ring: int, noise: float, seed: int
) -> Dataset:
    """Concentric 2-D circles (radius 1, 2, ...) with radial Gaussian noise."""
    if num_rings < 2:
        raise ConfigError("num_rings must be >= 2")
    if samples_per_ring < 1:
        raise ConfigError("samples_per_ring must be >= 1")
    if noise < 0:
        raise ConfigError("noise must be >= 0")
    features = np.empty((num_rings * samples_per_ring, 2), dtype=np.float64)
    labels = np.empty(num_rings * samples_per_ring, dtype=np.int64)
    row = 0
    for r in range(num_rings):
        gen = SplitMix64(derive_seed(seed, "rings", r))
        base = 1.0 + r
        for _ in range(samples_per_ring):
            angle = 2.0 * math.pi * gen.uniform()
            radius = base + noise * gen.normal()
            features[row, 0] = radius * math.cos(angle)
            features[row, 1] = radius * math.sin(angle)
            labels[row] = r
            row += 1
    return Dataset.from_arrays(features, labels, num_rings)


def load_csv(path: str | Path, label_column: str) -> Dataset:
    """Load a header-first CSV with numeric features and integer labels.

    Labels are densified: the sorted distinct values map to 0..m-1.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise DataError(f"{path}: missing label column {label_column!r}")
        label_idx = header.index(label_column)
        feature_names = [h for i, h in enumerate(header) if i != label_idx]
        rows: list[list[float]] = []
        raw_labels: list[int] = []
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(header):
                raise DataError(
                    f"{path}:{lineno}: expected {len(header)} cells, got {len(cells)}"
                )
            feats = []
            for i, cell in enumerate(cells):
                col = header[i]
                if i == label_idx:
                    try:
                        value = float(cell)
                        if value != int(value):
                            raise ValueError
                        raw_labels.append(int(value))
                    except ValueError:
                        raise DataError(
                            f"{path}:{lineno}: column {col!r}: "
                            f"label must be an integer, got {cell!r}"
                        ) from None
                else:
                    try:
                        feats.append(float(cell))
                    except ValueError:
                        raise DataError(
                            f"{path}:{lineno}: column {col!r}: "
                            f"not a number: {cell!r}"
                        ) from None
            rows.append(feats)
    if not rows:
        raise DataError(f"{path}: no data rows")
    distinct = sorted(set(raw_labels))
    remap = {v: i for i, v in enumerate(distinct)}
    labels = np.array([remap[v] for v in raw_labels], dtype=np.int64)
    features = np.array(rows, dtype=np.float64)
    if not np.isfinite(features).all():
        raise DataError(f"{path}: non-finite feature value")
    if len(distinct) < 2:
        raise DataError(f"{path}: need at least 2 distinct labels")
    del feature_names  # kept for error messages only
    return Dataset.from_arrays(features, labels, len(distinct))


def save_csv(dataset: Dataset, path: str | Path, label_column: str = "label") -> None:
    """Write a Dataset back out in the load_csv format (round-trip helper)."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(dataset.n_features)] + [label_column])
        for row, label in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


def split(dataset: Dataset, test_fraction: float, seed: int) -> SplitDataset:
    """Deterministic stratified split; both parts keep the source ranges."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError("test_fraction must be in (0, 1)")
    test_idx: list[int] = []
    train_idx: list[int] = []
    for c in range(dataset.num_classes):
        idx = np.flatnonzero(dataset.labels == c).tolist()
        n_test = math.floor(test_fraction * len(idx) + 0.5)
        if n_test < 1 or n_test >= len(idx):
            raise DataError(
                f"class {c} has {len(idx)} samples: too small to stratify at "
                f"fraction {test_fraction}"
            )
        gen = SplitMix64(derive_seed(seed, "split", c))
        gen.shuffle(idx)
        test_idx.extend(idx[:n_test])
        train_idx.extend(idx[n_test:])
    test_idx.sort()
    train_idx.sort()

    def subset(indices: list[int]) -> Dataset:
        return Dataset(
            dataset.features[indices],
            dataset.labels[indices],
            dataset.num_classes,
            dataset.feature_ranges,
        )

    return SplitDataset(subset(train_idx), subset(test_idx), seed, test_fraction)
