"""Datasets, IDX reader and Dirichlet label-skew partitioning."""
from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class PartitionError(ValueError):
    pass


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features must be [samples x dims] aligned with labels")
        if len(self.labels) == 0:
            raise ValueError("dataset is empty")
        if self.labels.min() < 0 or self.labels.max() >= self.classes:
            raise ValueError(f"labels must lie in [0, {self.classes})")

    def __len__(self):
        return len(self.labels)

    @property
    def dims(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "Dataset":
        return Dataset(self.features[indices], self.labels[indices], self.classes)


@dataclass
class PartitionSpec:
    assignments: list[np.ndarray]
    beta: float

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(ix) for ix in self.assignments], dtype=np.int64)


def make_blobs(n_train=60_000, n_test=10_000, dims=64, classes=10, separation=0.6,
               nuisance_dims=16, nuisance_scale=4.0, seed=0) -> tuple[Dataset, Dataset]:
    """Gaussian class clusters with balanced labels.

    Class centres are drawn once from ``N(0, separation**2)`` per coordinate.
    Samples get unit isotropic noise plus label-independent noise of standard
    deviation ``nuisance_scale`` inside a random ``nuisance_dims``-dimensional
    subspace. The nuisance subspace makes the loss ill-conditioned, so
    gradient descent improves over tens of rounds instead of jumping to a
    nearest-centroid solution after the first step.
    """
    rng = np.random.default_rng(seed)
    centres = rng.normal(0.0, separation, size=(classes, dims))
    nuisance_dims = min(nuisance_dims, dims)
    basis = np.linalg.qr(rng.normal(size=(dims, dims)))[0][:nuisance_dims]

    def draw(n):
        labels = rng.permutation(np.arange(n) % classes)
        x = centres[labels] + rng.normal(size=(n, dims))
        if nuisance_dims:
            x += nuisance_scale * rng.normal(size=(n, nuisance_dims)) @ basis
        return Dataset(x, labels, classes)

    return draw(n_train), draw(n_test)


def _open(path):
    path = Path(path)
    return gzip.open(path, "rb") if path.suffix == ".gz" else open(path, "rb")


def read_idx(path) -> np.ndarray:
    """Read an unsigned-byte IDX file (images or labels) into an array."""
    with _open(path) as fh:
        header = fh.read(4)
        if len(header) != 4:
            raise ValueError(f"{path}: truncated IDX header")
        zero, dtype_code, ndim = struct.unpack(">HBB", header)
        if zero != 0 or dtype_code != 0x08:
            raise ValueError(f"{path}: unsupported IDX magic {header.hex()}")
        shape = struct.unpack(f">{ndim}I", fh.read(4 * ndim))
        raw = fh.read()
    expected = int(np.prod(shape))
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes of data, found {len(raw)}")
    return np.frombuffer(raw, dtype=np.uint8).reshape(shape)


def write_idx(path, array) -> None:
    array = np.ascontiguousarray(array, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">HBB", 0, 0x08, array.ndim))
        fh.write(struct.pack(f">{array.ndim}I", *array.shape))
        fh.write(array.tobytes())


def load_idx_dataset(images_path, labels_path, classes=10) -> Dataset:
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    if images.ndim != 3 or labels.ndim != 1:
        raise ValueError("expected a rank-3 image file and a rank-1 label file")
    x = images.reshape(images.shape[0], -1).astype(float) / 255.0
    return Dataset(x, labels.astype(np.int64), classes)


def dirichlet_partition(data: Dataset, n_devices: int, beta: float, seed=0) -> PartitionSpec:
    """Split sample indices across devices with Dirichlet(beta) label proportions.

    Devices left empty by the draw receive one sample from the largest device.
    """
    if n_devices < 1:
        raise PartitionError("n_devices must be at least 1")
    if beta <= 0:
        raise PartitionError("beta must be positive")
    if len(data) < n_devices:
        raise PartitionError(f"{len(data)} samples cannot cover {n_devices} devices")
    rng = np.random.default_rng(seed)
    buckets: list[list[np.ndarray]] = [[] for _ in range(n_devices)]
    for c in range(data.classes):
        idx = rng.permutation(np.flatnonzero(data.labels == c))
        if idx.size == 0:
            continue
        props = rng.dirichlet(np.full(n_devices, beta))
        cuts = np.round(np.cumsum(props)[:-1] * idx.size).astype(int)
        for dev, chunk in enumerate(np.split(idx, cuts)):
            buckets[dev].append(chunk)
    parts = [np.concatenate(b) if b else np.empty(0, dtype=np.int64) for b in buckets]
    for dev in range(n_devices):
        if parts[dev].size == 0:
            donor = int(np.argmax([p.size for p in parts]))
            take = rng.integers(parts[donor].size)
            parts[dev] = parts[donor][take:take + 1]
            parts[donor] = np.delete(parts[donor], take)
    return PartitionSpec([np.sort(p).astype(np.int64) for p in parts], float(beta))


def compute_weights(parts: PartitionSpec) -> np.ndarray:
    sizes = parts.sizes.astype(float)
    if sizes.size == 0 or sizes.sum() == 0:
        raise PartitionError("cannot weight an empty partition")
    return sizes / sizes.sum()
