"""Dataset generation, CSV/IDX loading, and fidelity sampling.

Includes the synthetic three-moons construction (three noisy half circles
embedded in R^100), headerless CSV feature/label I/O, the big-endian IDX
image format used by MNIST, and per-class fidelity sampling.
"""

import csv
import struct
from dataclasses import dataclass

import numpy as np

from graphseg.fields import FidelitySet

__all__ = [
    "LabeledDataset",
    "MoonsSpec",
    "generate_three_moons",
    "load_features_csv",
    "save_features_csv",
    "load_labels_csv",
    "save_labels_csv",
    "load_mnist_idx",
    "write_idx_images",
    "write_idx_labels",
    "sample_fidelity",
    "stratified_subset",
]

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix with ground-truth class labels in [0, n_classes)."""

    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        if self.features.shape[0] != self.labels.size:
            raise ValueError("feature rows and label count differ")
        if self.labels.size:
            if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
                raise ValueError("labels out of range")
            if np.unique(self.labels).size != self.n_classes:
                raise ValueError("every class must be nonempty")


@dataclass(frozen=True)
class MoonsSpec:
    """Three-moons construction: two top unit half circles at (0,0) and
    (3,0), a bottom half circle of radius 1.5 at (1.5, 0.4), embedded in
    R^100 with i.i.d. Gaussian noise on every component."""

    points_per_class: int = 500
    ambient_dim: int = 100
    noise_sigma: float = 0.14
    seed: int = 0


def generate_three_moons(spec=MoonsSpec()):
    """Sample the three-moons dataset; labels are contiguous 3-class blocks."""
    rng = np.random.default_rng(spec.seed)
    n = spec.points_per_class
    circles = [
        ((0.0, 0.0), 1.0, (0.0, np.pi)),        # top-left, upper half
        ((3.0, 0.0), 1.0, (0.0, np.pi)),        # top-right, upper half
        ((1.5, 0.4), 1.5, (np.pi, 2.0 * np.pi)),  # bottom, lower half
    ]
    features = np.zeros((3 * n, spec.ambient_dim))
    for c, (center, radius, (lo, hi)) in enumerate(circles):
        angles = rng.uniform(lo, hi, size=n)
        features[c * n : (c + 1) * n, 0] = center[0] + radius * np.cos(angles)
        features[c * n : (c + 1) * n, 1] = center[1] + radius * np.sin(angles)
    features += rng.normal(0.0, spec.noise_sigma, size=features.shape)
    labels = np.repeat(np.arange(3), n)
    return LabeledDataset(features, labels, 3)


def load_features_csv(path):
    """Parse a headerless CSV of decimal floats, one sample per row."""
    rows = []
    width = None
    with open(path) as f:
        for lineno, record in enumerate(csv.reader(f), start=1):
            if not record:
                continue
            try:
                row = [float(cell) for cell in record]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric cell") from exc
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ValueError(f"{path}:{lineno}: ragged row")
            rows.append(row)
    if not rows:
        raise ValueError(f"{path}: empty feature file")
    return np.asarray(rows)


def save_features_csv(features, path):
    with open(path, "w") as f:
        for row in np.asarray(features, dtype=float):
            f.write(",".join(repr(float(v)) for v in row) + "\n")


def load_labels_csv(path, n_classes=None):
    """Parse one 0-based class index per line."""
    labels = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                labels.append(int(line))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-integer label") from exc
            if labels[-1] < 0 or (n_classes is not None and labels[-1] >= n_classes):
                raise ValueError(f"{path}:{lineno}: label out of range")
    if not labels:
        raise ValueError(f"{path}: empty label file")
    return np.asarray(labels, dtype=np.int64)


def save_labels_csv(labels, path):
    with open(path, "w") as f:
        for v in labels:
            f.write(f"{int(v)}\n")


def _read_idx_header(f, path, expected_magic, n_dims):
    head = f.read(4 * (1 + n_dims))
    if len(head) < 4 * (1 + n_dims):
        raise ValueError(f"{path}: truncated IDX header")
    values = struct.unpack(f">{1 + n_dims}i", head)
    if values[0] != expected_magic:
        raise ValueError(
            f"{path}: bad IDX magic 0x{values[0]:08x}, expected 0x{expected_magic:08x}"
        )
    return values[1:]


def load_mnist_idx(images_path, labels_path):
    """Load an IDX image/label file pair as a flattened [0,1]-scaled dataset."""
    with open(images_path, "rb") as f:
        n, h, w = _read_idx_header(f, images_path, IDX_IMAGE_MAGIC, 3)
        raw = f.read(n * h * w)
        if len(raw) < n * h * w:
            raise ValueError(f"{images_path}: truncated IDX payload")
        features = np.frombuffer(raw, dtype=np.uint8).reshape(n, h * w) / 255.0
    with open(labels_path, "rb") as f:
        (n_labels,) = _read_idx_header(f, labels_path, IDX_LABEL_MAGIC, 1)
        raw = f.read(n_labels)
        if len(raw) < n_labels:
            raise ValueError(f"{labels_path}: truncated IDX payload")
        labels = np.frombuffer(raw, dtype=np.uint8).astype(np.int64)
    if n != n_labels:
        raise ValueError(
            f"image count {n} does not match label count {n_labels}"
        )
    return LabeledDataset(features, labels, int(labels.max()) + 1)


def write_idx_images(images, path):
    """Write (n, h, w) uint8 images in IDX format."""
    images = np.asarray(images, dtype=np.uint8)
    n, h, w = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">4i", IDX_IMAGE_MAGIC, n, h, w))
        f.write(images.tobytes())


def write_idx_labels(labels, path):
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">2i", IDX_LABEL_MAGIC, labels.size))
        f.write(labels.tobytes())


def _per_class_counts(dataset, per_class):
    """Resolve an integer per-class count or a fractional total per class.

    Fractions sample proportionally to class sizes with largest-remainder
    rounding of the total fraction."""
    class_sizes = np.bincount(dataset.labels, minlength=dataset.n_classes)
    if isinstance(per_class, (int, np.integer)):
        counts = np.full(dataset.n_classes, int(per_class))
    else:
        quotas = per_class * class_sizes.astype(float)
        counts = np.floor(quotas).astype(np.int64)
        short = int(round(quotas.sum())) - int(counts.sum())
        if short > 0:
            order = np.argsort(-(quotas - counts), kind="stable")
            counts[order[:short]] += 1
    if np.any(counts > class_sizes):
        small = int(np.argmax(counts > class_sizes))
        raise ValueError(
            f"class {small} has {class_sizes[small]} samples, fewer than the "
            f"requested {counts[small]}"
        )
    if np.any(counts < 1):
        raise ValueError("fidelity sampling needs at least one sample per class")
    return counts


def sample_fidelity(dataset, per_class, seed, mu):
    """Uniform per-class sampling without replacement into a FidelitySet.

    per_class is either an integer count per class or a float fraction of
    the dataset sampled proportionally across classes.
    """
    rng = np.random.default_rng(seed)
    counts = _per_class_counts(dataset, per_class)
    picked = []
    for c in range(dataset.n_classes):
        members = np.flatnonzero(dataset.labels == c)
        picked.append(rng.choice(members, size=counts[c], replace=False))
    indices = np.concatenate(picked)
    return FidelitySet.from_labels(
        indices, dataset.labels[indices], dataset.n_classes, mu
    )


def stratified_subset(dataset, n_samples, seed):
    """Class-proportional random subset of a dataset (largest-remainder
    rounding), preserving the original class set."""
    rng = np.random.default_rng(seed)
    counts = _per_class_counts(dataset, n_samples / dataset.labels.size)
    picked = []
    for c in range(dataset.n_classes):
        members = np.flatnonzero(dataset.labels == c)
        picked.append(rng.choice(members, size=counts[c], replace=False))
    indices = np.sort(np.concatenate(picked))
    return LabeledDataset(
        dataset.features[indices], dataset.labels[indices], dataset.n_classes
    )
