"""Frame datasets: file formats, splitting, bandwidth heuristic, synthesis.

A frame dataset is a dense float32 feature matrix with one integer class
label per row. On disk labels are 1-based (both in the binary format and
the CSV fallback); in memory they are 0-based. The binary ".frds" layout
is little-endian: magic "FRDS", version u32, num_frames u64, dim u32,
num_classes u32, then the feature matrix as float32 row-major, then the
labels as u32.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

_MAGIC = b"FRDS"
_VERSION = 1
_HEADER = "<4sIQII"


class DataFormatError(ValueError):
    """A dataset file failed validation while being read."""


@dataclass(frozen=True)
class FrameDataset:
    """Feature vectors with integer class labels (0-based in memory)."""

    features: np.ndarray  # (num_frames, dim) float32
    labels: np.ndarray  # (num_frames,) int32
    num_classes: int

    def __post_init__(self) -> None:
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ValueError(f"features must be a non-empty matrix, got shape {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels must have one entry per feature row")
        if self.num_classes < 1:
            raise ValueError(f"num_classes must be >= 1, got {self.num_classes}")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise ValueError(f"labels must lie in [0, {self.num_classes - 1}]")

    @property
    def num_frames(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: np.ndarray) -> "FrameDataset":
        return FrameDataset(
            features=self.features[indices], labels=self.labels[indices], num_classes=self.num_classes
        )


def save_dataset(dataset: FrameDataset, path) -> None:
    """Write a dataset; ``.csv`` paths get the CSV format, anything else
    the binary format."""
    if str(path).endswith(".csv"):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([f"f{i}" for i in range(dataset.dim)] + ["label"])
            for row, label in zip(dataset.features, dataset.labels):
                writer.writerow([repr(float(v)) for v in row] + [int(label) + 1])
        return
    with open(path, "wb") as fh:
        fh.write(
            struct.pack(
                _HEADER, _MAGIC, _VERSION, dataset.num_frames, dataset.dim, dataset.num_classes
            )
        )
        fh.write(np.ascontiguousarray(dataset.features, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(dataset.labels.astype(np.int64) + 1, dtype="<u4").tobytes())


def load_dataset(path, num_classes: int | None = None) -> FrameDataset:
    """Read a dataset file, binary or CSV.

    The binary format carries its own class count; for CSV it is inferred
    from the largest label unless ``num_classes`` is given. Labels in the
    file are 1-based and converted on the way in.
    """
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == _MAGIC:
        return _load_binary(path, num_classes)
    return _load_csv(path, num_classes)


def _load_binary(path, num_classes: int | None) -> FrameDataset:
    with open(path, "rb") as fh:
        raw = fh.read()
    header_size = struct.calcsize(_HEADER)
    if len(raw) < header_size:
        raise DataFormatError(f"{path}: truncated header")
    magic, version, n, d, c = struct.unpack_from(_HEADER, raw, 0)
    if magic != _MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise DataFormatError(f"{path}: unsupported version {version}")
    if n == 0:
        raise DataFormatError(f"{path}: empty dataset")
    if num_classes is not None and num_classes != c:
        raise DataFormatError(f"{path}: file declares {c} classes, expected {num_classes}")
    expected = header_size + 4 * n * d + 4 * n
    if len(raw) != expected:
        raise DataFormatError(f"{path}: truncated file ({len(raw)} bytes, expected {expected})")
    features = np.frombuffer(raw, dtype="<f4", count=n * d, offset=header_size)
    labels = np.frombuffer(raw, dtype="<u4", count=n, offset=header_size + 4 * n * d)
    labels = labels.astype(np.int64)
    if labels.min() < 1 or labels.max() > c:
        bad = int(np.argmax((labels < 1) | (labels > c)))
        raise DataFormatError(f"{path}: label {labels[bad]} out of range [1, {c}] at frame {bad}")
    return FrameDataset(
        features=features.reshape(n, d).copy(),
        labels=(labels - 1).astype(np.int32),
        num_classes=c,
    )


def _load_csv(path, num_classes: int | None) -> FrameDataset:
    try:
        return _parse_csv(path, num_classes)
    except (csv.Error, UnicodeDecodeError) as exc:
        raise DataFormatError(f"{path}: neither a binary frame file nor parseable CSV ({exc})") from None


def _parse_csv(path, num_classes: int | None) -> FrameDataset:
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty dataset") from None
        try:
            [float(v) for v in header]
        except ValueError:
            pass  # non-numeric first row: the required header
        else:
            raise DataFormatError(f"{path}: missing header row")
        width = len(header)
        if width < 2:
            raise DataFormatError(f"{path}: need at least one feature column plus the label column")
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise DataFormatError(f"{path}: line {lineno}: expected {width} columns, got {len(row)}")
            try:
                rows.append([float(v) for v in row[:-1]])
                labels.append(int(row[-1]))
            except ValueError as exc:
                raise DataFormatError(f"{path}: line {lineno}: {exc}") from None
    if not rows:
        raise DataFormatError(f"{path}: empty dataset")
    labels_arr = np.asarray(labels, dtype=np.int64)
    c = num_classes if num_classes is not None else int(labels_arr.max())
    bad = np.nonzero((labels_arr < 1) | (labels_arr > c))[0]
    if bad.size:
        i = int(bad[0])
        raise DataFormatError(f"{path}: label {labels_arr[i]} out of range [1, {c}] at data row {i + 1}")
    return FrameDataset(
        features=np.asarray(rows, dtype=np.float32),
        labels=(labels_arr - 1).astype(np.int32),
        num_classes=c,
    )


def split_heldout(
    dataset: FrameDataset, fraction: float, seed: int = 0
) -> tuple[FrameDataset, FrameDataset]:
    """Shuffle with the seed, then carve off a held-out fraction.

    The held-out size is round(fraction * num_frames); both sides must end
    up with at least one frame.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    n = dataset.num_frames
    n_held = int(round(fraction * n))
    if n_held < 1 or n_held > n - 1:
        raise ValueError(f"fraction {fraction} leaves an empty split for {n} frames")
    perm = np.random.Generator(np.random.Philox(key=seed)).permutation(n)
    return dataset.subset(perm[n_held:]), dataset.subset(perm[:n_held])


def median_pairwise_distance(dataset: FrameDataset, subsample: int = 2000, seed: int = 0) -> float:
    """Median Euclidean distance over a seeded subsample of frames.

    The customary bandwidth for either kernel family is 1.0 times this
    value, with useful settings ranging from about 0.3 to 5 times it.
    """
    n = dataset.num_frames
    if n < 2:
        raise ValueError("need at least 2 frames to measure pairwise distances")
    if subsample < 2:
        raise ValueError(f"subsample must be >= 2, got {subsample}")
    if subsample >= n:
        sample = dataset.features.astype(np.float64)
    else:
        rng = np.random.Generator(np.random.Philox(key=seed))
        idx = rng.choice(n, size=subsample, replace=False)
        sample = dataset.features[idx].astype(np.float64)
    return float(np.median(pdist(sample)))


def make_concentric_circles(
    num_frames: int,
    inner_radius: float = 1.0,
    outer_radius: float = 2.0,
    noise: float = 0.1,
    seed: int = 0,
) -> FrameDataset:
    """Two classes on concentric circles with Gaussian radial noise.

    Not linearly separable in the plane, which is exactly the point.
    """
    if num_frames < 2:
        raise ValueError("need at least 2 frames")
    if not 0.0 < inner_radius < outer_radius:
        raise ValueError(f"need 0 < inner_radius < outer_radius, got {inner_radius}, {outer_radius}")
    if noise < 0.0:
        raise ValueError(f"noise must be >= 0, got {noise}")
    rng = np.random.Generator(np.random.Philox(key=seed))
    n_inner = num_frames // 2 + num_frames % 2
    radii = np.concatenate(
        [np.full(n_inner, inner_radius), np.full(num_frames - n_inner, outer_radius)]
    )
    labels = np.concatenate(
        [np.zeros(n_inner, dtype=np.int32), np.ones(num_frames - n_inner, dtype=np.int32)]
    )
    radii = radii + noise * rng.standard_normal(num_frames)
    angles = 2.0 * np.pi * rng.random(num_frames)
    features = np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)
    perm = rng.permutation(num_frames)
    return FrameDataset(
        features=features[perm].astype(np.float32), labels=labels[perm], num_classes=2
    )


def make_gaussian_mixture(
    num_frames: int,
    num_classes: int,
    dim: int,
    separation: float = 1.0,
    noise: float = 1.0,
    seed: int = 0,
) -> tuple[FrameDataset, np.ndarray]:
    """Balanced Gaussian mixture with random means and shared isotropic
    covariance; returns the dataset and the class means.

    With equal priors and shared spherical covariance the Bayes-optimal
    classifier is nearest-mean, so the returned means double as an oracle.
    """
    if num_frames < num_classes:
        raise ValueError(f"need at least {num_classes} frames for {num_classes} classes")
    if num_classes < 2 or dim < 1:
        raise ValueError("need num_classes >= 2 and dim >= 1")
    if separation <= 0.0 or noise <= 0.0:
        raise ValueError("separation and noise must be positive")
    rng = np.random.Generator(np.random.Philox(key=seed))
    means = separation * rng.standard_normal((num_classes, dim))
    counts = np.full(num_classes, num_frames // num_classes)
    counts[: num_frames % num_classes] += 1
    features = np.concatenate(
        [means[c] + noise * rng.standard_normal((counts[c], dim)) for c in range(num_classes)]
    )
    labels = np.concatenate(
        [np.full(counts[c], c, dtype=np.int32) for c in range(num_classes)]
    )
    perm = rng.permutation(num_frames)
    dataset = FrameDataset(
        features=features[perm].astype(np.float32), labels=labels[perm], num_classes=num_classes
    )
    return dataset, means


def make_noisy_labels(
    num_frames: int,
    num_classes: int,
    dim: int,
    flip: float = 0.3,
    separation: float = 1.0,
    noise: float = 1.0,
    seed: int = 0,
) -> FrameDataset:
    """Gaussian mixture with a fraction of labels resampled uniformly.

    The resampled labels are irreducible noise, so a classifier trained on
    this data eventually trades held-out perplexity for confidence; flip=0
    reproduces :func:`make_gaussian_mixture` exactly.
    """
    if not 0.0 <= flip <= 1.0:
        raise ValueError(f"flip must lie in [0, 1], got {flip}")
    dataset, _ = make_gaussian_mixture(num_frames, num_classes, dim, separation, noise, seed)
    if flip == 0.0:
        return dataset
    rng = np.random.Generator(np.random.Philox(key=[seed, 1]))
    n_flip = int(round(flip * num_frames))
    idx = rng.choice(num_frames, size=n_flip, replace=False)
    labels = dataset.labels.copy()
    labels[idx] = rng.integers(0, num_classes, size=n_flip, dtype=np.int32)
    return FrameDataset(features=dataset.features, labels=labels, num_classes=num_classes)


def synth_dataset(kind: str, params: dict, seed: int = 0) -> FrameDataset:
    """Dispatch to a synthetic generator by name.

    kind is one of "concentric_circles", "gaussian_mixture",
    "noisy_labels"; params are forwarded as keyword arguments.
    """
    if kind == "concentric_circles":
        return make_concentric_circles(seed=seed, **params)
    if kind == "gaussian_mixture":
        return make_gaussian_mixture(seed=seed, **params)[0]
    if kind == "noisy_labels":
        return make_noisy_labels(seed=seed, **params)
    raise ValueError(f"unknown synthetic dataset kind {kind!r}")
