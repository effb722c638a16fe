"""MNIST IDX parsing, pixel normalization, splits, and batch iteration.

Pixel convention throughout: 0.0 = black background, 1.0 = full ink.
The training split is the first 50,000 samples of the canonical training
files in file order; the test split is all 10,000 test samples.
"""
from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049
TRAIN_COUNT = 50_000
TEST_COUNT = 10_000

TRAIN_IMAGES = "train-images-idx3-ubyte"
TRAIN_LABELS = "train-labels-idx1-ubyte"
TEST_IMAGES = "t10k-images-idx3-ubyte"
TEST_LABELS = "t10k-labels-idx1-ubyte"


class IdxFormatError(ValueError):
    """Bad magic number or malformed IDX header."""


class IdxDataError(ValueError):
    """Structurally valid file with out-of-contract content (bad label, short payload)."""


def parse_idx_images(raw: bytes) -> np.ndarray:
    """Parse an IDX3 image file into a (count, rows, cols) uint8 array."""
    if len(raw) < 16:
        raise IdxDataError(f"image file truncated: {len(raw)} bytes is shorter than the header")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IMAGE_MAGIC:
        raise IdxFormatError(f"bad image magic {magic}, expected {IMAGE_MAGIC}")
    expected = 16 + count * rows * cols
    if len(raw) < expected:
        raise IdxDataError(f"image payload truncated: {len(raw)} bytes, expected {expected}")
    pixels = np.frombuffer(raw, dtype=np.uint8, count=count * rows * cols, offset=16)
    return pixels.reshape(count, rows, cols)


def parse_idx_labels(raw: bytes) -> np.ndarray:
    """Parse an IDX1 label file into a (count,) uint8 array of digits 0..9."""
    if len(raw) < 8:
        raise IdxDataError(f"label file truncated: {len(raw)} bytes is shorter than the header")
    magic, count = struct.unpack(">II", raw[:8])
    if magic != LABEL_MAGIC:
        raise IdxFormatError(f"bad label magic {magic}, expected {LABEL_MAGIC}")
    if len(raw) < 8 + count:
        raise IdxDataError(f"label payload truncated: {len(raw)} bytes, expected {8 + count}")
    labels = np.frombuffer(raw, dtype=np.uint8, count=count, offset=8)
    if labels.size and labels.max() > 9:
        raise IdxDataError(f"label {int(labels.max())} outside 0..9")
    return labels


def normalize(raw):
    """uint8 pixel(s) -> float in [0,1], exactly raw/255."""
    return np.asarray(raw, dtype=np.float32) / np.float32(255.0)


def denormalize(value):
    """float in [0,1] -> nearest uint8 pixel."""
    return np.clip(np.round(np.asarray(value) * 255.0), 0, 255).astype(np.uint8)


def read_idx_bytes(path) -> bytes:
    """Read an IDX file, transparently gunzipping when it starts with 0x1f8b."""
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


@dataclass(frozen=True)
class Dataset:
    """Immutable labeled split: images (N,784) float32 in [0,1], labels (N,)."""

    images: np.ndarray
    labels: np.ndarray
    split: str

    def __post_init__(self):
        if self.images.ndim != 2 or self.images.shape[1] != 784:
            raise ValueError(f"images must be (N,784), got {self.images.shape}")
        if self.labels.shape != (self.images.shape[0],):
            raise ValueError("images/labels length mismatch")
        if len(self) == 0:
            raise ValueError("empty dataset")
        self.images.setflags(write=False)
        self.labels.setflags(write=False)

    def __len__(self):
        return self.images.shape[0]


def _find_file(data_dir: Path, stem: str) -> Path:
    for candidate in (data_dir / stem, data_dir / (stem + ".gz")):
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"{stem}[.gz] not found under {data_dir}")


def _load_split(data_dir: Path, image_stem: str, label_stem: str, split: str,
                limit: int | None) -> Dataset:
    images = parse_idx_images(read_idx_bytes(_find_file(data_dir, image_stem)))
    labels = parse_idx_labels(read_idx_bytes(_find_file(data_dir, label_stem)))
    if images.shape[0] != labels.shape[0]:
        raise IdxDataError(
            f"{split}: {images.shape[0]} images but {labels.shape[0]} labels"
        )
    if limit is not None:
        if images.shape[0] < limit:
            raise IdxDataError(f"{split}: need {limit} samples, file has {images.shape[0]}")
        images, labels = images[:limit], labels[:limit]
    flat = normalize(images).reshape(images.shape[0], -1)
    return Dataset(images=flat, labels=labels.astype(np.int64), split=split)


def load_mnist(data_dir) -> tuple[Dataset, Dataset]:
    """Load the 50,000-sample train split and 10,000-sample test split."""
    data_dir = Path(data_dir)
    train = _load_split(data_dir, TRAIN_IMAGES, TRAIN_LABELS, "train", TRAIN_COUNT)
    test = _load_split(data_dir, TEST_IMAGES, TEST_LABELS, "test", None)
    if len(test) != TEST_COUNT:
        raise IdxDataError(f"test split has {len(test)} samples, expected {TEST_COUNT}")
    return train, test


def batch_iter(dataset: Dataset, batch_size: int, seed):
    """Yield (images, labels) batches over one seeded shuffle of the dataset.

    `seed` is anything numpy's default_rng accepts (an int, or a sequence of
    ints for derived per-epoch seeds). The last batch may be short. The same
    (dataset, batch_size, seed) triple yields the identical batch sequence.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if len(dataset) == 0:
        raise ValueError("cannot iterate an empty dataset")
    order = np.random.default_rng(seed).permutation(len(dataset))
    for start in range(0, len(dataset), batch_size):
        idx = order[start:start + batch_size]
        yield dataset.images[idx], dataset.labels[idx]
