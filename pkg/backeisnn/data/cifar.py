"""
CIFAR-10 binary batches: records of one label byte followed by 3072 pixel
bytes (1024 red, 1024 green, 1024 blue, each row-major 32x32).
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from backeisnn.data.samples import ImageSet
from backeisnn.utils.errors import CountMismatchError, DataError, TruncatedDataError


logger = logging.getLogger("backeisnn.data")

RECORD_BYTES = 1 + 3 * 32 * 32
RECORDS_PER_FILE = 10_000
TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
TEST_FILES = ("test_batch.bin",)

# Widely used channel statistics of the CIFAR-10 training split.
DEFAULT_MEAN = (0.4914, 0.4822, 0.4465)
DEFAULT_STD = (0.2470, 0.2435, 0.2616)


def read_cifar_batch(path: str | Path, expected_records: int | None = RECORDS_PER_FILE) -> tuple[np.ndarray, np.ndarray]:
    """Raw ``uint8`` images [N,3,32,32] and labels [N] of one batch file."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"CIFAR-10 batch not found: {path}")
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size % RECORD_BYTES:
        raise TruncatedDataError(f"{path}: {raw.size} bytes is not a whole number of {RECORD_BYTES}-byte records")
    records = raw.reshape(-1, RECORD_BYTES)
    if expected_records is not None and records.shape[0] != expected_records:
        raise CountMismatchError(f"{path}: {records.shape[0]} records, expected {expected_records}")
    labels = records[:, 0].astype(np.int64)
    if labels.size and labels.max() > 9:
        raise DataError(f"{path}: label byte {labels.max()} outside 0..9")
    return records[:, 1:].reshape(-1, 3, 32, 32), labels


def write_cifar_batch(path: str | Path, images: np.ndarray, labels: np.ndarray) -> Path:
    path = Path(path)
    images = np.asarray(images, dtype=np.uint8).reshape(-1, 3 * 32 * 32)
    labels = np.asarray(labels, dtype=np.uint8).reshape(-1, 1)
    np.concatenate([labels, images], axis=1).tofile(path)
    return path


def normalize(images: np.ndarray, mean: Sequence[float], std: Sequence[float]) -> np.ndarray:
    scaled = images.astype(np.float32) / np.float32(255.0)
    m = np.asarray(mean, dtype=np.float32).reshape(1, 3, 1, 1)
    s = np.asarray(std, dtype=np.float32).reshape(1, 3, 1, 1)
    return (scaled - m) / s


def load_cifar10(
    files: Sequence[str | Path],
    mean: Sequence[float] = DEFAULT_MEAN,
    std: Sequence[float] = DEFAULT_STD,
    expected_records: int | None = RECORDS_PER_FILE,
    name: str = "cifar10",
) -> ImageSet:
    if not files:
        raise DataError("no CIFAR-10 batch files given")
    parts = [read_cifar_batch(f, expected_records) for f in files]
    images = np.concatenate([p[0] for p in parts])
    labels = np.concatenate([p[1] for p in parts])
    logger.debug("cifar_loaded files=%d count=%d", len(files), labels.shape[0])
    return ImageSet(normalize(images, mean, std), labels, classes=10, name=name)


def load_cifar_split(directory: str | Path, split: str, **kwargs) -> ImageSet:
    directory = Path(directory)
    nested = directory / "cifar-10-batches-bin"
    if nested.is_dir():
        directory = nested
    names = TRAIN_FILES if split == "train" else TEST_FILES
    return load_cifar10([directory / n for n in names], name=f"cifar10/{split}", **kwargs)
