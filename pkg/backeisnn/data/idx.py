"""
IDX files (MNIST, Fashion-MNIST).

Layout: a 4-byte big-endian magic (0x00000803 for images, 0x00000801 for
labels), one big-endian uint32 extent per dimension, then unsigned bytes.
Gzipped files (``*.gz``) are read transparently.
"""

from __future__ import annotations

import gzip
import logging
from pathlib import Path

import numpy as np

from backeisnn.data.samples import ImageSet
from backeisnn.utils.errors import CountMismatchError, DataError, DataFormatError, TruncatedDataError


logger = logging.getLogger("backeisnn.data")

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

SPLIT_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
SPLIT_COUNTS = {"train": 60_000, "test": 10_000}


def _read_bytes(path: Path) -> bytes:
    if not path.exists():
        raise DataError(f"IDX file not found: {path}")
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as f:
        return f.read()


def parse_idx(raw: bytes, magic: int, source: str = "<bytes>") -> np.ndarray:
    ndim = {IMAGES_MAGIC: 3, LABELS_MAGIC: 1}[magic]
    header_size = 4 + 4 * ndim
    if len(raw) < header_size:
        raise TruncatedDataError(f"{source}: {len(raw)} bytes is shorter than the {header_size}-byte IDX header")
    header = np.frombuffer(raw, dtype=">u4", count=1 + ndim)
    if int(header[0]) != magic:
        raise DataFormatError(f"{source}: bad IDX magic 0x{int(header[0]):08x}, expected 0x{magic:08x}")
    dims = tuple(int(d) for d in header[1:])
    expected = int(np.prod(dims))
    payload = len(raw) - header_size
    if payload < expected:
        raise TruncatedDataError(f"{source}: header promises {expected} bytes of data, file holds {payload}")
    if payload > expected:
        raise CountMismatchError(f"{source}: {payload - expected} trailing bytes after {dims[0]} records")
    return np.frombuffer(raw, dtype=np.uint8, offset=header_size).reshape(dims)


def read_idx(path: str | Path, magic: int) -> np.ndarray:
    path = Path(path)
    return parse_idx(_read_bytes(path), magic, str(path))


def write_idx(path: str | Path, data: np.ndarray) -> Path:
    """Write uint8 ``data`` ([N,H,W] images or [N] labels) as an IDX file."""
    path = Path(path)
    data = np.ascontiguousarray(data, dtype=np.uint8)
    magic = {3: IMAGES_MAGIC, 1: LABELS_MAGIC}.get(data.ndim)
    if magic is None:
        raise DataFormatError(f"IDX writer takes 1-D labels or 3-D images, got {data.ndim}-D")
    header = np.array([magic, *data.shape], dtype=">u4").tobytes()
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "wb") as f:
        f.write(header + data.tobytes())
    return path


def load_idx(images_path: str | Path, labels_path: str | Path, classes: int = 10, name: str = "") -> ImageSet:
    images = read_idx(images_path, IMAGES_MAGIC)
    labels = read_idx(labels_path, LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(f"{images_path} holds {images.shape[0]} images, {labels_path} {labels.shape[0]} labels")
    pixels = images.astype(np.float32)[:, None, :, :] / np.float32(255.0)
    logger.debug("idx_loaded images=%s count=%d", images_path, images.shape[0])
    return ImageSet(pixels, labels.astype(np.int64), classes=classes, name=name)


def find_split_file(directory: Path, stem: str) -> Path:
    for candidate in (directory / stem, directory / f"{stem}.gz"):
        if candidate.exists():
            return candidate
    raise DataError(f"neither {stem} nor {stem}.gz found under {directory}")


def load_idx_split(directory: str | Path, split: str, name: str = "") -> ImageSet:
    directory = Path(directory)
    images_stem, labels_stem = SPLIT_FILES[split]
    return load_idx(
        find_split_file(directory, images_stem),
        find_split_file(directory, labels_stem),
        name=f"{name}/{split}" if name else split,
    )
