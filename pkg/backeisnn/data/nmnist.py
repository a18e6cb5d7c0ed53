"""
N-MNIST address-event files.

Every event is 5 bytes: x, y, then a 24-bit big-endian word whose top bit is
the polarity and whose low 23 bits are the timestamp in microseconds.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from backeisnn.data.samples import EVENT_WINDOW_US, SENSOR_SIZE, EventSet, EventStream
from backeisnn.utils.errors import ConfigError, DataError, DataFormatError, TruncatedDataError


logger = logging.getLogger("backeisnn.data")

EVENT_BYTES = 5
SPLIT_DIRS = {"train": "Train", "test": "Test"}


def decode_events(raw: bytes, source: str = "<bytes>") -> EventStream:
    if len(raw) % EVENT_BYTES:
        raise TruncatedDataError(f"{source}: {len(raw)} bytes is not a multiple of {EVENT_BYTES}")
    if not raw:
        return EventStream.empty()
    records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, EVENT_BYTES).astype(np.int64)
    x, y, b2, b3, b4 = records.T
    if x.max() >= SENSOR_SIZE or y.max() >= SENSOR_SIZE:
        raise DataFormatError(
            f"{source}: event coordinate ({int(x.max())}, {int(y.max())}) outside the {SENSOR_SIZE}x{SENSOR_SIZE} sensor"
        )
    polarity = b2 >> 7
    timestamp = ((b2 & 0x7F) << 16) | (b3 << 8) | b4
    order = np.argsort(timestamp, kind="stable")
    return EventStream(x[order], y[order], polarity[order], timestamp[order])


def encode_events(stream: EventStream) -> bytes:
    ts = np.asarray(stream.timestamp, dtype=np.int64)
    if len(stream) and (ts.min() < 0 or ts.max() >= 1 << 23):
        raise DataFormatError("timestamps must fit in 23 bits")
    records = np.empty((len(stream), EVENT_BYTES), dtype=np.uint8)
    records[:, 0] = stream.x
    records[:, 1] = stream.y
    records[:, 2] = (np.asarray(stream.polarity, dtype=np.int64) << 7) | (ts >> 16)
    records[:, 3] = (ts >> 8) & 0xFF
    records[:, 4] = ts & 0xFF
    return records.tobytes()


def load_nmnist(path: str | Path) -> EventStream:
    path = Path(path)
    if not path.exists():
        raise DataError(f"N-MNIST sample not found: {path}")
    return decode_events(path.read_bytes(), str(path))


def bin_events(stream: EventStream, time_steps: int, window_us: int = EVENT_WINDOW_US) -> np.ndarray:
    """
    ``[T, 2, 34, 34]`` occupancy frames: a cell is 1 when at least one event
    of that polarity and pixel falls in the bin. Events at or past the window
    end land in the last bin.
    """
    if time_steps <= 0:
        raise ConfigError(f"time_steps must be > 0, got {time_steps}")
    frames = np.zeros((time_steps, 2, SENSOR_SIZE, SENSOR_SIZE), dtype=np.uint8)
    if not len(stream):
        return frames
    bins = np.minimum(np.asarray(stream.timestamp, dtype=np.int64) * time_steps // window_us, time_steps - 1)
    frames[bins, stream.polarity, stream.y, stream.x] = 1
    return frames


def list_split_files(directory: str | Path, split: str) -> list[tuple[Path, int]]:
    """``(path, label)`` for every ``<Train|Test>/<digit>/*.bin`` file, in sorted order."""
    root = Path(directory) / SPLIT_DIRS[split]
    if not root.is_dir():
        raise DataError(f"N-MNIST split directory not found: {root}")
    files = []
    for digit in range(10):
        files.extend((p, digit) for p in sorted((root / str(digit)).glob("*.bin")))
    if not files:
        raise DataError(f"no N-MNIST samples under {root}")
    return files


def load_nmnist_split(directory: str | Path, split: str) -> EventSet:
    files = list_split_files(directory, split)
    logger.debug("nmnist_indexed split=%s count=%d", split, len(files))
    return EventSet(
        [p for p, _ in files],
        np.array([label for _, label in files], dtype=np.int64),
        name=f"nmnist/{split}",
    )
