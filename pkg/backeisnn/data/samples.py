"""Containers passed between the loaders, the encoders and the trainer."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from backeisnn.utils.errors import DataError, ShapeError


InputMode = Literal["bernoulli", "direct", "event"]

SENSOR_SIZE = 34
EVENT_WINDOW_US = 300_000


@dataclass(frozen=True)
class ImageSample:
    pixels: np.ndarray  # [C, H, W]
    label: int


@dataclass
class ImageSet:
    """A split held as one array: ``images`` [N, C, H, W], ``labels`` [N]."""

    images: np.ndarray
    labels: np.ndarray
    classes: int = 10
    name: str = ""

    def __post_init__(self) -> None:
        if self.images.ndim != 4:
            raise ShapeError(f"images must be [N,C,H,W], got {self.images.shape}")
        if self.images.shape[0] != self.labels.shape[0]:
            raise DataError(f"{self.images.shape[0]} images but {self.labels.shape[0]} labels")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.classes):
            raise DataError(f"labels outside [0, {self.classes}) in {self.name or 'image set'}")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def __getitem__(self, index: int) -> ImageSample:
        return ImageSample(self.images[index], int(self.labels[index]))

    @property
    def frame_shape(self) -> tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def subset(self, limit: int | None) -> "ImageSet":
        if limit is None or limit >= len(self):
            return self
        return ImageSet(self.images[:limit], self.labels[:limit], self.classes, self.name)


@dataclass(frozen=True)
class EventStream:
    """Decoded AER events, one array per field, sorted by timestamp."""

    x: np.ndarray
    y: np.ndarray
    polarity: np.ndarray
    timestamp: np.ndarray  # microseconds

    def __len__(self) -> int:
        return int(self.timestamp.shape[0])

    @classmethod
    def empty(cls) -> "EventStream":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z.copy(), z.copy(), z.copy())

    @property
    def duration(self) -> int:
        return int(self.timestamp[-1] - self.timestamp[0]) if len(self) else 0


@dataclass
class EventSet:
    """
    An event-camera split. ``sources`` holds decoded streams or the paths of
    sample files, which are decoded on access.
    """

    sources: list
    labels: np.ndarray
    classes: int = 10
    name: str = ""

    def __len__(self) -> int:
        return len(self.sources)

    def stream(self, index: int) -> EventStream:
        source = self.sources[index]
        if isinstance(source, EventStream):
            return source
        from backeisnn.data.nmnist import load_nmnist

        return load_nmnist(source)

    def subset(self, limit: int | None) -> "EventSet":
        if limit is None or limit >= len(self):
            return self
        return EventSet(self.sources[:limit], self.labels[:limit], self.classes, self.name)

    @property
    def frame_shape(self) -> tuple[int, int, int]:
        return (2, SENSOR_SIZE, SENSOR_SIZE)


@dataclass(frozen=True)
class SpikeBatch:
    data: np.ndarray  # [T, B, C, H, W]
    labels: np.ndarray  # [B]
    mode: InputMode

    def __post_init__(self) -> None:
        if self.data.ndim != 5:
            raise ShapeError(f"spike batch must be [T,B,C,H,W], got {self.data.shape}")
        if self.data.shape[1] != self.labels.shape[0]:
            raise ShapeError(f"spike batch holds {self.data.shape[1]} samples but {self.labels.shape[0]} labels")

    @property
    def time_steps(self) -> int:
        return self.data.shape[0]

    @property
    def batch_size(self) -> int:
        return self.data.shape[1]

    def slice(self, index: np.ndarray | slice) -> "SpikeBatch":
        return SpikeBatch(self.data[:, index], self.labels[index], self.mode)
