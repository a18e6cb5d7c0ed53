"""
Dataset registry, path resolution and the batch stream feeding the trainer.

Batches are prepared on a background thread and handed over through a
bounded queue. Every batch draws from its own generator seeded with
``(epoch_seed, batch_index)``, so the stream is the same however far the
producer runs ahead.
"""

from __future__ import annotations

import logging
import queue
import threading
from collections.abc import Callable, Iterator
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from backeisnn.data.augment import augment_batch
from backeisnn.data.cifar import DEFAULT_MEAN, DEFAULT_STD, load_cifar_split
from backeisnn.data.encoding import encode_bernoulli, encode_direct
from backeisnn.data.idx import load_idx_split
from backeisnn.data.nmnist import bin_events, load_nmnist_split
from backeisnn.data.samples import EventSet, ImageSet, InputMode, SpikeBatch
from backeisnn.utils.errors import ConfigError, DataError


logger = logging.getLogger("backeisnn.data")

Dataset = Union[ImageSet, EventSet]


@dataclass(frozen=True)
class DatasetInfo:
    name: str
    directory: str
    frame_shape: tuple[int, int, int]
    classes: int
    encodings: tuple[str, ...]


DATASETS: dict[str, DatasetInfo] = {
    "mnist": DatasetInfo("mnist", "mnist", (1, 28, 28), 10, ("bernoulli", "direct")),
    "fashion": DatasetInfo("fashion", "fashion-mnist", (1, 28, 28), 10, ("bernoulli", "direct")),
    "nmnist": DatasetInfo("nmnist", "nmnist", (2, 34, 34), 10, ("event",)),
    "cifar10": DatasetInfo("cifar10", "cifar10", (3, 32, 32), 10, ("direct",)),
    "synthetic": DatasetInfo("synthetic", "", (1, 16, 16), 10, ("bernoulli", "direct")),
}

SYNTHETIC_SIZES = {"train": 1000, "test": 200}


def dataset_info(name: str) -> DatasetInfo:
    try:
        return DATASETS[name]
    except KeyError:
        raise ConfigError(f"Unknown dataset {name!r}; expected one of {sorted(DATASETS)}") from None


def synthetic_split(split: str, seed: int = 1234, size: int | None = None) -> ImageSet:
    """
    Ten noisy prototype images, one per class. The prototypes depend on
    ``seed`` only, so train and test share them.
    """
    info = DATASETS["synthetic"]
    proto_rng = np.random.default_rng(seed)
    prototypes = (proto_rng.random((info.classes, *info.frame_shape)) > 0.6).astype(np.float32)
    n = size if size is not None else SYNTHETIC_SIZES[split]
    rng = np.random.default_rng([seed, 0 if split == "train" else 1])
    labels = rng.integers(0, info.classes, size=n)
    noise = rng.random((n, *info.frame_shape)).astype(np.float32)
    images = np.clip(prototypes[labels] * np.float32(0.8) + noise * np.float32(0.2), 0, 1)
    return ImageSet(images.astype(np.float32), labels.astype(np.int64), info.classes, f"synthetic/{split}")


def resolve_dataset_dir(info: DatasetInfo, data_root: str | Path | None) -> Path:
    if data_root is None:
        raise DataError(f"dataset {info.name!r} needs a data root (--data-root or BACKEISNN_DATA_ROOT)")
    root = Path(data_root).expanduser()
    nested = root / info.directory
    directory = nested if nested.is_dir() else root
    if not directory.is_dir():
        raise DataError(f"data root does not exist: {directory}")
    return directory


def load_split(
    name: str,
    split: str,
    data_root: str | Path | None = None,
    *,
    limit: int | None = None,
    cifar_mean=DEFAULT_MEAN,
    cifar_std=DEFAULT_STD,
) -> Dataset:
    if split not in ("train", "test"):
        raise ConfigError(f"split must be 'train' or 'test', got {split!r}")
    info = dataset_info(name)
    if name == "synthetic":
        data: Dataset = synthetic_split(split)
    else:
        directory = resolve_dataset_dir(info, data_root)
        if name in ("mnist", "fashion"):
            data = load_idx_split(directory, split, name=name)
        elif name == "cifar10":
            data = load_cifar_split(directory, split, mean=cifar_mean, std=cifar_std)
        else:
            data = load_nmnist_split(directory, split)
    logger.info("dataset_loaded name=%s split=%s count=%d limit=%s", name, split, len(data), limit)
    return data.subset(limit)


@dataclass(frozen=True)
class InputPipeline:
    mode: InputMode
    time_steps: int
    event_bins: int = 100
    augment: bool = False
    dtype: str = "float32"


def make_batch(data: Dataset, indices: np.ndarray, pipe: InputPipeline, rng: np.random.Generator) -> SpikeBatch:
    labels = data.labels[indices]
    if isinstance(data, EventSet):
        if pipe.mode != "event":
            raise ConfigError(f"event data needs the 'event' encoding, got {pipe.mode!r}")
        frames = [bin_events(data.stream(int(i)), pipe.event_bins)[: pipe.time_steps] for i in indices]
        return SpikeBatch(np.stack(frames, axis=1).astype(pipe.dtype), labels, "event")

    images = data.images[indices]
    if pipe.augment:
        images = augment_batch(images, rng)
    if pipe.mode == "bernoulli":
        encoded = encode_bernoulli(images, pipe.time_steps, rng, dtype=pipe.dtype)
    elif pipe.mode == "direct":
        encoded = encode_direct(images, pipe.time_steps, dtype=pipe.dtype)
    else:
        raise ConfigError(f"image data cannot use the {pipe.mode!r} encoding")
    return SpikeBatch(encoded, labels, pipe.mode)


_DONE = object()


class BatchStream:
    """One epoch of encoded batches in a fixed, seed-determined order."""

    def __init__(
        self,
        data: Dataset,
        batch_size: int,
        pipe: InputPipeline,
        epoch_seed: int,
        *,
        shuffle: bool = True,
        prefetch: int = 2,
    ) -> None:
        if batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
        self.data = data
        self.batch_size = batch_size
        self.pipe = pipe
        self.epoch_seed = epoch_seed
        self.prefetch = prefetch
        n = len(data)
        order = np.random.default_rng([epoch_seed]).permutation(n) if shuffle else np.arange(n)
        self.batches = [order[i:i + batch_size] for i in range(0, n, batch_size)]

    def __len__(self) -> int:
        return len(self.batches)

    def batch_rng(self, index: int) -> np.random.Generator:
        return np.random.default_rng([self.epoch_seed, index, 0])

    def build(self, index: int) -> SpikeBatch:
        return make_batch(self.data, self.batches[index], self.pipe, self.batch_rng(index))

    def __iter__(self) -> Iterator[SpikeBatch]:
        if self.prefetch <= 0:
            for i in range(len(self.batches)):
                yield self.build(i)
            return
        yield from _prefetched(self.build, len(self.batches), self.prefetch)


def _prefetched(build: Callable[[int], SpikeBatch], count: int, depth: int) -> Iterator[SpikeBatch]:
    q: queue.Queue = queue.Queue(maxsize=depth)
    stop = threading.Event()

    def produce() -> None:
        try:
            for i in range(count):
                if stop.is_set():
                    return
                q.put(build(i))
            q.put(_DONE)
        except BaseException as e:  # handed to the consumer
            q.put(e)

    worker = threading.Thread(target=produce, name="backeisnn-prefetch", daemon=True)
    worker.start()
    try:
        while True:
            item = q.get()
            if item is _DONE:
                return
            if isinstance(item, BaseException):
                raise item
            yield item
    finally:
        stop.set()
        # unblock a producer waiting on a full queue
        while worker.is_alive():
            try:
                q.get_nowait()
            except queue.Empty:
                worker.join(timeout=0.05)
