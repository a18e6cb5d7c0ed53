"""Random crop and horizontal flip for 32x32 colour images."""

from __future__ import annotations

import numpy as np

from backeisnn.data.samples import ImageSample

PAD = 4


def pad_image(pixels: np.ndarray, pad: int = PAD) -> np.ndarray:
    return np.pad(pixels, [(0, 0), (pad, pad), (pad, pad)], mode="constant")


def crop(padded: np.ndarray, top: int, left: int, height: int, width: int) -> np.ndarray:
    return padded[:, top:top + height, left:left + width]


def hflip(pixels: np.ndarray) -> np.ndarray:
    return pixels[:, :, ::-1]


def augment_image(
    pixels: np.ndarray,
    rng: np.random.Generator,
    *,
    pad: int = PAD,
    flip: bool | None = None,
    offset: tuple[int, int] | None = None,
) -> np.ndarray:
    """
    Pad by ``pad`` zeros, crop back to the original size at a random offset,
    then flip left-right with probability 0.5. ``flip`` and ``offset`` force
    the random choices.
    """
    _, h, w = pixels.shape
    if offset is None:
        offset = (int(rng.integers(0, 2 * pad + 1)), int(rng.integers(0, 2 * pad + 1)))
    if flip is None:
        flip = bool(rng.random() < 0.5)
    out = crop(pad_image(pixels, pad), offset[0], offset[1], h, w)
    return np.ascontiguousarray(hflip(out) if flip else out)


def augment_cifar(sample: ImageSample, rng: np.random.Generator, **kwargs) -> ImageSample:
    return ImageSample(augment_image(sample.pixels, rng, **kwargs), sample.label)


def augment_batch(images: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return np.stack([augment_image(img, rng) for img in images])
