"""Turning frames into the ``[T, ...]`` input sequences the network consumes."""

from __future__ import annotations

import numpy as np

from backeisnn.utils.errors import ConfigError, DataError


def encode_bernoulli(pixels: np.ndarray, time_steps: int, rng: np.random.Generator, dtype=np.float32) -> np.ndarray:
    """
    Independent draw per pixel and timestep: a spike where ``pixel > u`` with
    ``u ~ U[0, 1)``. Works on one frame ``[C,H,W]`` or a stack ``[B,C,H,W]``;
    the result has a leading time axis.
    """
    if time_steps <= 0:
        raise ConfigError(f"time_steps must be > 0, got {time_steps}")
    pixels = np.asarray(pixels)
    if pixels.size and (pixels.min() < 0 or pixels.max() > 1):
        raise DataError(f"Bernoulli encoding needs pixels in [0, 1], got range {pixels.min()}..{pixels.max()}")
    draws = rng.random((time_steps, *pixels.shape))
    return (pixels[None, ...] > draws).astype(dtype)


def encode_direct(pixels: np.ndarray, time_steps: int, dtype=np.float32) -> np.ndarray:
    """The real-valued pixels repeated at every timestep."""
    if time_steps <= 0:
        raise ConfigError(f"time_steps must be > 0, got {time_steps}")
    pixels = np.asarray(pixels, dtype=dtype)
    return np.repeat(pixels[None, ...], time_steps, axis=0)
