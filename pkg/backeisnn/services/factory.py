"""Build a network from a run config."""

from __future__ import annotations

import numpy as np

from backeisnn.run_config import RunConfig
from backeisnn.snn.network import SpikingNetwork


def init_rng(config: RunConfig) -> np.random.Generator:
    """Parameter initialisation stream; separate from the data and dropout streams."""
    return np.random.default_rng([config.seed, 0])


def build_network(config: RunConfig, rng: np.random.Generator | None = None) -> SpikingNetwork:
    return SpikingNetwork(
        config.network_spec(),
        lif=config.lif_params(),
        reset_mode=config.reset_mode,
        spike_cfg=config.spike_cfg(),
        detach_reset=config.detach_reset,
        detach_feedback=config.detach_feedback,
        dropout_policy=config.dropout_policy,
        dtype=config.dtype,
        rng=rng if rng is not None else init_rng(config),
    )
