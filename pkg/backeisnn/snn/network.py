"""
Layer composition and the temporal rollout.

A :class:`SpikingNetwork` is built from a :class:`~backeisnn.snn.structure.NetworkSpec`:
every ``Conv`` and ``FC`` token becomes a spiking LIF block, ``P2`` a pooling
block and ``D<p>`` a dropout block. :meth:`SpikingNetwork.rollout` feeds a
``[T, B, C, H, W]`` input through all blocks for ``T`` steps and decodes the
output layer by its mean spike rate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal, Union

import numpy as np

from backeisnn.engine import functional as F
from backeisnn.engine.autograd import Variable, constant, parameter
from backeisnn.engine.functional import SpikeFnConfig
from backeisnn.engine.kernels import Conv2dGeometry, resolve_dtype
from backeisnn.snn.neuron import GateParams, LifLayerState, LifParams, ResetMode, Switches, lif_step
from backeisnn.snn.structure import FC, Conv, Dropout, NetworkSpec, Pool2
from backeisnn.utils.errors import ConfigError, NumericError, ShapeError


logger = logging.getLogger("backeisnn.network")

DropoutPolicy = Literal["window", "step"]


# -- dropout -----------------------------------------------------------------


def sample_dropout_mask(shape: tuple[int, ...], p: float, rng: np.random.Generator, dtype) -> np.ndarray:
    """Inverted-dropout mask: 0 with probability ``p``, ``1/(1-p)`` otherwise."""
    keep = rng.random(shape) >= p
    return keep.astype(dtype) * np.asarray(1.0 / (1.0 - p), dtype=dtype)


def dropout_spikes(
    spikes: Variable,
    p: float,
    *,
    training: bool,
    rng: np.random.Generator | None = None,
    mask: np.ndarray | None = None,
) -> Variable:
    if not 0 <= p < 1:
        raise ConfigError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0:
        return spikes
    if mask is None:
        if rng is None:
            raise ConfigError("dropout in training mode needs an rng or a mask")
        mask = sample_dropout_mask(spikes.shape, p, rng, spikes.dtype)
    if mask.shape != spikes.shape:
        raise ShapeError(f"dropout mask has shape {mask.shape}, spikes have {spikes.shape}")
    return F.mul(spikes, constant(mask))


# -- blocks ------------------------------------------------------------------


@dataclass
class SpikingBlock:
    index: int
    label: str
    kind: Literal["conv", "fc"]
    weight: Variable
    bias: Variable
    geometry: Conv2dGeometry | None
    gates: GateParams | None
    switches: Switches
    out_shape: tuple[int, ...]
    is_output: bool = False

    @property
    def name(self) -> str:
        return f"{self.kind}{self.index}"

    def current(self, x: Variable) -> Variable:
        if self.kind == "conv":
            return F.conv2d(x, self.weight, self.bias, self.geometry)
        if x.value.ndim != 2:
            x = F.flatten(x)
        return F.linear(x, self.weight, self.bias)

    def parameters(self) -> list[Variable]:
        params = [self.weight, self.bias]
        if self.gates is not None:
            params.extend(self.gates.parameters())
        return params


@dataclass
class PoolBlock:
    index: int
    label: str
    mode: Literal["avg", "max"] = "avg"

    def apply(self, x: Variable) -> Variable:
        return F.avg_pool2(x) if self.mode == "avg" else F.max_pool2(x)


@dataclass
class DropoutBlock:
    index: int
    label: str
    p: float


Block = Union[SpikingBlock, PoolBlock, DropoutBlock]


# -- statistics --------------------------------------------------------------


@dataclass
class LayerStats:
    """Spike and gate tallies of one spiking layer, summed over samples and timesteps."""

    neuron_steps: int = 0
    positive: int = 0
    negative: int = 0
    sfb_count: int = 0
    sfb_sum: float = 0.0
    sfb_sumsq: float = 0.0

    def observe(self, delta: np.ndarray, sfb: np.ndarray | None) -> None:
        self.neuron_steps += int(delta.size)
        self.positive += int(np.count_nonzero(delta > 0))
        self.negative += int(np.count_nonzero(delta < 0))
        if sfb is not None:
            s = sfb.astype(np.float64)
            self.sfb_count += int(s.size)
            self.sfb_sum += float(s.sum())
            self.sfb_sumsq += float(np.square(s).sum())

    def merge(self, other: "LayerStats") -> "LayerStats":
        return LayerStats(
            neuron_steps=self.neuron_steps + other.neuron_steps,
            positive=self.positive + other.positive,
            negative=self.negative + other.negative,
            sfb_count=self.sfb_count + other.sfb_count,
            sfb_sum=self.sfb_sum + other.sfb_sum,
            sfb_sumsq=self.sfb_sumsq + other.sfb_sumsq,
        )

    @property
    def nonzero(self) -> int:
        return self.positive + self.negative

    @property
    def spike_rate(self) -> float:
        return self.nonzero / self.neuron_steps if self.neuron_steps else 0.0

    @property
    def positive_fraction(self) -> float:
        return self.positive / self.nonzero if self.nonzero else 0.0

    @property
    def negative_fraction(self) -> float:
        return self.negative / self.nonzero if self.nonzero else 0.0

    @property
    def sfb_mean(self) -> float | None:
        return self.sfb_sum / self.sfb_count if self.sfb_count else None

    @property
    def sfb_std(self) -> float | None:
        if not self.sfb_count:
            return None
        mean = self.sfb_sum / self.sfb_count
        return float(np.sqrt(max(self.sfb_sumsq / self.sfb_count - mean * mean, 0.0)))

    def summary(self) -> dict:
        return {
            "spike_rate": self.spike_rate,
            "positive_fraction": self.positive_fraction,
            "negative_fraction": self.negative_fraction,
            "sfb_mean": self.sfb_mean,
            "sfb_std": self.sfb_std,
        }


def merge_stats(a: dict[str, LayerStats], b: dict[str, LayerStats]) -> dict[str, LayerStats]:
    out = dict(a)
    for name, stats in b.items():
        out[name] = out[name].merge(stats) if name in out else stats
    return out


# -- rollout -----------------------------------------------------------------


@dataclass
class RolloutRecord:
    outputs: np.ndarray  # [T, B, classes]
    rate: Variable  # [B, classes]
    layer_stats: dict[str, LayerStats]
    # layer name -> per-timestep (input current, v, delta); filled only on request
    states: dict[str, list[tuple[np.ndarray, np.ndarray, np.ndarray]]] | None = field(default=None, repr=False)

    @property
    def time_steps(self) -> int:
        return self.outputs.shape[0]

    @property
    def batch_size(self) -> int:
        return self.outputs.shape[1]


@dataclass(frozen=True)
class RateTarget:
    y: np.ndarray

    def __post_init__(self) -> None:
        if self.y.ndim != 2:
            raise ShapeError(f"rate target must be [B, classes], got {self.y.shape}")
        if not np.allclose(self.y.sum(axis=1), 1.0):
            raise ShapeError("every rate target row must sum to 1")

    @classmethod
    def from_labels(cls, labels: np.ndarray, classes: int, dtype=np.float32) -> "RateTarget":
        labels = np.asarray(labels, dtype=np.int64)
        if labels.size and (labels.min() < 0 or labels.max() >= classes):
            raise ShapeError(f"labels must lie in [0, {classes}), got range {labels.min()}..{labels.max()}")
        y = np.zeros((labels.shape[0], classes), dtype=dtype)
        y[np.arange(labels.shape[0]), labels] = 1
        return cls(y)


def mse_rate_loss(record: RolloutRecord, target: RateTarget, batch_size: int | None = None) -> Variable:
    """
    ``(1/S) * sum_s ||y_s - rate_s||^2``. ``batch_size`` overrides ``S`` when
    the record covers one slice of a larger batch.
    """
    rate = record.rate
    if rate.shape != target.y.shape:
        raise ShapeError(f"rate has shape {rate.shape}, target has {target.y.shape}")
    s = batch_size if batch_size is not None else rate.shape[0]
    diff = F.sub(rate, constant(target.y.astype(rate.dtype, copy=False)))
    return F.scale(F.sum_(F.mul(diff, diff)), 1.0 / s)


def _uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, dtype) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class SpikingNetwork:
    def __init__(
        self,
        spec: NetworkSpec,
        *,
        lif: LifParams | None = None,
        reset_mode: ResetMode = "magnitude",
        spike_cfg: SpikeFnConfig | None = None,
        detach_reset: bool = False,
        detach_feedback: bool = False,
        dropout_policy: DropoutPolicy = "window",
        dtype: str | np.dtype = "float32",
        rng: np.random.Generator | None = None,
    ) -> None:
        if dropout_policy not in ("window", "step"):
            raise ConfigError(f"dropout_policy must be 'window' or 'step', got {dropout_policy!r}")
        self.spec = spec
        self.lif = lif or LifParams()
        self.reset_mode = reset_mode
        self.spike_cfg = spike_cfg or SpikeFnConfig(v_th=self.lif.v_th)
        self.dropout_policy = dropout_policy
        self.dtype = resolve_dtype(dtype)
        self._detach = (detach_reset, detach_feedback)
        self.blocks: list[Block] = self._build(rng or np.random.default_rng(0))

    # construction

    def _conv_geometry(self, cin: int, layer: Conv) -> Conv2dGeometry:
        if self.spec.conv_padding == "same":
            return Conv2dGeometry.same(cin, layer.channels, layer.kernel)
        return Conv2dGeometry(cin, layer.channels, layer.kernel, stride=1, padding=int(self.spec.conv_padding))

    def _gates(self, prefix: str, width: int, rng, *, dense: bool, switches: Switches) -> GateParams | None:
        if not (switches.sfbm or switches.beim):
            return None
        k = 1 if dense else self.spec.gate_kernel
        shape = (width, width) if dense else (width, width, k, k)
        fan_in = width * k * k
        gates = GateParams(kernel_size=k, dense=dense)
        if switches.sfbm:
            gates.sfb_weight = parameter(_uniform(rng, shape, fan_in, self.dtype), f"{prefix}.sfb_weight")
            gates.sfb_bias = parameter(np.zeros(width, dtype=self.dtype), f"{prefix}.sfb_bias")
        if switches.beim:
            gates.ei_weight = parameter(_uniform(rng, shape, fan_in, self.dtype), f"{prefix}.ei_weight")
            gates.ei_bias = parameter(np.zeros(width, dtype=self.dtype), f"{prefix}.ei_bias")
        return gates

    def _build(self, rng: np.random.Generator) -> list[Block]:
        spec = self.spec
        detach_reset, detach_feedback = self._detach
        shape: tuple[int, ...] = tuple(spec.input_shape)
        last_spiking = max(i for i, layer in enumerate(spec.layers) if isinstance(layer, (Conv, FC)))
        blocks: list[Block] = []

        for i, layer in enumerate(spec.layers):
            label = str(layer)
            if isinstance(layer, Conv):
                if len(shape) != 3:
                    raise ShapeError(f"layer {i} ({label}) needs a [C,H,W] input, got {shape}")
                geom = self._conv_geometry(shape[0], layer)
                out_shape = (layer.channels, geom.output_extent(shape[1]), geom.output_extent(shape[2]))
                fan_in = shape[0] * layer.kernel * layer.kernel
                switches = Switches(spec.sfbm, spec.beim, detach_reset, detach_feedback)
                prefix = f"conv{i}"
                weight = parameter(_uniform(rng, geom.weight_shape(), fan_in, self.dtype), f"{prefix}.weight")
                bias = parameter(_uniform(rng, (layer.channels,), fan_in, self.dtype), f"{prefix}.bias")
                gates = self._gates(prefix, layer.channels, rng, dense=False, switches=switches)
                blocks.append(SpikingBlock(i, label, "conv", weight, bias, geom, gates, switches, out_shape))
                shape = out_shape
            elif isinstance(layer, Pool2):
                if len(shape) != 3 or shape[1] % 2 or shape[2] % 2:
                    raise ShapeError(f"layer {i} ({label}) needs even spatial extents, got {shape}")
                blocks.append(PoolBlock(i, label, spec.pooling))
                shape = (shape[0], shape[1] // 2, shape[2] // 2)
            elif isinstance(layer, Dropout):
                blocks.append(DropoutBlock(i, label, layer.p))
            else:
                fan_in = int(np.prod(shape))
                is_output = i == last_spiking
                gated = spec.gates_on_fc and not is_output
                switches = Switches(
                    spec.sfbm and gated, spec.beim and gated, detach_reset, detach_feedback
                )
                prefix = f"fc{i}"
                weight = parameter(_uniform(rng, (layer.units, fan_in), fan_in, self.dtype), f"{prefix}.weight")
                bias = parameter(_uniform(rng, (layer.units,), fan_in, self.dtype), f"{prefix}.bias")
                gates = self._gates(prefix, layer.units, rng, dense=True, switches=switches)
                blocks.append(
                    SpikingBlock(i, label, "fc", weight, bias, None, gates, switches, (layer.units,), is_output)
                )
                shape = (layer.units,)

        if shape != (spec.classes,):
            raise ShapeError(f"network output has shape {shape}, expected ({spec.classes},)")
        count = sum(p.value.size for b in blocks if isinstance(b, SpikingBlock) for p in b.parameters())
        logger.debug("network_built structure=%s parameters=%d", spec.structure, count)
        return blocks

    # parameters

    @property
    def spiking_blocks(self) -> list[SpikingBlock]:
        return [b for b in self.blocks if isinstance(b, SpikingBlock)]

    def named_parameters(self) -> dict[str, Variable]:
        return {p.name: p for block in self.spiking_blocks for p in block.parameters()}

    def parameter_count(self) -> int:
        return sum(p.value.size for p in self.named_parameters().values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self.named_parameters().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        missing = sorted(set(params) - set(state))
        unexpected = sorted(set(state) - set(params))
        if missing or unexpected:
            raise ConfigError(f"parameter names do not match: missing={missing} unexpected={unexpected}")
        for name, p in params.items():
            value = np.asarray(state[name])
            if value.shape != p.value.shape:
                raise ShapeError(f"parameter {name} has shape {value.shape}, network expects {p.value.shape}")
            p.value = value.astype(self.dtype, copy=True)

    # rollout

    def rollout(
        self,
        inputs: np.ndarray,
        *,
        training: bool = False,
        rng: np.random.Generator | None = None,
        record_states: bool = False,
    ) -> RolloutRecord:
        spec = self.spec
        if inputs.ndim != 5:
            raise ShapeError(f"input must be [T,B,C,H,W], got shape {inputs.shape}")
        if inputs.shape[0] != spec.time_steps:
            raise ShapeError(f"input has {inputs.shape[0]} timesteps, network runs {spec.time_steps}")
        if tuple(inputs.shape[2:]) != tuple(spec.input_shape):
            raise ShapeError(f"input frames have shape {inputs.shape[2:]}, network expects {spec.input_shape}")
        if training and rng is None and any(isinstance(b, DropoutBlock) and b.p > 0 for b in self.blocks):
            raise ConfigError("training with dropout needs an rng")

        inputs = inputs.astype(self.dtype, copy=False)
        batch = inputs.shape[1]
        states = {
            b.name: LifLayerState.initial((batch, *b.out_shape), self.dtype) for b in self.spiking_blocks
        }
        stats = {b.name: LayerStats() for b in self.spiking_blocks}
        trace: dict[str, list] | None = {b.name: [] for b in self.spiking_blocks} if record_states else None
        masks: dict[int, np.ndarray] = {}

        outputs = []
        total: Variable | None = None
        for t in range(spec.time_steps):
            x = constant(inputs[t])
            for block in self.blocks:
                try:
                    x = self._advance(block, x, t, states, stats, trace, masks, training, rng)
                except ShapeError as e:
                    raise ShapeError(f"layer {block.index} ({block.label}), timestep {t}: {e}") from e
            outputs.append(x.value)
            total = x if total is None else F.add(total, x)

        rate = F.scale(total, 1.0 / spec.time_steps)
        return RolloutRecord(outputs=np.stack(outputs), rate=rate, layer_stats=stats, states=trace)

    def _advance(self, block, x, t, states, stats, trace, masks, training, rng) -> Variable:
        if isinstance(block, PoolBlock):
            return block.apply(x)
        if isinstance(block, DropoutBlock):
            if not training or block.p == 0:
                return x
            mask = masks.get(block.index) if self.dropout_policy == "window" else None
            if mask is None:
                mask = sample_dropout_mask(x.shape, block.p, rng, x.dtype)
                masks[block.index] = mask
            return dropout_spikes(x, block.p, training=True, mask=mask)

        try:
            current = block.current(x)
        except NumericError as e:
            raise NumericError(f"layer {block.index} ({block.label}), timestep {t}: {e}") from e
        state, delta = lif_step(
            states[block.name],
            current,
            self.lif,
            block.gates,
            block.switches,
            self.reset_mode,
            self.spike_cfg,
            layer=block.index,
            timestep=t,
        )
        states[block.name] = state
        stats[block.name].observe(delta.value, state.sfb)
        if trace is not None:
            trace[block.name].append((current.value.copy(), state.v.value.copy(), delta.value.copy()))
        return delta


def forward_rollout(
    network: SpikingNetwork,
    inputs: np.ndarray,
    *,
    training: bool = False,
    rng: np.random.Generator | None = None,
    record_states: bool = False,
) -> RolloutRecord:
    return network.rollout(inputs, training=training, rng=rng, record_states=record_states)
