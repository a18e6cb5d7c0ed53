"""
Leaky integrate-and-fire cell with the self-feedback gate and the
excitatory/inhibitory gate.

One call to :func:`lif_step` advances a layer by one timestep::

    SFB_t   = sigmoid(conv(delta_{t-1}))
    V_t     = lam * V_{t-1} * (1 - r) + SFB_t * I_t       r = delta_{t-1} or |delta_{t-1}|
    EI_t    = sign(conv(V_t))
    delta_t = EI_t * S(V_t)

with ``lam = 1 - 1/tau``. Either gate can be switched off.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from backeisnn.engine import functional as F
from backeisnn.engine.autograd import Variable, constant
from backeisnn.engine.functional import SpikeFnConfig
from backeisnn.engine.kernels import Conv2dGeometry
from backeisnn.utils.errors import ConfigError, NumericError, ShapeError


ResetMode = Literal["literal", "magnitude"]
RESET_MODES: tuple[str, ...] = ("literal", "magnitude")


@dataclass(frozen=True)
class LifParams:
    tau: float = 2.0
    v_th: float = 0.5
    v_reset: float = 0.0

    def __post_init__(self) -> None:
        if not self.tau > 1:
            raise ConfigError(f"tau must be > 1 so the leak lies in (0, 1), got {self.tau}")
        if not self.v_th > 0:
            raise ConfigError(f"v_th must be > 0, got {self.v_th}")
        if self.v_reset != 0:
            raise ConfigError("only v_reset = 0 is supported")

    @property
    def leak(self) -> float:
        return 1.0 - 1.0 / self.tau


@dataclass(frozen=True)
class Switches:
    sfbm: bool = True
    beim: bool = True
    # Stop-gradient sites on delta_{t-1}.
    detach_reset: bool = False
    detach_feedback: bool = False


@dataclass
class GateParams:
    """
    Gate maps of one layer. Convolutional gates use 'same' geometry; dense
    gates are square. A gate that is switched off has no parameters.
    """

    sfb_weight: Variable | None = None
    sfb_bias: Variable | None = None
    ei_weight: Variable | None = None
    ei_bias: Variable | None = None
    kernel_size: int = 1
    dense: bool = False

    def parameters(self) -> list[Variable]:
        return [p for p in (self.sfb_weight, self.sfb_bias, self.ei_weight, self.ei_bias) if p is not None]

    @property
    def has_sfb(self) -> bool:
        return self.sfb_weight is not None and self.sfb_bias is not None

    @property
    def has_ei(self) -> bool:
        return self.ei_weight is not None and self.ei_bias is not None

    def geometry(self, channels: int) -> Conv2dGeometry:
        return Conv2dGeometry.same(channels, channels, self.kernel_size)


@dataclass
class LifLayerState:
    v: Variable
    delta_prev: Variable
    sfb: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def initial(cls, shape: tuple[int, ...], dtype: np.dtype) -> "LifLayerState":
        return cls(v=constant(np.zeros(shape, dtype=dtype)), delta_prev=constant(np.zeros(shape, dtype=dtype)))


def _gate_map(x: Variable, weight: Variable, bias: Variable, gates: GateParams) -> Variable:
    if gates.dense:
        if x.value.ndim != 2 or x.shape[1] != weight.shape[1]:
            raise ShapeError(f"dense gate expects input [B,{weight.shape[1]}], got {x.shape}")
        return F.linear(x, weight, bias)
    if x.value.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"gate convolution expects input [B,{weight.shape[1]},H,W], got {x.shape}")
    return F.conv2d(x, weight, bias, gates.geometry(weight.shape[0]))


def sfb_gate(delta_prev: Variable, gates: GateParams) -> Variable:
    """Self-feedback gate: sigmoid of the gate map over last step's spikes, in (0, 1)."""
    return F.sigmoid(_gate_map(delta_prev, gates.sfb_weight, gates.sfb_bias, gates))


def ei_gate(v: Variable, gates: GateParams, cfg: SpikeFnConfig) -> Variable:
    """Excitatory/inhibitory gate: sign of the gate map over the membrane, in {-1, +1}."""
    return F.sign_surrogate(_gate_map(v, gates.ei_weight, gates.ei_bias, gates), cfg)


def lif_step(
    state: LifLayerState,
    input_current: Variable,
    params: LifParams,
    gates: GateParams | None,
    switches: Switches,
    reset_mode: ResetMode = "magnitude",
    spike_cfg: SpikeFnConfig | None = None,
    *,
    layer: int | None = None,
    timestep: int | None = None,
) -> tuple[LifLayerState, Variable]:
    if reset_mode not in RESET_MODES:
        raise ConfigError(f"reset_mode must be one of {RESET_MODES}, got {reset_mode!r}")
    if input_current.shape != state.v.shape:
        raise ShapeError(f"input current has shape {input_current.shape}, membrane has {state.v.shape}")
    if switches.sfbm and (gates is None or not gates.has_sfb):
        raise ConfigError("self-feedback gate is switched on but the layer has no SFB parameters")
    if switches.beim and (gates is None or not gates.has_ei):
        raise ConfigError("E/I gate is switched on but the layer has no EI parameters")
    cfg = spike_cfg or SpikeFnConfig(v_th=params.v_th)

    delta_prev = state.delta_prev
    sfb = None
    try:
        if switches.sfbm:
            feedback = F.stop_gradient(delta_prev) if switches.detach_feedback else delta_prev
            sfb = sfb_gate(feedback, gates)
            gated = F.mul(sfb, input_current)
        else:
            gated = input_current

        reset_src = F.stop_gradient(delta_prev) if switches.detach_reset else delta_prev
        reset = F.abs_(reset_src) if reset_mode == "magnitude" else reset_src
        retained = F.mul(F.scale(state.v, params.leak), F.rsub_scalar(1.0, reset))
        v = F.add(retained, gated)
        spikes = F.spike_threshold(v, cfg)
        delta = F.mul(ei_gate(v, gates, cfg), spikes) if switches.beim else spikes
    except NumericError as e:
        where = f" in layer {layer}" if layer is not None else ""
        when = f" at timestep {timestep}" if timestep is not None else ""
        raise NumericError(f"non-finite membrane potential{where}{when}: {e}") from e

    return LifLayerState(v=v, delta_prev=delta, sfb=None if sfb is None else sfb.value), delta
