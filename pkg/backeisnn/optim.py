"""Adam and the staircase learning-rate schedule."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from decimal import Decimal

import numpy as np

from backeisnn.engine.autograd import Variable
from backeisnn.utils.errors import ConfigError, NumericError, ShapeError


logger = logging.getLogger("backeisnn.optim")


@dataclass(frozen=True)
class LrSchedule:
    base: float = 0.001
    decay: float = 0.1
    period: int = 40

    def __post_init__(self) -> None:
        if not self.base > 0:
            raise ConfigError(f"base learning rate must be > 0, got {self.base}")
        if not 0 < self.decay <= 1:
            raise ConfigError(f"lr decay must be in (0, 1], got {self.decay}")
        if self.period < 1:
            raise ConfigError(f"lr period must be >= 1 epoch, got {self.period}")


def lr_for_epoch(epoch: int, sched: LrSchedule) -> float:
    """``base * decay ** (epoch // period)``, evaluated in decimal so 0.001 * 0.1 is 0.0001."""
    if epoch < 0:
        raise ConfigError(f"epoch must be >= 0, got {epoch}")
    value = Decimal(repr(sched.base)) * Decimal(repr(sched.decay)) ** (epoch // sched.period)
    return float(value)


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params: dict[str, Variable], grads: dict[str, np.ndarray], state: AdamState) -> AdamState:
    """
    One Adam update applied in place to ``params``. Parameters without an
    entry in ``grads`` are left alone, moments included.
    """
    for name, g in grads.items():
        if name not in params:
            raise ConfigError(f"gradient for unknown parameter {name}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name}")

    state.t += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** state.t
    correction2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        theta = p.value
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != theta.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter has {theta.shape}")
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(theta)
            v = np.zeros_like(theta)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * (g * g)
        m_hat = m / correction1
        v_hat = v / correction2
        p.value = (theta - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(theta.dtype, copy=False)
        state.m[name] = m.astype(theta.dtype, copy=False)
        state.v[name] = v.astype(theta.dtype, copy=False)
    return state


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.square(g, dtype=np.float64).sum()) for g in grads.values())))


def clip_grad_norm(grads: dict[str, np.ndarray], max_norm: float) -> tuple[dict[str, np.ndarray], float]:
    """Scale all gradients together so their global L2 norm is at most ``max_norm``."""
    if not max_norm > 0:
        raise ConfigError(f"clip_grad_norm must be > 0, got {max_norm}")
    norm = global_norm(grads)
    if norm <= max_norm:
        return grads, norm
    factor = max_norm / (norm + 1e-12)
    return {name: g * g.dtype.type(factor) for name, g in grads.items()}, norm


class Adam:
    def __init__(
        self,
        params: dict[str, Variable],
        schedule: LrSchedule | None = None,
        clip_norm: float | None = None,
    ) -> None:
        self.params = params
        self.schedule = schedule or LrSchedule()
        self.clip_norm = clip_norm
        self.state = AdamState(lr=self.schedule.base)

    @property
    def lr(self) -> float:
        return self.state.lr

    def set_epoch(self, epoch: int) -> float:
        self.state.lr = lr_for_epoch(epoch, self.schedule)
        return self.state.lr

    def step(self, grads: dict[str, np.ndarray]) -> float:
        """Apply one update; returns the pre-clipping global gradient norm."""
        if self.clip_norm:
            grads, norm = clip_grad_norm(grads, self.clip_norm)
        else:
            norm = global_norm(grads)
        adam_step(self.params, grads, self.state)
        return norm

    def state_dict(self) -> dict:
        return {
            "t": self.state.t,
            "lr": self.state.lr,
            "m": {k: a.copy() for k, a in self.state.m.items()},
            "v": {k: a.copy() for k, a in self.state.v.items()},
        }

    def load_state_dict(self, state: dict) -> None:
        unknown = sorted(set(state["m"]) - set(self.params))
        if unknown:
            raise ConfigError(f"optimizer state names unknown parameters: {unknown}")
        self.state.t = int(state["t"])
        self.state.lr = float(state["lr"])
        self.state.m = {k: np.array(a, copy=True) for k, a in state["m"].items()}
        self.state.v = {k: np.array(a, copy=True) for k, a in state["v"].items()}
