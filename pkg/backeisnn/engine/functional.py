"""
Differentiable ops over :class:`~backeisnn.engine.autograd.Variable`.

Each op computes its value with a kernel from :mod:`backeisnn.engine.kernels`
and registers the matching backward rule. The two spike nonlinearities use the
rectangular surrogate in the backward pass; in ``relaxed`` mode their forward
pass is the clamped ramp whose exact derivative is that surrogate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from backeisnn.engine import kernels
from backeisnn.engine.autograd import Variable, backward_rule, make_node
from backeisnn.engine.kernels import Conv2dGeometry
from backeisnn.utils.errors import ConfigError, NumericError


SpikeMode = Literal["hard", "relaxed"]


@dataclass(frozen=True)
class SpikeFnConfig:
    v_th: float = 0.5
    window: float = 0.5
    mode: SpikeMode = "hard"

    def __post_init__(self) -> None:
        if not self.v_th > 0:
            raise ConfigError(f"v_th must be > 0, got {self.v_th}")
        if not self.window > 0:
            raise ConfigError(f"surrogate window must be > 0, got {self.window}")
        if self.mode not in ("hard", "relaxed"):
            raise ConfigError(f"spike mode must be 'hard' or 'relaxed', got {self.mode!r}")


def _region(offset: np.ndarray, window: float) -> np.ndarray:
    """-1 below the window, 0 inside, +1 above."""
    region = np.zeros(offset.shape, dtype=np.int8)
    region[offset < -window] = -1
    region[offset > window] = 1
    return region


def _reject_nan(x: np.ndarray, op: str) -> None:
    if np.isnan(x).any():
        raise NumericError(f"{op} received NaN input")


# -- elementwise -------------------------------------------------------------


def add(a: Variable, b: Variable) -> Variable:
    return make_node("add", kernels.add(a.value, b.value), (a, b))


@backward_rule("add")
def _add_backward(node: Variable, grad: np.ndarray):
    return grad, grad


def sub(a: Variable, b: Variable) -> Variable:
    return make_node("sub", kernels.sub(a.value, b.value), (a, b))


@backward_rule("sub")
def _sub_backward(node: Variable, grad: np.ndarray):
    return grad, -grad


def mul(a: Variable, b: Variable) -> Variable:
    """Hadamard product."""
    return make_node("mul", kernels.mul(a.value, b.value), (a, b))


@backward_rule("mul")
def _mul_backward(node: Variable, grad: np.ndarray):
    a, b = node.parents
    return (
        grad * b.value if a.requires_grad else None,
        grad * a.value if b.requires_grad else None,
    )


def scale(a: Variable, factor: float) -> Variable:
    return make_node("scale", kernels.scale(a.value, factor), (a,), factor=factor)


@backward_rule("scale")
def _scale_backward(node: Variable, grad: np.ndarray):
    return (grad * grad.dtype.type(node.saved["factor"]),)


def rsub_scalar(c: float, a: Variable) -> Variable:
    """``c - a``."""
    value = kernels.check_finite(a.value.dtype.type(c) - a.value, "rsub_scalar")
    return make_node("rsub_scalar", value, (a,))


@backward_rule("rsub_scalar")
def _rsub_scalar_backward(node: Variable, grad: np.ndarray):
    return (-grad,)


def sigmoid(a: Variable) -> Variable:
    return make_node("sigmoid", kernels.sigmoid(a.value), (a,))


@backward_rule("sigmoid")
def _sigmoid_backward(node: Variable, grad: np.ndarray):
    s = node.value
    return (grad * s * (1 - s),)


def abs_(a: Variable) -> Variable:
    sign = np.sign(a.value)
    return make_node("abs", np.abs(a.value), (a,), sign=sign, region=sign.astype(np.int8))


@backward_rule("abs")
def _abs_backward(node: Variable, grad: np.ndarray):
    return (grad * node.saved["sign"],)


def sum_(a: Variable) -> Variable:
    return make_node("sum", kernels.sum_(a.value), (a,))


@backward_rule("sum")
def _sum_backward(node: Variable, grad: np.ndarray):
    (a,) = node.parents
    return (np.full(a.value.shape, grad, dtype=a.value.dtype),)


def mean(a: Variable) -> Variable:
    return make_node("mean", kernels.mean(a.value), (a,))


@backward_rule("mean")
def _mean_backward(node: Variable, grad: np.ndarray):
    (a,) = node.parents
    return (np.full(a.value.shape, grad / a.value.size, dtype=a.value.dtype),)


def stop_gradient(a: Variable) -> Variable:
    return Variable(a.value)


# -- shape -------------------------------------------------------------------


def reshape(a: Variable, shape: tuple[int, ...]) -> Variable:
    return make_node("reshape", a.value.reshape(shape), (a,))


@backward_rule("reshape")
def _reshape_backward(node: Variable, grad: np.ndarray):
    (a,) = node.parents
    return (grad.reshape(a.value.shape),)


def flatten(a: Variable) -> Variable:
    """[B, ...] -> [B, N]."""
    return reshape(a, (a.shape[0], -1))


# -- layers ------------------------------------------------------------------


def conv2d(x: Variable, weight: Variable, bias: Variable, geom: Conv2dGeometry) -> Variable:
    value = kernels.conv2d(x.value, weight.value, bias.value, geom)
    return make_node("conv2d", value, (x, weight, bias), geom=geom)


@backward_rule("conv2d")
def _conv2d_backward(node: Variable, grad: np.ndarray):
    x, weight, bias = node.parents
    d_x, d_w, d_b = kernels.conv2d_backward(
        grad, x.value, weight.value, node.saved["geom"], need_input_grad=x.requires_grad
    )
    return d_x, d_w, d_b


def linear(x: Variable, weight: Variable, bias: Variable) -> Variable:
    return make_node("linear", kernels.matmul(x.value, weight.value, bias.value), (x, weight, bias))


@backward_rule("linear")
def _linear_backward(node: Variable, grad: np.ndarray):
    x, weight, _ = node.parents
    d_x = grad @ weight.value if x.requires_grad else None
    return d_x, grad.T @ x.value, grad.sum(axis=0)


def avg_pool2(x: Variable) -> Variable:
    return make_node("avg_pool2", kernels.avg_pool2(x.value), (x,))


@backward_rule("avg_pool2")
def _avg_pool2_backward(node: Variable, grad: np.ndarray):
    return (kernels.avg_pool2_backward(grad),)


def max_pool2(x: Variable) -> Variable:
    value, index = kernels.max_pool2(x.value)
    return make_node("max_pool2", value, (x,), index=index, region=index.astype(np.int8))


@backward_rule("max_pool2")
def _max_pool2_backward(node: Variable, grad: np.ndarray):
    return (kernels.max_pool2_backward(grad, node.saved["index"]),)


# -- spike nonlinearities ----------------------------------------------------


def surrogate_mask(v: np.ndarray, cfg: SpikeFnConfig, centre: float | None = None) -> np.ndarray:
    """Pass-through mask of the rectangular surrogate around ``centre`` (default ``v_th``)."""
    c = cfg.v_th if centre is None else centre
    return np.abs(v - v.dtype.type(c)) <= v.dtype.type(cfg.window)


def spike_threshold(v: Variable, cfg: SpikeFnConfig) -> Variable:
    """
    Hard mode: 1 where ``v >= v_th`` else 0. Relaxed mode: a ramp from 0 to 1
    across ``[v_th - window, v_th + window]``. The backward pass is the
    rectangular window of height ``1 / (2 * window)`` in both modes, which is
    a plain pass-through for the default window of 0.5.
    """
    x = v.value
    _reject_nan(x, "spike_threshold")
    dtype = x.dtype.type
    offset = x - dtype(cfg.v_th)
    width = 2 * cfg.window
    if cfg.mode == "hard":
        out = (x >= dtype(cfg.v_th)).astype(x.dtype)
    else:
        out = np.clip(offset + dtype(cfg.window), dtype(0), dtype(width)) / dtype(width)
    inside = surrogate_mask(x, cfg)
    return make_node(
        "spike_threshold",
        out,
        (v,),
        mask=inside,
        height=1.0 / width,
        region=_region(offset, cfg.window),
    )


@backward_rule("spike_threshold")
def _spike_threshold_backward(node: Variable, grad: np.ndarray):
    return (grad * node.saved["mask"] * grad.dtype.type(node.saved["height"]),)


def sign_surrogate(v: Variable, cfg: SpikeFnConfig) -> Variable:
    """
    Hard mode: +1 where ``v >= 0`` (so sign(0) = +1), -1 elsewhere. Relaxed
    mode: ``clamp(v, -window, window)``. The backward pass passes the gradient
    through where ``|v| <= window``.
    """
    x = v.value
    _reject_nan(x, "sign_surrogate")
    dtype = x.dtype.type
    if cfg.mode == "hard":
        out = np.where(x >= 0, dtype(1), dtype(-1))
    else:
        out = np.clip(x, dtype(-cfg.window), dtype(cfg.window))
    inside = surrogate_mask(x, cfg, centre=0.0)
    return make_node("sign_surrogate", out, (v,), mask=inside, region=_region(x, cfg.window))


@backward_rule("sign_surrogate")
def _sign_surrogate_backward(node: Variable, grad: np.ndarray):
    return (grad * node.saved["mask"],)
