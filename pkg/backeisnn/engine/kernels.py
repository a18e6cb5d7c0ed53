"""
Dense array kernels on NumPy arrays.

Every kernel is a pure function: it never mutates its inputs, validates shapes
up front (no implicit broadcasting except scalars) and refuses to return
non-finite values. Convolution goes through im2col + a single matrix product;
the backward kernels used by the autograd engine live next to their forward
counterparts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from backeisnn.utils.errors import ConfigError, NumericError, ShapeError


DTYPES: dict[str, type[np.floating]] = {
    "float32": np.float32,
    "float64": np.float64,
}


def resolve_dtype(name: str | np.dtype | type) -> np.dtype:
    if isinstance(name, str):
        try:
            return np.dtype(DTYPES[name.strip().lower()])
        except KeyError:
            raise ConfigError(f"Unsupported dtype {name!r}; expected one of {sorted(DTYPES)}") from None
    dtype = np.dtype(name)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ConfigError(f"Unsupported dtype {dtype}; expected float32 or float64")
    return dtype


def check_finite(array: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(array)):
        raise NumericError(f"{op} produced non-finite values")
    return array


@dataclass(frozen=True)
class Conv2dGeometry:
    in_channels: int
    out_channels: int
    kernel_size: int
    stride: int = 1
    padding: int = 0

    def __post_init__(self) -> None:
        for field in ("in_channels", "out_channels", "kernel_size", "stride", "padding"):
            value = getattr(self, field)
            if not isinstance(value, (int, np.integer)) or value < 0:
                raise ShapeError(f"Conv2dGeometry.{field} must be a non-negative integer, got {value!r}")
        if self.kernel_size < 1 or self.stride < 1:
            raise ShapeError("Conv2dGeometry kernel_size and stride must be >= 1")

    @classmethod
    def same(cls, in_channels: int, out_channels: int, kernel_size: int) -> "Conv2dGeometry":
        if kernel_size % 2 == 0:
            raise ShapeError(f"'same' geometry needs an odd kernel, got {kernel_size}")
        return cls(in_channels, out_channels, kernel_size, stride=1, padding=(kernel_size - 1) // 2)

    @property
    def is_same(self) -> bool:
        return self.stride == 1 and self.kernel_size % 2 == 1 and self.padding == (self.kernel_size - 1) // 2

    def output_extent(self, extent: int) -> int:
        span = extent + 2 * self.padding - self.kernel_size
        if span < 0:
            raise ShapeError(
                f"conv2d kernel {self.kernel_size} with padding {self.padding} "
                f"does not fit spatial extent {extent}"
            )
        return span // self.stride + 1

    def weight_shape(self) -> tuple[int, int, int, int]:
        return (self.out_channels, self.in_channels, self.kernel_size, self.kernel_size)


def _require_ndim(x: np.ndarray, ndim: int, op: str, layout: str) -> None:
    if x.ndim != ndim:
        raise ShapeError(f"{op} expects a {ndim}-D input {layout}, got shape {tuple(x.shape)}")


def _check_conv_shapes(x: np.ndarray, weight: np.ndarray, bias: np.ndarray, geom: Conv2dGeometry) -> None:
    _require_ndim(x, 4, "conv2d", "[B,Cin,H,W]")
    if x.shape[1] != geom.in_channels:
        raise ShapeError(
            f"conv2d in_channels mismatch: input has {x.shape[1]} channels, geometry expects {geom.in_channels}"
        )
    expected = geom.weight_shape()
    if weight.shape != expected:
        names = ("out_channels", "in_channels", "kernel height", "kernel width")
        for name, got, want in zip(names, weight.shape, expected):
            if got != want:
                raise ShapeError(f"conv2d weight {name} is {got}, geometry expects {want}")
        raise ShapeError(f"conv2d weight shape {tuple(weight.shape)} != {expected}")
    if bias.shape != (geom.out_channels,):
        raise ShapeError(f"conv2d bias has shape {tuple(bias.shape)}, expected ({geom.out_channels},)")


def im2col(x: np.ndarray, kernel: int, stride: int = 1, pad: int = 0) -> np.ndarray:
    """[B,C,H,W] -> [B*OH*OW, C*K*K], columns ordered (C, ky, kx)."""
    n, c, h, w = x.shape
    out_h = (h + 2 * pad - kernel) // stride + 1
    out_w = (w + 2 * pad - kernel) // stride + 1
    img = np.pad(x, [(0, 0), (0, 0), (pad, pad), (pad, pad)], mode="constant") if pad else x
    col = np.empty((n, c, kernel, kernel, out_h, out_w), dtype=x.dtype)
    for y in range(kernel):
        y_max = y + stride * out_h
        for xk in range(kernel):
            x_max = xk + stride * out_w
            col[:, :, y, xk, :, :] = img[:, :, y:y_max:stride, xk:x_max:stride]
    return col.transpose(0, 4, 5, 1, 2, 3).reshape(n * out_h * out_w, -1)


def col2im(cols: np.ndarray, x_shape: tuple[int, ...], kernel: int, stride: int = 1, pad: int = 0) -> np.ndarray:
    """Adjoint of :func:`im2col`: overlapping patches are summed."""
    n, c, h, w = x_shape
    out_h = (h + 2 * pad - kernel) // stride + 1
    out_w = (w + 2 * pad - kernel) // stride + 1
    col = cols.reshape(n, out_h, out_w, c, kernel, kernel).transpose(0, 3, 4, 5, 1, 2)
    img = np.zeros((n, c, h + 2 * pad + stride - 1, w + 2 * pad + stride - 1), dtype=cols.dtype)
    for y in range(kernel):
        y_max = y + stride * out_h
        for xk in range(kernel):
            x_max = xk + stride * out_w
            img[:, :, y:y_max:stride, xk:x_max:stride] += col[:, :, y, xk, :, :]
    return img[:, :, pad:pad + h, pad:pad + w]


def conv2d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray, geom: Conv2dGeometry) -> np.ndarray:
    """Cross-correlation of ``x`` [B,Cin,H,W] with ``weight`` [Cout,Cin,K,K] plus ``bias``."""
    _check_conv_shapes(x, weight, bias, geom)
    n, _, h, w = x.shape
    out_h = geom.output_extent(h)
    out_w = geom.output_extent(w)
    cols = im2col(x, geom.kernel_size, geom.stride, geom.padding)
    out = cols @ weight.reshape(geom.out_channels, -1).T + bias
    out = np.ascontiguousarray(out.reshape(n, out_h, out_w, geom.out_channels).transpose(0, 3, 1, 2))
    return check_finite(out, "conv2d")


def conv2d_backward(
    grad_out: np.ndarray,
    x: np.ndarray,
    weight: np.ndarray,
    geom: Conv2dGeometry,
    need_input_grad: bool = True,
) -> tuple[np.ndarray | None, np.ndarray, np.ndarray]:
    """Gradients of :func:`conv2d` w.r.t. input, weight and bias."""
    g2d = grad_out.transpose(0, 2, 3, 1).reshape(-1, geom.out_channels)
    cols = im2col(x, geom.kernel_size, geom.stride, geom.padding)
    d_weight = (g2d.T @ cols).reshape(weight.shape)
    d_bias = g2d.sum(axis=0)
    d_x = None
    if need_input_grad:
        d_cols = g2d @ weight.reshape(geom.out_channels, -1)
        d_x = col2im(d_cols, x.shape, geom.kernel_size, geom.stride, geom.padding)
    return d_x, d_weight, d_bias


def _pool_view(x: np.ndarray, op: str) -> np.ndarray:
    _require_ndim(x, 4, op, "[B,C,H,W]")
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"{op} needs even spatial extents, got {h}x{w}")
    return x.reshape(n, c, h // 2, 2, w // 2, 2)


def avg_pool2(x: np.ndarray) -> np.ndarray:
    """Mean of each non-overlapping 2x2 window."""
    v = _pool_view(x, "avg_pool2")
    out = (v[:, :, :, 0, :, 0] + v[:, :, :, 0, :, 1] + v[:, :, :, 1, :, 0] + v[:, :, :, 1, :, 1]) * 0.25
    return check_finite(out, "avg_pool2")


def avg_pool2_backward(grad_out: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(grad_out, 2, axis=2), 2, axis=3) * 0.25


def max_pool2(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Max of each 2x2 window; also returns the winning window slot (first max on ties)."""
    v = _pool_view(x, "max_pool2")
    n, c, h2, _, w2, _ = v.shape
    windows = v.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h2, w2, 4)
    index = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, index[..., None], axis=-1)[..., 0]
    return check_finite(out, "max_pool2"), index


def max_pool2_backward(grad_out: np.ndarray, index: np.ndarray) -> np.ndarray:
    n, c, h2, w2 = grad_out.shape
    windows = np.zeros((n, c, h2, w2, 4), dtype=grad_out.dtype)
    np.put_along_axis(windows, index[..., None], grad_out[..., None], axis=-1)
    return windows.reshape(n, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, 2 * h2, 2 * w2)


def matmul(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Affine map ``x @ weight.T + bias`` for ``x`` [B,N], ``weight`` [M,N]."""
    _require_ndim(x, 2, "matmul", "[B,N]")
    if weight.ndim != 2 or weight.shape[1] != x.shape[1]:
        raise ShapeError(
            f"matmul inner dimension mismatch: input has {x.shape[1]} features, "
            f"weight has shape {tuple(weight.shape)}"
        )
    if bias.shape != (weight.shape[0],):
        raise ShapeError(f"matmul bias has shape {tuple(bias.shape)}, expected ({weight.shape[0]},)")
    return check_finite(x @ weight.T + bias, "matmul")


def _require_same_shape(a: np.ndarray, b: np.ndarray | float, op: str) -> None:
    if np.ndim(a) == 0 or np.ndim(b) == 0:
        return
    if np.shape(a) != np.shape(b):
        raise ShapeError(f"{op} operands differ in shape: {np.shape(a)} vs {np.shape(b)}")


def add(a: np.ndarray, b: np.ndarray | float) -> np.ndarray:
    _require_same_shape(a, b, "add")
    return check_finite(np.add(a, b), "add")


def sub(a: np.ndarray, b: np.ndarray | float) -> np.ndarray:
    _require_same_shape(a, b, "sub")
    return check_finite(np.subtract(a, b), "sub")


def mul(a: np.ndarray, b: np.ndarray | float) -> np.ndarray:
    _require_same_shape(a, b, "mul")
    return check_finite(np.multiply(a, b), "mul")


def scale(a: np.ndarray, factor: float) -> np.ndarray:
    return check_finite(np.multiply(a, a.dtype.type(factor)), "scale")


def sigmoid(a: np.ndarray) -> np.ndarray:
    return check_finite(expit(a), "sigmoid")


def clamp(a: np.ndarray, low: float, high: float) -> np.ndarray:
    if low > high:
        raise ConfigError(f"clamp bounds are inverted: {low} > {high}")
    return check_finite(np.clip(a, a.dtype.type(low), a.dtype.type(high)), "clamp")


def sum_(a: np.ndarray, axis: int | tuple[int, ...] | None = None) -> np.ndarray:
    return check_finite(np.sum(a, axis=axis), "sum")


def mean(a: np.ndarray, axis: int | tuple[int, ...] | None = None) -> np.ndarray:
    return check_finite(np.mean(a, axis=axis), "mean")
