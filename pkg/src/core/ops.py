"""
Layer ops with hand-written backward passes.

Every op takes Tensors in batch x channels x height x width layout, computes in
the input dtype and records itself into the active Graph.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.special import expit

from src.core.errors import ContractViolation
from src.core.tensor import Tensor, as_tensor, record

logger = logging.getLogger(__name__)

PADDING_MODES = ("same", "valid")


def _require_4d(x: Tensor, op: str) -> None:
    if x.data.ndim != 4:
        raise ContractViolation(f"{op} expects a B x C x H x W tensor, got shape {x.shape}")


def conv_output_geometry(size: int, kernel: int, stride: int, padding: str) -> Tuple[int, int, int]:
    """(output extent, pad before, pad after) for one spatial axis."""
    if padding == "same":
        out = -(-size // stride)
        total = max((out - 1) * stride + kernel - size, 0)
        return out, total // 2, total - total // 2
    if padding == "valid":
        out = (size - kernel) // stride + 1
        if out <= 0:
            raise ContractViolation(f"valid convolution of extent {size} with kernel {kernel} is empty")
        return out, 0, 0
    raise ContractViolation(f"padding must be one of {PADDING_MODES}, got {padding!r}")


# ==================== SEPARABLE CONVOLUTION ====================

def conv_separable(
    x: Tensor,
    depthwise: Tensor,
    pointwise: Tensor,
    stride: int = 1,
    padding: str = "same",
    bias: Optional[Tensor] = None,
) -> Tensor:
    """
    Depthwise k x k convolution per input channel followed by a 1x1 pointwise mix.

    Args:
        x: input of shape (B, C, H, W)
        depthwise: kernels of shape (C, k, k)
        pointwise: weights of shape (O, C)
        stride: spatial stride of the depthwise stage
        padding: "same" (zero pad) or "valid"
        bias: optional (O,) added after the pointwise stage
    """
    _require_4d(x, "conv_separable")
    if stride < 1:
        raise ContractViolation(f"stride must be positive, got {stride}")
    batch, channels, height, width = x.shape
    if depthwise.data.ndim != 3 or depthwise.shape[0] != channels or depthwise.shape[1] != depthwise.shape[2]:
        raise ContractViolation(
            f"depthwise kernels {depthwise.shape} do not match {channels} input channels (expected (C, k, k))"
        )
    if pointwise.data.ndim != 2 or pointwise.shape[1] != channels:
        raise ContractViolation(f"pointwise weights {pointwise.shape} do not match {channels} depthwise channels")
    out_channels = pointwise.shape[0]
    if bias is not None and bias.shape != (out_channels,):
        raise ContractViolation(f"bias shape {bias.shape} does not match {out_channels} output channels")

    k = depthwise.shape[1]
    out_h, top, bottom = conv_output_geometry(height, k, stride, padding)
    out_w, left, right = conv_output_geometry(width, k, stride, padding)
    padded = np.pad(x.data, ((0, 0), (0, 0), (top, bottom), (left, right)))

    spread = np.zeros((batch, channels, out_h, out_w), dtype=x.dtype)
    for i in range(k):
        for j in range(k):
            patch = padded[:, :, i:i + stride * (out_h - 1) + 1:stride, j:j + stride * (out_w - 1) + 1:stride]
            spread += patch * depthwise.data[None, :, i, j, None, None]

    flat = spread.reshape(batch, channels, out_h * out_w)
    out = np.matmul(pointwise.data, flat).reshape(batch, out_channels, out_h, out_w)
    if bias is not None:
        out = out + bias.data[None, :, None, None]

    inputs = (x, depthwise, pointwise) + ((bias,) if bias is not None else ())
    return record(
        "conv_separable",
        inputs,
        Tensor(out, dtype=x.dtype),
        _conv_separable_backward,
        padded=padded,
        spread=spread,
        depthwise=depthwise.data,
        pointwise=pointwise.data,
        stride=stride,
        pads=(top, bottom, left, right),
        has_bias=bias is not None,
    )


def _conv_separable_backward(ctx: Dict[str, Any], grad: np.ndarray):
    padded, spread = ctx["padded"], ctx["spread"]
    depthwise, pointwise, stride = ctx["depthwise"], ctx["pointwise"], ctx["stride"]
    top, bottom, left, right = ctx["pads"]
    batch, out_channels, out_h, out_w = grad.shape
    channels = spread.shape[1]
    k = depthwise.shape[1]

    grad_flat = grad.reshape(batch, out_channels, out_h * out_w)
    spread_flat = spread.reshape(batch, channels, out_h * out_w)
    grad_pointwise = np.matmul(grad_flat, spread_flat.transpose(0, 2, 1)).sum(axis=0)
    grad_spread = np.matmul(pointwise.T, grad_flat).reshape(batch, channels, out_h, out_w)

    grad_depthwise = np.zeros_like(depthwise)
    grad_padded = np.zeros_like(padded)
    for i in range(k):
        for j in range(k):
            rows = slice(i, i + stride * (out_h - 1) + 1, stride)
            cols = slice(j, j + stride * (out_w - 1) + 1, stride)
            grad_depthwise[:, i, j] = (padded[:, :, rows, cols] * grad_spread).sum(axis=(0, 2, 3))
            grad_padded[:, :, rows, cols] += grad_spread * depthwise[None, :, i, j, None, None]

    height = padded.shape[2] - top - bottom
    width = padded.shape[3] - left - right
    grad_x = grad_padded[:, :, top:top + height, left:left + width]
    grads = [np.ascontiguousarray(grad_x), grad_depthwise, grad_pointwise]
    if ctx["has_bias"]:
        grads.append(grad.sum(axis=(0, 2, 3)))
    return grads


# ==================== UPSAMPLING ====================

def upsample_nearest(x: Tensor, factor: int = 2) -> Tensor:
    _require_4d(x, "upsample_nearest")
    if factor < 1:
        raise ContractViolation(f"upsample factor must be >= 1, got {factor}")
    out = x.data.repeat(factor, axis=2).repeat(factor, axis=3)
    return record("upsample_nearest", (x,), Tensor(out, dtype=x.dtype), _upsample_backward, factor=factor)


def _upsample_backward(ctx: Dict[str, Any], grad: np.ndarray):
    f = ctx["factor"]
    b, c, h, w = grad.shape
    return [grad.reshape(b, c, h // f, f, w // f, f).sum(axis=(3, 5))]


# ==================== BATCH NORMALIZATION ====================

@dataclass
class BatchNormState:
    gamma: Tensor
    beta: Tensor
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.99
    epsilon: float = 1e-3

    @classmethod
    def create(cls, channels: int, name: str = "", momentum: float = 0.99, epsilon: float = 1e-3) -> "BatchNormState":
        return cls(
            gamma=Tensor(np.ones(channels), requires_grad=True, name=f"{name}.gamma"),
            beta=Tensor(np.zeros(channels), requires_grad=True, name=f"{name}.beta"),
            running_mean=np.zeros(channels, dtype=np.float32),
            running_var=np.ones(channels, dtype=np.float32),
            momentum=momentum,
            epsilon=epsilon,
        )

    @property
    def channels(self) -> int:
        return int(self.gamma.shape[0])


def batch_norm(x: Tensor, state: BatchNormState, mode: str = "train") -> Tensor:
    _require_4d(x, "batch_norm")
    if x.size == 0 or x.shape[0] == 0:
        raise ContractViolation("batch_norm needs a non-empty batch")
    if x.shape[1] != state.channels or state.beta.shape != state.gamma.shape:
        raise ContractViolation(f"batch_norm state has {state.channels} channels, input has {x.shape[1]}")
    axes = (0, 2, 3)
    gamma = state.gamma.data.astype(x.dtype, copy=False)[None, :, None, None]
    beta = state.beta.data.astype(x.dtype, copy=False)[None, :, None, None]

    if mode == "train":
        mean = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        m = state.momentum
        state.running_mean[...] = m * state.running_mean + (1.0 - m) * mean
        state.running_var[...] = m * state.running_var + (1.0 - m) * var
    elif mode == "infer":
        mean = state.running_mean.astype(x.dtype, copy=False)
        var = state.running_var.astype(x.dtype, copy=False)
    else:
        raise ContractViolation(f"batch_norm mode must be 'train' or 'infer', got {mode!r}")

    inv_std = (1.0 / np.sqrt(var + state.epsilon)).astype(x.dtype)[None, :, None, None]
    normalized = (x.data - mean[None, :, None, None]) * inv_std
    out = gamma * normalized + beta
    return record(
        "batch_norm",
        (x, state.gamma, state.beta),
        Tensor(out, dtype=x.dtype),
        _batch_norm_backward,
        normalized=normalized,
        inv_std=inv_std,
        gamma=gamma,
        mode=mode,
    )


def _batch_norm_backward(ctx: Dict[str, Any], grad: np.ndarray):
    normalized, inv_std, gamma = ctx["normalized"], ctx["inv_std"], ctx["gamma"]
    axes = (0, 2, 3)
    grad_gamma = (grad * normalized).sum(axis=axes)
    grad_beta = grad.sum(axis=axes)
    grad_norm = grad * gamma
    if ctx["mode"] == "infer":
        return [grad_norm * inv_std, grad_gamma, grad_beta]
    count = grad.shape[0] * grad.shape[2] * grad.shape[3]
    grad_x = inv_std / count * (
        count * grad_norm
        - grad_norm.sum(axis=axes, keepdims=True)
        - normalized * (grad_norm * normalized).sum(axis=axes, keepdims=True)
    )
    return [grad_x, grad_gamma, grad_beta]


# ==================== ACTIVATIONS ====================

def relu(x: Tensor) -> Tensor:
    out = np.maximum(x.data, 0).astype(x.dtype, copy=False)
    return record("relu", (x,), Tensor(out, dtype=x.dtype), _relu_backward, mask=x.data > 0)


def _relu_backward(ctx: Dict[str, Any], grad: np.ndarray):
    # subgradient 0 at exactly 0
    return [grad * ctx["mask"]]


def sigmoid(x: Tensor) -> Tensor:
    out = expit(x.data).astype(x.dtype, copy=False)
    return record("sigmoid", (x,), Tensor(out, dtype=x.dtype), _sigmoid_backward, out=out)


def _sigmoid_backward(ctx: Dict[str, Any], grad: np.ndarray):
    out = ctx["out"]
    return [grad * out * (1.0 - out)]


# ==================== CHANNEL PLUMBING ====================

def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    _require_4d(a, "concat_channels")
    _require_4d(b, "concat_channels")
    if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise ContractViolation(f"concat_channels needs equal batch and spatial extents, got {a.shape} and {b.shape}")
    dtype = np.result_type(a.dtype, b.dtype)
    out = np.concatenate([a.data, b.data], axis=1)
    return record("concat_channels", (a, b), Tensor(out, dtype=dtype), _concat_backward, split=a.shape[1])


def _concat_backward(ctx: Dict[str, Any], grad: np.ndarray):
    split = ctx["split"]
    return [np.ascontiguousarray(grad[:, :split]), np.ascontiguousarray(grad[:, split:])]


def slice_channels(x: Tensor, start: int, stop: int) -> Tensor:
    _require_4d(x, "slice_channels")
    if not 0 <= start < stop <= x.shape[1]:
        raise ContractViolation(f"channel slice [{start}:{stop}] out of range for {x.shape[1]} channels")
    out = x.data[:, start:stop]
    return record(
        "slice_channels", (x,), Tensor(out, dtype=x.dtype), _slice_backward, start=start, stop=stop, shape=x.shape
    )


def _slice_backward(ctx: Dict[str, Any], grad: np.ndarray):
    full = np.zeros(ctx["shape"], dtype=grad.dtype)
    full[:, ctx["start"]:ctx["stop"]] = grad
    return [full]


def weighted_sum(x: Tensor, weights: Optional[np.ndarray] = None) -> Tensor:
    """Scalar sum(x * weights); weights default to ones."""
    w = np.ones_like(x.data) if weights is None else np.asarray(weights, dtype=x.dtype)
    if w.shape != x.shape:
        raise ContractViolation(f"weights shape {w.shape} does not match {x.shape}")
    out = np.asarray((x.data * w).sum(), dtype=x.dtype)
    return record("weighted_sum", (x,), Tensor(out, dtype=x.dtype), _weighted_sum_backward, weights=w)


def _weighted_sum_backward(ctx: Dict[str, Any], grad: np.ndarray):
    return [ctx["weights"] * grad]


def constant(value: Any, dtype: Optional[np.dtype] = None) -> Tensor:
    """Non-differentiable copy-free wrapper, e.g. for an input image."""
    if isinstance(value, Tensor):
        return Tensor(value.data, dtype=dtype or value.dtype)
    return as_tensor(np.asarray(value), dtype=dtype)
