"""
Reconstruction losses and image-quality metrics.

SSIM is evaluated over the valid region only (windows never cross the border),
per channel, and averaged over every valid window center of every channel.
All statistics are computed in float64.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.core.errors import ContractViolation
from src.core.tensor import Tensor, record
from src.services.losses.schemas.losses import LossWeights, SsimConfig

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, Tensor]

PSNR_INFINITE = float("inf")


def _array(value: ArrayLike) -> np.ndarray:
    return value.data if isinstance(value, Tensor) else np.asarray(value)


def _same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise ContractViolation(f"{what} needs identical shapes, got {a.shape} and {b.shape}")


def mse(I: ArrayLike, K: ArrayLike) -> float:
    a, b = _array(I), _array(K)
    _same_shape(a, b, "mse")
    if a.size == 0:
        raise ContractViolation("mse of empty images")
    diff = a.astype(np.float64) - b.astype(np.float64)
    return float(np.mean(diff * diff))


def psnr(I: ArrayLike, K: ArrayLike, max_value: float = 1.0) -> float:
    """10*log10(max^2 / mse); identical images give PSNR_INFINITE."""
    if max_value <= 0:
        raise ContractViolation(f"psnr max_value must be positive, got {max_value}")
    err = mse(I, K)
    return psnr_from_mse(err, max_value)


def psnr_from_mse(err: float, max_value: float = 1.0) -> float:
    if err == 0:
        return PSNR_INFINITE
    return float(10.0 * np.log10(max_value * max_value / err))


# ==================== SSIM ====================

def ssim_window(cfg: SsimConfig) -> np.ndarray:
    """Normalized 1-D window; the 2-D window is its outer product."""
    offsets = np.arange(cfg.size, dtype=np.float64) - cfg.radius
    if cfg.window == "uniform":
        g = np.ones(cfg.size, dtype=np.float64)
    else:
        g = np.exp(-(offsets ** 2) / (2.0 * cfg.sigma ** 2))
    return g / g.sum()


def _filter_valid(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Separable valid-region correlation over the last two axes."""
    rows = sliding_window_view(x, g.size, axis=-1) @ g
    return sliding_window_view(rows, g.size, axis=-2) @ g


def _filter_adjoint(grad: np.ndarray, g: np.ndarray) -> np.ndarray:
    pad = g.size - 1
    padded = np.pad(grad, [(0, 0)] * (grad.ndim - 2) + [(pad, pad), (pad, pad)])
    return _filter_valid(padded, g[::-1])


def _as_planes(a: np.ndarray, cfg: SsimConfig) -> np.ndarray:
    if a.ndim < 2:
        raise ContractViolation(f"SSIM needs images with two spatial axes, got shape {a.shape}")
    h, w = a.shape[-2:]
    if h < cfg.size or w < cfg.size:
        raise ContractViolation(f"image of {h}x{w} is smaller than the {cfg.size}x{cfg.size} SSIM window")
    return a.astype(np.float64).reshape(-1, h, w)


@dataclass
class _SsimTerms:
    ssim_map: np.ndarray
    mu1: np.ndarray
    mu2: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    b1: np.ndarray
    b2: np.ndarray


def _ssim_terms(x: np.ndarray, y: np.ndarray, cfg: SsimConfig, g: np.ndarray) -> _SsimTerms:
    mu1 = _filter_valid(x, g)
    mu2 = _filter_valid(y, g)
    sigma1 = _filter_valid(x * x, g) - mu1 * mu1
    sigma2 = _filter_valid(y * y, g) - mu2 * mu2
    sigma12 = _filter_valid(x * y, g) - mu1 * mu2
    a1 = 2.0 * mu1 * mu2 + cfg.c1
    a2 = 2.0 * sigma12 + cfg.c2
    b1 = mu1 * mu1 + mu2 * mu2 + cfg.c1
    b2 = sigma1 + sigma2 + cfg.c2
    return _SsimTerms(a1 * a2 / (b1 * b2), mu1, mu2, a1, a2, b1, b2)


def ssim_map(I: ArrayLike, K: ArrayLike, cfg: SsimConfig = SsimConfig()) -> np.ndarray:
    """Per-window SSIM values, shape (planes, H - 2N, W - 2N)."""
    a, b = _array(I), _array(K)
    _same_shape(a, b, "ssim")
    x, y = _as_planes(a, cfg), _as_planes(b, cfg)
    return _ssim_terms(x, y, cfg, ssim_window(cfg)).ssim_map


def ssim_mean(I: ArrayLike, K: ArrayLike, cfg: SsimConfig = SsimConfig()) -> float:
    return float(ssim_map(I, K, cfg).mean())


def ssim_with_gradient(I: ArrayLike, K: ArrayLike, cfg: SsimConfig = SsimConfig()) -> Tuple[float, np.ndarray]:
    """Mean SSIM and its gradient with respect to I (float64, shape of I)."""
    a, b = _array(I), _array(K)
    _same_shape(a, b, "ssim")
    g = ssim_window(cfg)
    x, y = _as_planes(a, cfg), _as_planes(b, cfg)
    t = _ssim_terms(x, y, cfg, g)
    s = t.ssim_map
    scale = 1.0 / s.size
    d = t.b1 * t.b2
    grad_mu1 = scale * (2.0 * t.mu2 * (t.a2 - t.a1) / d - 2.0 * t.mu1 * s / t.b1 + 2.0 * t.mu1 * s / t.b2)
    grad_m11 = scale * (-s / t.b2)
    grad_m12 = scale * (2.0 * t.a1 / d)
    grad = _filter_adjoint(grad_mu1, g) + 2.0 * x * _filter_adjoint(grad_m11, g) + y * _filter_adjoint(grad_m12, g)
    return float(s.mean()), grad.reshape(a.shape)


# ==================== TRAINING LOSS ====================

def combined_loss_with_parts(
    pred: Tensor,
    target: ArrayLike,
    weights: LossWeights = LossWeights(),
    cfg: SsimConfig = SsimConfig(),
) -> Tuple[Tensor, Dict[str, float]]:
    """
    lambda_mse * mse + lambda_ssim * (1 - ssim_mean) as a differentiable scalar.

    Also returns the component values ({"mse", "ssim"}) for loss logging.
    """
    p = pred.data
    t = _array(target)
    _same_shape(p, t, "combined_loss")
    diff = p.astype(np.float64) - t.astype(np.float64)
    err = float(np.mean(diff * diff))
    if weights.ssim > 0:
        ssim_value, ssim_grad = ssim_with_gradient(p, t, cfg)
    else:
        ssim_value, ssim_grad = ssim_mean(p, t, cfg), None
    value = weights.mse * err + weights.ssim * (1.0 - ssim_value)
    out = Tensor(np.asarray(value), dtype=pred.dtype)
    out = record(
        "combined_loss",
        (pred,),
        out,
        _combined_loss_backward,
        diff=diff,
        ssim_grad=ssim_grad,
        weights=weights,
        dtype=pred.dtype,
    )
    return out, {"mse": err, "ssim": ssim_value}


def _combined_loss_backward(ctx: Dict[str, Any], grad: np.ndarray):
    w: LossWeights = ctx["weights"]
    diff = ctx["diff"]
    total = w.mse * 2.0 * diff / diff.size
    if ctx["ssim_grad"] is not None:
        total = total - w.ssim * ctx["ssim_grad"]
    return [(grad.item() * total).astype(ctx["dtype"])]


def combined_loss(
    pred: Tensor,
    target: ArrayLike,
    weights: LossWeights = LossWeights(),
    cfg: SsimConfig = SsimConfig(),
) -> Tensor:
    loss, _ = combined_loss_with_parts(pred, target, weights, cfg)
    return loss
