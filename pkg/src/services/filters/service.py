"""Classical denoising baselines. Both filters replicate edge pixels at the border."""

import logging

import numpy as np
from scipy import ndimage

from src.core.errors import ContractViolation

logger = logging.getLogger(__name__)


def _channels(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim == 2:
        return img[None]
    if img.ndim != 3:
        raise ContractViolation(f"expected a C x H x W image, got shape {img.shape}")
    return img


def median_filter(img: np.ndarray, kernel: int = 3) -> np.ndarray:
    """Per-channel spatial median over a kernel x kernel window."""
    if kernel < 1 or kernel % 2 == 0:
        raise ContractViolation(f"median kernel must be odd and >= 1, got {kernel}")
    x = _channels(img)
    if kernel == 1:
        return np.asarray(img).copy()
    out = ndimage.median_filter(x, size=(1, kernel, kernel), mode="nearest")
    return out.reshape(np.shape(img))


def bilateral_filter(
    img: np.ndarray,
    sigma_spatial: float = 2.0,
    sigma_range: float = 0.1,
    radius: int = 4,
) -> np.ndarray:
    """
    out(p) = sum_q w(p, q) in(q) / sum_q w(p, q) over the (2r+1)^2 window,
    w = exp(-|p - q|^2 / 2 sigma_s^2) * exp(-(in(p) - in(q))^2 / 2 sigma_r^2),
    with range weights taken per channel.
    """
    if sigma_spatial <= 0 or sigma_range <= 0:
        raise ContractViolation(f"bilateral sigmas must be positive, got {sigma_spatial}, {sigma_range}")
    if radius < 1:
        raise ContractViolation(f"bilateral radius must be >= 1, got {radius}")
    x = _channels(img).astype(np.float64)
    _, h, w = x.shape
    padded = np.pad(x, ((0, 0), (radius, radius), (radius, radius)), mode="edge")
    numerator = np.zeros_like(x)
    denominator = np.zeros_like(x)
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            neighbor = padded[:, radius + dy : radius + dy + h, radius + dx : radius + dx + w]
            spatial = np.exp(-(dy * dy + dx * dx) / (2.0 * sigma_spatial ** 2))
            weight = spatial * np.exp(-((neighbor - x) ** 2) / (2.0 * sigma_range ** 2))
            numerator += weight * neighbor
            denominator += weight
    out = (numerator / denominator).astype(np.asarray(img).dtype)
    return out.reshape(np.shape(img))
