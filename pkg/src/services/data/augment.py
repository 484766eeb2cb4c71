"""
Paired augmentation: one sampled transform set applied to every member of a
SamplePair. Geometric warps use bilinear sampling for images and nearest
sampling for label maps; photometric jitter runs in HSV, then gamma.
"""

import dataclasses
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage
from skimage.color import hsv2rgb, rgb2hsv

from src.core.errors import ContractViolation
from src.services.data.schemas.data import AugmentConfig, SamplePair

logger = logging.getLogger(__name__)

MIN_CROP_PIXELS = 2


@dataclass(frozen=True)
class GeometricTransform:
    """Output pixel (y, x) samples input at center_in + matrix @ ((y, x) - center_out)."""
    matrix: np.ndarray
    center_in: np.ndarray
    center_out: np.ndarray

    @property
    def is_identity(self) -> bool:
        return np.array_equal(self.matrix, np.eye(2)) and np.array_equal(self.center_in, self.center_out)

    def warp(self, img: np.ndarray, order: int) -> np.ndarray:
        h, w = img.shape[-2:]
        ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
        offsets = np.stack([ys.ravel(), xs.ravel()]) - self.center_out[:, None]
        coords = (self.matrix @ offsets + self.center_in[:, None]).reshape(2, h, w)
        if img.ndim == 2:
            return ndimage.map_coordinates(img, coords, order=order, mode="nearest")
        return np.stack([ndimage.map_coordinates(c, coords, order=order, mode="nearest") for c in img])


@dataclass(frozen=True)
class PhotometricTransform:
    hue_shift: float = 0.0
    saturation_scale: float = 1.0
    value_scale: float = 1.0
    gamma: float = 1.0

    @property
    def is_identity(self) -> bool:
        return self.hue_shift == 0.0 and self.saturation_scale == 1.0 and self.value_scale == 1.0 and self.gamma == 1.0

    def apply(self, img: np.ndarray) -> np.ndarray:
        out = img
        if (self.hue_shift, self.saturation_scale, self.value_scale) != (0.0, 1.0, 1.0):
            hsv = rgb2hsv(np.clip(out, 0.0, 1.0).transpose(1, 2, 0))
            hsv[..., 0] = np.mod(hsv[..., 0] + self.hue_shift, 1.0)
            hsv[..., 1] = np.clip(hsv[..., 1] * self.saturation_scale, 0.0, 1.0)
            hsv[..., 2] = np.clip(hsv[..., 2] * self.value_scale, 0.0, 1.0)
            out = hsv2rgb(hsv).transpose(2, 0, 1)
        if self.gamma != 1.0:
            out = np.power(np.clip(out, 0.0, 1.0), self.gamma)
        return np.clip(out, 0.0, 1.0).astype(np.float32)


def _uniform(rng: np.random.Generator, bounds) -> float:
    low, high = bounds
    value = rng.uniform(low, high)
    return float(low) if low == high else float(value)


def sample_geometric(cfg: AugmentConfig, rng: np.random.Generator, h: int, w: int) -> GeometricTransform:
    center = np.array([(h - 1) / 2.0, (w - 1) / 2.0])
    for _ in range(cfg.max_retries):
        crop = _uniform(rng, cfg.crop_fraction) if rng.random() < cfg.p_crop else 1.0
        angle = _uniform(rng, cfg.rotation_degrees) if rng.random() < cfg.p_rotate else 0.0
        zoom = _uniform(rng, cfg.zoom) if rng.random() < cfg.p_zoom else 1.0
        crop_h, crop_w = crop * h, crop * w
        if crop_h < MIN_CROP_PIXELS or crop_w < MIN_CROP_PIXELS:
            logger.debug(f"rejected degenerate crop {crop_h:.1f}x{crop_w:.1f}")
            continue
        top = rng.uniform(0.0, h - crop_h) if crop < 1.0 else 0.0
        left = rng.uniform(0.0, w - crop_w) if crop < 1.0 else 0.0
        center_in = np.array([top + (crop_h - 1) / 2.0, left + (crop_w - 1) / 2.0]) if crop < 1.0 else center
        theta = np.deg2rad(angle)
        rotation = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        matrix = rotation * (crop / zoom) if angle != 0.0 else np.eye(2) * (crop / zoom)
        return GeometricTransform(matrix=matrix, center_in=center_in, center_out=center)
    raise ContractViolation(f"no valid crop after {cfg.max_retries} attempts")


def sample_photometric(cfg: AugmentConfig, rng: np.random.Generator) -> PhotometricTransform:
    hsv = rng.random() < cfg.p_hsv
    hue = _uniform(rng, cfg.hue_shift)
    sat = _uniform(rng, cfg.saturation_scale)
    val = _uniform(rng, cfg.value_scale)
    use_gamma = rng.random() < cfg.p_gamma
    gamma = _uniform(rng, cfg.gamma)
    if not hsv:
        hue, sat, val = 0.0, 1.0, 1.0
    return PhotometricTransform(hue, sat, val, gamma if use_gamma else 1.0)


def augment_pair(pair: SamplePair, cfg: AugmentConfig, seed: int) -> SamplePair:
    rng = np.random.default_rng(seed)
    h, w = pair.clean.shape[-2:]
    geometric = sample_geometric(cfg, rng, h, w)
    photometric = sample_photometric(cfg, rng)
    if geometric.is_identity and photometric.is_identity:
        return pair

    def image(img: Optional[np.ndarray]) -> Optional[np.ndarray]:
        if img is None:
            return None
        out = img if geometric.is_identity else np.clip(geometric.warp(img, order=1), 0.0, 1.0)
        return photometric.apply(out) if not photometric.is_identity else out.astype(np.float32)

    labels = pair.labels
    if labels is not None and not geometric.is_identity:
        labels = geometric.warp(labels, order=0).astype(labels.dtype)

    return dataclasses.replace(
        pair,
        degraded=image(pair.degraded),
        previous=image(pair.previous),
        clean=image(pair.clean),
        labels=labels,
        placements=pair.placements if geometric.is_identity else (),
    )
