"""Nearest-prototype pixel classifier used as the desk-scale perception engine."""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from src.core.errors import ContractViolation
from src.services.data.schemas.data import CLASS_NAMES

logger = logging.getLogger(__name__)

LUMA = np.array([0.299, 0.587, 0.114])
ORIGINAL_CLASS_BONUS = 0.5


@dataclass(frozen=True)
class Prototypes:
    """Per-class mean of (r, g, b, texture) features; rows of absent classes are nan."""
    means: np.ndarray
    texture_weight: float = 1.0

    @property
    def class_count(self) -> int:
        return int(self.means.shape[0])

    @property
    def fitted(self) -> np.ndarray:
        return ~np.isnan(self.means).any(axis=1)


def pixel_features(img: np.ndarray, texture_weight: float = 1.0) -> np.ndarray:
    """H x W x 4: color plus the 3x3 standard deviation of luminance."""
    if img.ndim != 3 or img.shape[0] != 3:
        raise ContractViolation(f"expected a 3 x H x W image, got shape {img.shape}")
    x = img.astype(np.float64)
    luma = np.tensordot(LUMA, x, axes=1)
    mean = ndimage.uniform_filter(luma, size=3, mode="nearest")
    sq = ndimage.uniform_filter(luma * luma, size=3, mode="nearest")
    std = np.sqrt(np.maximum(sq - mean * mean, 0.0))
    return np.concatenate([x.transpose(1, 2, 0), texture_weight * std[..., None]], axis=-1)


def fit_prototypes(
    frames: Sequence[np.ndarray],
    labels: Sequence[np.ndarray],
    class_count: int = len(CLASS_NAMES),
    texture_weight: float = 1.0,
) -> Prototypes:
    if not frames or len(frames) != len(labels):
        raise ContractViolation("fitting needs one label map per frame and at least one frame")
    sums = np.zeros((class_count, 4))
    counts = np.zeros(class_count, dtype=np.int64)
    for img, lab in zip(frames, labels):
        feats = pixel_features(img, texture_weight).reshape(-1, 4)
        ids = np.asarray(lab).reshape(-1)
        if ids.min() < 0 or ids.max() >= class_count:
            raise ContractViolation(f"label ids must lie in [0, {class_count})")
        np.add.at(sums, ids, feats)
        counts += np.bincount(ids, minlength=class_count)
    means = np.full((class_count, 4), np.nan)
    seen = counts > 0
    means[seen] = sums[seen] / counts[seen, None]
    logger.debug(f"fitted prototypes for {int(seen.sum())}/{class_count} classes")
    return Prototypes(means=means, texture_weight=texture_weight)


def _majority(labels: np.ndarray, class_count: int) -> np.ndarray:
    votes = np.stack(
        [ndimage.uniform_filter((labels == c).astype(np.float64), size=3, mode="nearest") * 9.0 for c in range(class_count)]
    )
    votes[labels, np.arange(labels.shape[0])[:, None], np.arange(labels.shape[1])[None, :]] += ORIGINAL_CLASS_BONUS
    return np.argmax(votes, axis=0)


def toy_segment(img: np.ndarray, prototypes: Prototypes) -> np.ndarray:
    if prototypes is None or not prototypes.fitted.any():
        raise ContractViolation("toy_segment needs fitted prototypes")
    feats = pixel_features(img, prototypes.texture_weight)
    fitted = np.flatnonzero(prototypes.fitted)
    dist = ((feats[..., None, :] - prototypes.means[fitted]) ** 2).sum(axis=-1)
    nearest = fitted[np.argmin(dist, axis=-1)]
    return _majority(nearest, prototypes.class_count).astype(np.int64)
