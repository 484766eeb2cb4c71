"""PNG I/O: RGB frames as float32 C x H x W in [0,1], label maps as H x W integer ids."""

import logging
import os
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
from PIL import Image

from src.core.errors import ContractViolation

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _open(path: PathLike) -> Image.Image:
    try:
        img = Image.open(path)
        img.load()
        return img
    except (OSError, ValueError) as e:
        raise ContractViolation(f"Cannot read image {path}: {e}") from e


def read_rgb(path: PathLike, size: Optional[Tuple[int, int]] = None) -> np.ndarray:
    img = _open(path).convert("RGB")
    if size is not None and img.size != (size[1], size[0]):
        img = img.resize((size[1], size[0]), Image.Resampling.BILINEAR)
    return (np.asarray(img, dtype=np.float32) / 255.0).transpose(2, 0, 1).copy()


def read_labels(path: PathLike, size: Optional[Tuple[int, int]] = None) -> np.ndarray:
    img = _open(path)
    if img.mode not in ("L", "P", "I", "I;16"):
        raise ContractViolation(f"Label map {path} must be single-channel, got mode {img.mode}")
    if size is not None and img.size != (size[1], size[0]):
        img = img.resize((size[1], size[0]), Image.Resampling.NEAREST)
    return np.asarray(img).astype(np.int64)


def to_uint8(img: np.ndarray) -> np.ndarray:
    if img.ndim != 3 or img.shape[0] != 3:
        raise ContractViolation(f"expected a 3 x H x W image, got shape {img.shape}")
    return np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8).transpose(1, 2, 0)


def _atomic_save(img: Image.Image, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    img.save(tmp, format="PNG")
    os.replace(tmp, path)


def write_rgb(path: PathLike, img: np.ndarray) -> Path:
    path = Path(path)
    _atomic_save(Image.fromarray(to_uint8(img)), path)
    return path


def write_labels(path: PathLike, labels: np.ndarray) -> Path:
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ContractViolation(f"label map must be H x W, got shape {labels.shape}")
    if labels.min(initial=0) < 0 or labels.max(initial=0) > 255:
        raise ContractViolation("label ids must fit in 8 bits")
    path = Path(path)
    _atomic_save(Image.fromarray(labels.astype(np.uint8)), path)
    return path
