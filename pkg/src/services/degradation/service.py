"""
Frame degradation: statistical noise models, occluding artifacts and the
five-level schedule that combines them.

Every function is a pure function of (image, parameters, seed). Images are
float32 C x H x W arrays in [0, 1]; outputs are new arrays.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import ContractViolation
from src.services.degradation.schemas.degradation import (
    LEVEL_TABLE,
    NOISE_KINDS,
    ArtifactPlacement,
    DegradationSettings,
    DegradationSpec,
)
from src.utils.seeding import derive_seed

logger = logging.getLogger(__name__)

BLANK_SIDE_RANGE = (0.04, 0.12)
LINE_COUNT_RANGE = (1, 3)


def _check_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3:
        raise ContractViolation(f"expected a C x H x W image, got shape {img.shape}")
    return img.astype(np.float32, copy=False)


def _finish(out: np.ndarray) -> np.ndarray:
    return np.clip(out, 0.0, 1.0).astype(np.float32)


# ==================== STATISTICAL NOISE ====================

def gaussian_noise(img: np.ndarray, variance: float, seed: int) -> np.ndarray:
    img = _check_image(img)
    if variance < 0:
        raise ContractViolation(f"gaussian variance must be >= 0, got {variance}")
    if variance == 0:
        return img.copy()
    rng = np.random.default_rng(seed)
    return _finish(img + rng.normal(0.0, np.sqrt(variance), size=img.shape))


def speckle_noise(img: np.ndarray, variance: float, seed: int) -> np.ndarray:
    """Multiplicative noise g(x) = x + n*x."""
    img = _check_image(img)
    if variance < 0:
        raise ContractViolation(f"speckle variance must be >= 0, got {variance}")
    if variance == 0:
        return img.copy()
    rng = np.random.default_rng(seed)
    n = rng.normal(0.0, np.sqrt(variance), size=img.shape)
    return _finish(img + n * img)


def salt_pepper(img: np.ndarray, amount: float, seed: int) -> np.ndarray:
    """
    Replace round(amount * H * W) pixel positions, chosen without replacement
    and shared by all channels, with 0.0 or 1.0 on a fair coin.
    """
    img = _check_image(img)
    if not 0.0 <= amount <= 1.0:
        raise ContractViolation(f"salt-and-pepper amount must lie in [0, 1], got {amount}")
    out = img.copy()
    _, h, w = img.shape
    count = int(round(amount * h * w))
    if count == 0:
        return out
    rng = np.random.default_rng(seed)
    positions = rng.choice(h * w, size=count, replace=False)
    salt = rng.random(count) < 0.5
    rows, cols = np.divmod(positions, w)
    out[:, rows, cols] = np.where(salt, 1.0, 0.0).astype(np.float32)
    return out


def poisson_noise(img: np.ndarray, peak: float = 255.0, seed: int = 0) -> np.ndarray:
    img = _check_image(img)
    if peak <= 0:
        raise ContractViolation(f"poisson peak must be positive, got {peak}")
    rng = np.random.default_rng(seed)
    counts = rng.poisson(np.clip(img, 0.0, 1.0).astype(np.float64) * peak)
    return _finish(counts / peak)


# ==================== ARTIFACTS ====================

def _blank_region(rng: np.random.Generator, h: int, w: int, fill: float) -> ArtifactPlacement:
    height = min(max(int(round(rng.uniform(*BLANK_SIDE_RANGE) * h)), 1), h)
    width = min(max(int(round(rng.uniform(*BLANK_SIDE_RANGE) * w)), 1), w)
    top = int(rng.integers(0, h - height + 1))
    left = int(rng.integers(0, w - width + 1))
    return ArtifactPlacement("blank_region", top, left, height, width, fill=fill)


def _line_group(rng: np.random.Generator, h: int, w: int, fill: float) -> ArtifactPlacement:
    lines = int(rng.integers(LINE_COUNT_RANGE[0], LINE_COUNT_RANGE[1] + 1))
    if rng.random() < 0.5:
        thickness = min(lines, h)
        top = int(rng.integers(0, h - thickness + 1))
        return ArtifactPlacement("line_group", top, 0, thickness, w, fill, "horizontal", thickness)
    thickness = min(lines, w)
    left = int(rng.integers(0, w - thickness + 1))
    return ArtifactPlacement("line_group", 0, left, h, thickness, fill, "vertical", thickness)


def add_artifacts(
    img: np.ndarray,
    count: int,
    seed: int,
    fill: float = 0.0,
) -> Tuple[np.ndarray, List[ArtifactPlacement]]:
    """Blank rectangles and full-span line groups, one fair coin per artifact."""
    img = _check_image(img)
    if count < 0:
        raise ContractViolation(f"artifact count must be >= 0, got {count}")
    out = img.copy()
    _, h, w = img.shape
    rng = np.random.default_rng(seed)
    placements: List[ArtifactPlacement] = []
    for _ in range(count):
        make = _blank_region if rng.random() < 0.5 else _line_group
        placement = make(rng, h, w, fill)
        out[(slice(None),) + placement.window] = fill
        placements.append(placement)
    return out, placements


# ==================== LEVEL SCHEDULE ====================

def _choose_noises(level: int, seed: int, settings: DegradationSettings) -> Tuple[str, ...]:
    if level == 0:
        return ()
    # drawn from the frame seed alone so one seed picks the same noise at every level
    rng = np.random.default_rng(derive_seed(seed, "noise-kind"))
    if not settings.stack_noises:
        return (NOISE_KINDS[int(rng.integers(len(NOISE_KINDS)))],)
    chosen = tuple(kind for kind in NOISE_KINDS if rng.random() < settings.stack_probability)
    return chosen or (NOISE_KINDS[int(rng.integers(len(NOISE_KINDS)))],)


def expand_level(
    level: int,
    seed: int,
    settings: Optional[DegradationSettings] = None,
    noise: bool = True,
) -> DegradationSpec:
    """The concrete parameters for one level; also fixes the noise kinds and artifact count for `seed`."""
    if level not in LEVEL_TABLE:
        raise ContractViolation(f"noise level must be one of {sorted(LEVEL_TABLE)}, got {level}")
    settings = settings or DegradationSettings()
    amount, table_variance, (low, high) = LEVEL_TABLE[level]
    variance = table_variance * settings.variance_scale
    count = 0
    if level > 0:
        count = int(np.random.default_rng(derive_seed(seed, "artifact-count")).integers(low, high + 1))
    return DegradationSpec(
        level=level,
        salt_pepper_amount=amount,
        table_variance=table_variance,
        gaussian_variance=variance,
        speckle_variance=variance,
        poisson_enabled=level > 0,
        artifact_count_range=(low, high),
        rng_seed=seed,
        noise_kinds=_choose_noises(level, seed, settings) if noise else (),
        artifact_count=count,
        poisson_peak=settings.poisson_peak,
    )


def apply_noise(img: np.ndarray, spec: DegradationSpec) -> np.ndarray:
    out = img
    for kind in spec.noise_kinds:
        noise_seed = derive_seed(spec.rng_seed, "noise", kind)
        if kind == "gaussian":
            out = gaussian_noise(out, spec.gaussian_variance, noise_seed)
        elif kind == "speckle":
            out = speckle_noise(out, spec.speckle_variance, noise_seed)
        elif kind == "salt_pepper":
            out = salt_pepper(out, spec.salt_pepper_amount, noise_seed)
        elif kind == "poisson":
            out = poisson_noise(out, spec.poisson_peak, noise_seed)
        else:
            raise ContractViolation(f"unknown noise kind {kind!r}")
    return out


def degrade_with_spec(
    img: np.ndarray,
    spec: DegradationSpec,
    fill: float = 0.0,
) -> Tuple[np.ndarray, List[ArtifactPlacement]]:
    img = _check_image(img)
    if spec.level == 0:
        return img.copy(), []
    noisy = apply_noise(img, spec)
    return add_artifacts(noisy, spec.artifact_count, derive_seed(spec.rng_seed, "artifacts"), fill)


def degrade_at_level(
    img: np.ndarray,
    level: int,
    seed: int,
    settings: Optional[DegradationSettings] = None,
) -> Tuple[np.ndarray, DegradationSpec, List[ArtifactPlacement]]:
    """Statistical noise first, then artifacts; level 0 is the identity."""
    settings = settings or DegradationSettings()
    spec = expand_level(level, seed, settings)
    out, placements = degrade_with_spec(img, spec, settings.artifact_fill)
    logger.debug(f"level {level} seed {seed}: noises={spec.noise_kinds} artifacts={len(placements)}")
    return out, spec, placements


def degrade_artifacts_only(
    img: np.ndarray,
    level: int,
    seed: int,
    settings: Optional[DegradationSettings] = None,
) -> Tuple[np.ndarray, DegradationSpec, List[ArtifactPlacement]]:
    """The level's artifacts without any statistical noise, for occlusion studies."""
    settings = settings or DegradationSettings()
    spec = expand_level(level, seed, settings, noise=False)
    out, placements = degrade_with_spec(img, spec, settings.artifact_fill)
    return out, spec, placements


def format_record(frame_name: str, spec: DegradationSpec, placements: Sequence[ArtifactPlacement]) -> str:
    """One tab-separated sidecar line: frame, level, seed, noise kinds, parameters, placements."""
    params = ",".join(f"{k}={v}" for k, v in spec.parameters().items())
    return "\t".join(
        [
            frame_name,
            str(spec.level),
            str(spec.rng_seed),
            "+".join(spec.noise_kinds) or "none",
            params,
            ";".join(p.describe() for p in placements) or "-",
        ]
    )
