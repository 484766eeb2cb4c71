"""
Procedural driving scenes with exact label maps.

Each sequence has a fixed layout (horizon, road trapezoid, textures) and
sprites moving at constant integer pixel velocities. Lane dashes scroll one
row per frame and a global illumination multiplier drifts from day to dusk.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from src.core.errors import ContractViolation
from src.services.data.schemas.data import (
    BACKGROUND,
    LANE,
    PEDESTRIAN,
    ROAD,
    SKY,
    VEHICLE,
    FrameSequence,
    MotionConfig,
)

logger = logging.getLogger(__name__)

SKY_TOP = np.array([0.30, 0.50, 0.90])
SKY_HORIZON = np.array([0.70, 0.82, 0.95])
ROAD_COLOR = np.array([0.38, 0.38, 0.40])
LANE_COLOR = np.array([0.95, 0.85, 0.20])
BACKGROUND_COLOR = np.array([0.25, 0.48, 0.22])
VEHICLE_COLOR = np.array([0.10, 0.20, 0.80])
PEDESTRIAN_COLOR = np.array([0.85, 0.20, 0.75])

DASH_PERIOD = 8
LINE_WIDTH = 2


@dataclass
class Sprite:
    class_id: int
    color: np.ndarray
    top: int
    left: int
    height: int
    width: int
    velocity: Tuple[int, int]  # (dx, dy) px per frame

    def position(self, t: int) -> Tuple[int, int]:
        return self.top + t * self.velocity[1], self.left + t * self.velocity[0]


def _size(size: Union[int, Tuple[int, int]]) -> Tuple[int, int]:
    h, w = (size, size) if isinstance(size, int) else size
    if h <= 0 or w <= 0 or h % 8 or w % 8:
        raise ContractViolation(f"synthetic frame size must be a positive multiple of 8, got {h}x{w}")
    return h, w


def _start_range(extent: int, sprite: int, speed: int, steps: int, low: int = 0) -> Optional[Tuple[int, int]]:
    """Start positions keeping the sprite inside [0, extent) for every frame."""
    travel = speed * steps
    first = max(low, -travel)
    last = extent - sprite - max(0, travel)
    return (first, last) if first <= last else None


def _place(rng, class_id, color, h, w, horizon, frame_count, motion, size_frac) -> Sprite:
    height = max(int(round(h * size_frac[0])), 2)
    width = max(int(round(w * size_frac[1])), 2)
    if motion.velocity is not None:
        velocity = (int(motion.velocity[0]), int(motion.velocity[1]))
    else:
        s = motion.max_speed
        velocity = (int(rng.integers(-s, s + 1)), int(rng.integers(-s, s + 1)) // 2)
    steps = frame_count - 1

    xs = _start_range(w, width, velocity[0], steps)
    if xs is None:
        velocity, xs = (0, velocity[1]), (0, w - width)
    ys = _start_range(h, height, velocity[1], steps, low=min(horizon, h - height))
    if ys is None:
        ys = _start_range(h, height, velocity[1], steps)
    if ys is None:
        velocity, ys = (velocity[0], 0), (0, h - height)
    top = int(rng.integers(ys[0], ys[1] + 1))
    left = int(rng.integers(xs[0], xs[1] + 1))
    return Sprite(class_id, color, top, left, height, width, velocity)


def _layout(rng: np.random.Generator, h: int, w: int):
    horizon = int(round(h * rng.uniform(0.35, 0.45)))
    center = w / 2.0 + rng.uniform(-0.08, 0.08) * w
    top_half = w * rng.uniform(0.04, 0.07)
    bottom_half = w * rng.uniform(0.40, 0.48)
    rows = np.arange(h, dtype=np.float64)
    t = np.clip((rows - horizon) / max(h - 1 - horizon, 1), 0.0, 1.0)
    half = top_half + (bottom_half - top_half) * t
    return horizon, center, half


def _static_scene(rng: np.random.Generator, h: int, w: int):
    horizon, center, half = _layout(rng, h, w)
    img = np.zeros((h, w, 3))
    labels = np.full((h, w), BACKGROUND, dtype=np.int64)

    sky_t = (np.arange(h) / max(horizon - 1, 1))[:, None]
    sky = SKY_TOP[None, :] * (1 - sky_t) + SKY_HORIZON[None, :] * sky_t
    img[:horizon] = sky[:horizon, None, :]
    labels[:horizon] = SKY

    img[horizon:] = BACKGROUND_COLOR + rng.normal(0.0, 0.05, size=(h - horizon, w, 1))
    cols = np.arange(w)[None, :]
    rows = np.arange(h)[:, None]
    road = (rows >= horizon) & (np.abs(cols + 0.5 - center) <= half[:, None])
    img[road] = ROAD_COLOR + rng.normal(0.0, 0.03, size=(int(road.sum()), 1))
    labels[road] = ROAD

    left_edge = (np.abs(cols + 0.5 - (center - half[:, None])) <= LINE_WIDTH / 2.0) & (rows >= horizon)
    right_edge = (np.abs(cols + 0.5 - (center + half[:, None])) <= LINE_WIDTH / 2.0) & (rows >= horizon)
    center_line = (np.abs(cols + 0.5 - center) <= LINE_WIDTH / 2.0) & (rows >= horizon)
    return img, labels, left_edge | right_edge, center_line


def generate_synthetic_sequence(
    seed: int,
    frame_count: int,
    size: Union[int, Tuple[int, int]] = 64,
    motion: Optional[MotionConfig] = None,
    source: Optional[str] = None,
) -> FrameSequence:
    h, w = _size(size)
    if frame_count < 2:
        raise ContractViolation(f"a synthetic sequence needs at least 2 frames, got {frame_count}")
    motion = motion or MotionConfig()
    rng = np.random.default_rng(seed)

    base, base_labels, edges, center_line = _static_scene(rng, h, w)
    horizon = int(np.argmax(base_labels[:, 0] != SKY))
    sprites: List[Sprite] = [
        _place(rng, VEHICLE, VEHICLE_COLOR, h, w, horizon, frame_count, motion, (0.12, 0.16))
        for _ in range(motion.vehicle_count)
    ] + [
        _place(rng, PEDESTRIAN, PEDESTRIAN_COLOR, h, w, horizon, frame_count, motion, (0.16, 0.06))
        for _ in range(motion.pedestrian_count)
    ]
    drift = rng.uniform(0.10, 0.25) if motion.illumination_drift else 0.0
    dash_phase = int(rng.integers(DASH_PERIOD))

    frames, label_maps = [], []
    rows = np.arange(h)[:, None]
    for t in range(frame_count):
        img = base.copy()
        labels = base_labels.copy()
        dashes = center_line & (((rows + dash_phase + t) % DASH_PERIOD) < DASH_PERIOD // 2)
        lanes = edges | dashes
        img[lanes] = LANE_COLOR
        labels[lanes] = LANE

        for sprite in sprites:
            top, left = sprite.position(t)
            window = (slice(top, top + sprite.height), slice(left, left + sprite.width))
            img[window] = sprite.color
            # darker band so sprites carry some texture
            band = max(sprite.height // 3, 1)
            img[top:top + band, left:left + sprite.width] = sprite.color * 0.6
            labels[window] = sprite.class_id

        light = 1.0 - drift * t / (frame_count - 1)
        frames.append(np.clip(img * light, 0.0, 1.0).astype(np.float32).transpose(2, 0, 1).copy())
        label_maps.append(labels)

    logger.debug(f"synthetic sequence seed={seed}: {frame_count} frames, {len(sprites)} sprites, drift {drift:.3f}")
    return FrameSequence(
        frames=frames,
        labels=label_maps,
        source=source or f"synthetic_{seed}",
        frame_names=[f"{t:05d}.png" for t in range(frame_count)],
    )
