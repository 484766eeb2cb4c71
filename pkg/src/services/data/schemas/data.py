from dataclasses import dataclass, field, fields
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.core.errors import ContractViolation
from src.services.degradation.schemas.degradation import ArtifactPlacement, DegradationSpec

# Unified class ids of the synthetic corpus
CLASS_NAMES = ("sky", "road", "lane_marking", "vehicle", "pedestrian", "background")
SKY, ROAD, LANE, VEHICLE, PEDESTRIAN, BACKGROUND = range(len(CLASS_NAMES))


@dataclass
class FrameSequence:
    """Ordered frames (float32 3 x H x W) with optional aligned label maps (H x W ints)."""
    frames: List[np.ndarray]
    labels: Optional[List[np.ndarray]] = None
    source: str = ""
    frame_names: List[str] = field(default_factory=list)
    frame_interval: float = 1.0

    def __post_init__(self):
        if self.frames:
            shape = self.frames[0].shape
            for i, frame in enumerate(self.frames):
                if frame.shape != shape:
                    raise ContractViolation(
                        f"{self.source or 'sequence'}: frame {i} has shape {frame.shape}, expected {shape}"
                    )
        if self.labels is not None:
            if len(self.labels) != len(self.frames):
                raise ContractViolation(
                    f"{self.source or 'sequence'}: {len(self.labels)} label maps for {len(self.frames)} frames"
                )
            for i, labels in enumerate(self.labels):
                if labels.shape != self.frames[i].shape[1:]:
                    raise ContractViolation(f"{self.source or 'sequence'}: label map {i} does not match its frame")
        if not self.frame_names:
            self.frame_names = [f"{i:05d}.png" for i in range(len(self.frames))]
        elif len(self.frame_names) != len(self.frames):
            raise ContractViolation("frame_names must align with frames")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.frames[0].shape if self.frames else ()

    @property
    def has_labels(self) -> bool:
        return self.labels is not None


@dataclass
class SamplePair:
    degraded: np.ndarray
    clean: np.ndarray
    is_clean: bool
    previous: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None
    spec: Optional[DegradationSpec] = None
    placements: Tuple[ArtifactPlacement, ...] = ()
    seed: int = 0
    index: int = 0


@dataclass(frozen=True)
class ClassMap:
    table: Dict[int, int]
    names: Tuple[str, ...]

    def __post_init__(self):
        if not self.names:
            raise ContractViolation("ClassMap needs at least one unified class")
        bad = [u for u in self.table.values() if not 0 <= u < len(self.names)]
        if bad:
            raise ContractViolation(f"unified ids {sorted(set(bad))} outside [0, {len(self.names)})")

    @property
    def class_count(self) -> int:
        return len(self.names)


def _range(value: Any) -> Tuple[float, float]:
    if isinstance(value, str):
        value = [float(v) for v in value.replace(":", ",").split(",")]
    low, high = (float(v) for v in value)
    if low > high:
        raise ContractViolation(f"range low {low} exceeds high {high}")
    return low, high


@dataclass(frozen=True)
class AugmentConfig:
    """Paired augmentation ranges and per-transform probabilities."""
    crop_fraction: Tuple[float, float] = (0.8, 1.0)
    rotation_degrees: Tuple[float, float] = (-10.0, 10.0)
    zoom: Tuple[float, float] = (0.9, 1.1)
    hue_shift: Tuple[float, float] = (-0.03, 0.03)
    saturation_scale: Tuple[float, float] = (0.8, 1.2)
    value_scale: Tuple[float, float] = (0.8, 1.2)
    gamma: Tuple[float, float] = (0.8, 1.25)
    p_crop: float = 0.5
    p_rotate: float = 0.5
    p_zoom: float = 0.5
    p_hsv: float = 0.5
    p_gamma: float = 0.5
    max_retries: int = 10

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name.startswith("p_") and not 0.0 <= value <= 1.0:
                raise ContractViolation(f"{f.name} must lie in [0, 1], got {value}")
        if not 0.0 < self.crop_fraction[0] <= self.crop_fraction[1] <= 1.0:
            raise ContractViolation(f"crop_fraction must lie in (0, 1], got {self.crop_fraction}")
        if self.zoom[0] <= 0 or self.gamma[0] <= 0 or self.saturation_scale[0] < 0 or self.value_scale[0] < 0:
            raise ContractViolation("zoom and gamma must be positive; hsv scales non-negative")
        if self.max_retries < 1:
            raise ContractViolation("max_retries must be >= 1")

    @classmethod
    def disabled(cls) -> "AugmentConfig":
        return cls(p_crop=0.0, p_rotate=0.0, p_zoom=0.0, p_hsv=0.0, p_gamma=0.0)

    @classmethod
    def from_config(cls, values: Dict[str, Any]) -> "AugmentConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, value in values.items():
            if key not in known:
                continue
            if key.startswith("p_"):
                kwargs[key] = float(value)
            elif key == "max_retries":
                kwargs[key] = int(value)
            else:
                kwargs[key] = _range(value)
        return cls(**kwargs)


@dataclass(frozen=True)
class MotionConfig:
    vehicle_count: int = 2
    pedestrian_count: int = 1
    max_speed: int = 2
    # fixed (dx, dy) px/frame for every sprite instead of seeded speeds
    velocity: Optional[Tuple[int, int]] = None
    illumination_drift: bool = True

    def __post_init__(self):
        if self.vehicle_count < 0 or self.pedestrian_count < 0 or self.max_speed < 0:
            raise ContractViolation("sprite counts and max_speed must be >= 0")
