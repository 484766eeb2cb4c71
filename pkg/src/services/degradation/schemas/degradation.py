from dataclasses import dataclass, fields
from typing import Any, Dict, Optional, Tuple

import numpy as np

from src.core.errors import ContractViolation

NOISE_KINDS = ("gaussian", "speckle", "salt_pepper", "poisson")

# level -> (salt-and-pepper amount, table variance, inclusive artifact count range)
LEVEL_TABLE: Dict[int, Tuple[float, float, Tuple[int, int]]] = {
    0: (0.0, 0.0, (0, 0)),
    1: (0.1, 1.0, (1, 13)),
    2: (0.2, 4.0, (13, 25)),
    3: (0.3, 9.0, (25, 37)),
    4: (0.4, 16.0, (37, 49)),
}
LEVELS = tuple(LEVEL_TABLE)


@dataclass(frozen=True)
class DegradationSettings:
    """Knobs left open by the level table; defaults come from config.json `degradation`."""
    variance_scale: float = 0.01
    poisson_peak: float = 255.0
    artifact_fill: float = 0.0
    stack_noises: bool = False
    stack_probability: float = 0.5

    def __post_init__(self):
        if self.variance_scale < 0:
            raise ContractViolation(f"variance_scale must be >= 0, got {self.variance_scale}")
        if self.poisson_peak <= 0:
            raise ContractViolation(f"poisson_peak must be positive, got {self.poisson_peak}")
        if not 0.0 <= self.artifact_fill <= 1.0:
            raise ContractViolation(f"artifact_fill must lie in [0, 1], got {self.artifact_fill}")
        if not 0.0 < self.stack_probability <= 1.0:
            raise ContractViolation(f"stack_probability must lie in (0, 1], got {self.stack_probability}")

    @classmethod
    def from_config(cls, values: Dict[str, Any], **overrides: Any) -> "DegradationSettings":
        known = {f.name for f in fields(cls)}
        merged = {k: v for k, v in values.items() if k in known}
        merged.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**merged)


@dataclass(frozen=True)
class DegradationSpec:
    level: int
    salt_pepper_amount: float
    table_variance: float
    gaussian_variance: float
    speckle_variance: float
    poisson_enabled: bool
    artifact_count_range: Tuple[int, int]
    rng_seed: int
    noise_kinds: Tuple[str, ...] = ()
    artifact_count: int = 0
    poisson_peak: float = 255.0

    def parameters(self) -> Dict[str, Any]:
        return {
            "amount": self.salt_pepper_amount,
            "variance": self.gaussian_variance,
            "speckle_variance": self.speckle_variance,
            "poisson_peak": self.poisson_peak if self.poisson_enabled else 0.0,
            "artifacts": f"{self.artifact_count_range[0]}-{self.artifact_count_range[1]}",
        }


@dataclass(frozen=True)
class ArtifactPlacement:
    kind: str  # blank_region | line_group
    top: int
    left: int
    height: int
    width: int
    fill: float = 0.0
    orientation: Optional[str] = None  # horizontal | vertical, line groups only
    thickness: Optional[int] = None

    @property
    def window(self) -> Tuple[slice, slice]:
        return slice(self.top, self.top + self.height), slice(self.left, self.left + self.width)

    def inside(self, height: int, width: int) -> bool:
        return (
            self.top >= 0 and self.left >= 0 and self.height > 0 and self.width > 0
            and self.top + self.height <= height and self.left + self.width <= width
        )

    def describe(self) -> str:
        text = f"{self.kind}@{self.top},{self.left},{self.height}x{self.width}"
        if self.orientation:
            text += f",{self.orientation}"
        return text


def occlusion_mask(placements, height: int, width: int) -> np.ndarray:
    mask = np.zeros((height, width), dtype=bool)
    for p in placements:
        mask[p.window] = True
    return mask


def parse_levels(text: str) -> Tuple[int, ...]:
    """'0,1,2' -> (0, 1, 2); used as an argparse type."""
    try:
        levels = tuple(int(part) for part in str(text).split(",") if part.strip())
    except ValueError:
        raise ContractViolation(f"levels must be comma-separated integers, got {text!r}")
    bad = [lv for lv in levels if lv not in LEVEL_TABLE]
    if not levels or bad:
        raise ContractViolation(f"levels must be drawn from {sorted(LEVEL_TABLE)}, got {text!r}")
    return levels
