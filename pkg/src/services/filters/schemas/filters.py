from dataclasses import dataclass, fields
from typing import Any, Dict

from src.core.errors import ContractViolation

FILTER_KINDS = ("median", "bilateral")


@dataclass(frozen=True)
class FilterSettings:
    median_kernel: int = 3
    bilateral_radius: int = 4
    sigma_spatial: float = 2.0
    sigma_range: float = 0.1

    def __post_init__(self):
        if self.median_kernel < 1 or self.median_kernel % 2 == 0:
            raise ContractViolation(f"median kernel must be odd and >= 1, got {self.median_kernel}")
        if self.bilateral_radius < 1:
            raise ContractViolation(f"bilateral radius must be >= 1, got {self.bilateral_radius}")
        if self.sigma_spatial <= 0 or self.sigma_range <= 0:
            raise ContractViolation("bilateral sigmas must be positive")

    @classmethod
    def from_config(cls, values: Dict[str, Any], **overrides: Any) -> "FilterSettings":
        types = {f.name: f.type for f in fields(cls)}
        merged = {k: v for k, v in values.items() if k in types}
        merged.update({k: v for k, v in overrides.items() if v is not None})
        return cls(
            **{k: (int(v) if k in ("median_kernel", "bilateral_radius") else float(v)) for k, v in merged.items()}
        )
