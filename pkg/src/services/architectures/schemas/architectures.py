from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional, Tuple

from src.core.errors import ContractViolation

ARCH_KINDS = ("AE", "SCAE", "STAE")
INPUTS = ("current", "previous")
# (source, consumer) edges that carry encoder features straight into the decoder
SKIP_EDGES = (("E3", "D2"), ("E1", "D3"))


@dataclass(frozen=True)
class ArchitectureConfig:
    kind: str = "SCAE"
    base_channels: int = 32
    widths: Optional[Tuple[int, ...]] = None
    input_size: Tuple[int, int] = (64, 64)
    kernel: int = 3
    in_channels: int = 3

    def __post_init__(self):
        object.__setattr__(self, "kind", str(self.kind).upper())
        if self.kind not in ARCH_KINDS:
            raise ContractViolation(f"architecture kind must be one of {ARCH_KINDS}, got {self.kind!r}")
        if self.widths is not None:
            object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
            if len(self.widths) != 4:
                raise ContractViolation(f"exactly 4 encoder widths are needed, got {self.widths}")
        object.__setattr__(self, "input_size", tuple(int(s) for s in self.input_size))
        if self.base_channels < 1 or any(w < 1 for w in self.channel_widths):
            raise ContractViolation("channel widths must be positive")
        check_spatial(*self.input_size)
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ContractViolation(f"kernel size must be odd and positive, got {self.kernel}")
        if self.in_channels < 1:
            raise ContractViolation(f"in_channels must be positive, got {self.in_channels}")

    @property
    def channel_widths(self) -> Tuple[int, ...]:
        if self.widths is not None:
            return self.widths
        b = self.base_channels
        return (b, 2 * b, 4 * b, 8 * b)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["widths"] = list(self.channel_widths)
        data["input_size"] = list(self.input_size)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ArchitectureConfig":
        try:
            return cls(
                kind=data["kind"],
                base_channels=int(data.get("base_channels", 32)),
                widths=tuple(data["widths"]) if data.get("widths") else None,
                input_size=tuple(data.get("input_size", (64, 64))),
                kernel=int(data.get("kernel", 3)),
                in_channels=int(data.get("in_channels", 3)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ContractViolation(f"invalid architecture config {data!r}: {e}") from e


def check_spatial(height: int, width: int) -> None:
    if height < 8 or width < 8 or height % 8 or width % 8:
        raise ContractViolation(f"spatial size {height}x{width} must be divisible by 8 (three stride-2 stages)")


@dataclass(frozen=True)
class LayerSpec:
    """
    One separable-conv stage. Sources are concatenated in order, optionally
    upsampled x2, optionally joined by `skip_after_upsample`, then convolved.
    """
    name: str
    sources: Tuple[str, ...]
    out_channels: int
    stride: int = 1
    upsample: bool = False
    skip_after_upsample: Optional[str] = None
    batchnorm: bool = True
    activation: str = "relu"
    bias: bool = False

    @property
    def inputs(self) -> Tuple[str, ...]:
        extra = (self.skip_after_upsample,) if self.skip_after_upsample else ()
        return self.sources + extra
