from dataclasses import dataclass

from src.core.errors import ContractViolation

WINDOW_KINDS = ("gaussian", "uniform")


@dataclass(frozen=True)
class SsimConfig:
    """Window and stabilizing constants for SSIM; radius 5 gives an 11x11 window."""
    radius: int = 5
    window: str = "gaussian"
    sigma: float = 1.5
    dynamic_range: float = 1.0

    def __post_init__(self):
        if self.radius < 0:
            raise ContractViolation(f"SSIM window radius must be >= 0, got {self.radius}")
        if self.window not in WINDOW_KINDS:
            raise ContractViolation(f"SSIM window must be one of {WINDOW_KINDS}, got {self.window!r}")
        if self.sigma <= 0 or self.dynamic_range <= 0:
            raise ContractViolation("SSIM sigma and dynamic range must be positive")

    @property
    def size(self) -> int:
        return 2 * self.radius + 1

    @property
    def c1(self) -> float:
        return (0.01 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (0.03 * self.dynamic_range) ** 2


@dataclass(frozen=True)
class LossWeights:
    mse: float = 1.0
    ssim: float = 0.1

    def __post_init__(self):
        if self.mse < 0 or self.ssim < 0:
            raise ContractViolation(f"loss weights must be >= 0, got mse={self.mse}, ssim={self.ssim}")
        if self.mse == 0 and self.ssim == 0:
            raise ContractViolation("loss weights cannot both be zero")

    @classmethod
    def for_mode(cls, mode: str, mse: float = 1.0, ssim: float = 0.1) -> "LossWeights":
        if mode == "mse":
            return cls(mse=mse, ssim=0.0)
        if mode == "ssim":
            return cls(mse=0.0, ssim=1.0)
        if mode == "combined":
            return cls(mse=mse, ssim=ssim)
        raise ContractViolation(f"loss mode must be mse, ssim or combined, got {mode!r}")
