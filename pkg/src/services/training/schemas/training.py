from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

from src.core.errors import ContractViolation
from src.services.architectures.schemas.architectures import ARCH_KINDS
from src.services.degradation.schemas.degradation import LEVEL_TABLE
from src.services.losses.schemas.losses import LossWeights

LOSS_MODES = ("mse", "ssim", "combined")


@dataclass(frozen=True)
class TrainConfig:
    arch: str = "SCAE"
    loss_mode: str = "combined"
    lambda_mse: float = 1.0
    lambda_ssim: float = 0.1
    lr: float = 1e-4
    epochs: int = 30
    batch_size: int = 8
    seed: int = 0
    size: int = 64
    base_channels: int = 32
    levels: Tuple[int, ...] = (2,)
    clean_ratio: float = 0.25
    temporal_stride: int = 1
    augment: bool = True
    max_grad_norm: float = 5.0
    checkpoint_every: int = 0
    checkpoint_dir: Optional[Path] = None
    out_path: Optional[Path] = None
    loss_log: Optional[Path] = None
    data_dir: Optional[Path] = None
    synthetic_sequences: int = 8
    synthetic_frames: int = 24
    prefetch: int = 4

    def __post_init__(self):
        object.__setattr__(self, "arch", self.arch.upper())
        if self.arch not in ARCH_KINDS:
            raise ContractViolation(f"arch must be one of {ARCH_KINDS}, got {self.arch!r}")
        if self.loss_mode not in LOSS_MODES:
            raise ContractViolation(f"loss mode must be one of {LOSS_MODES}, got {self.loss_mode!r}")
        if self.lr <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ContractViolation("lr, epochs and batch size must be positive")
        if self.size < 16 or self.size % 8:
            raise ContractViolation(f"training size must be a multiple of 8 and at least 16, got {self.size}")
        bad = [lv for lv in self.levels if lv not in LEVEL_TABLE]
        if not self.levels or bad:
            raise ContractViolation(f"training levels must be a non-empty subset of 0..4, got {self.levels}")
        if self.checkpoint_every < 0 or self.prefetch < 1:
            raise ContractViolation("checkpoint_every must be >= 0 and prefetch >= 1")
        if self.lambda_mse < 0 or self.lambda_ssim < 0:
            raise ContractViolation("loss weights must be >= 0")

    @property
    def weights(self) -> LossWeights:
        return LossWeights.for_mode(self.loss_mode, self.lambda_mse, self.lambda_ssim)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    mean_loss: float
    mean_mse: float
    mean_ssim: float
