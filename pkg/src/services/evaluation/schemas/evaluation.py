from dataclasses import dataclass
from typing import Optional

AVG_LEVEL = "avg"
REPORT_COLUMNS = ("method", "noise_level", "n", "mse", "psnr", "ssim", "pixel_acc", "mean_iou")

NAN = float("nan")


@dataclass
class MetricRow:
    """One method at one noise level; noise_level None marks the across-level average row."""
    method: str
    noise_level: Optional[int]
    n: int
    mse: float
    psnr: float
    ssim: float
    pixel_acc: float = NAN
    mean_iou: float = NAN

    @property
    def is_average(self) -> bool:
        return self.noise_level is None

    @property
    def level_label(self) -> str:
        return AVG_LEVEL if self.noise_level is None else str(self.noise_level)


@dataclass
class OcclusionRow:
    method: str
    noise_level: int
    n: int
    occluded_mse: float
    unoccluded_mse: float
    occluded_fraction: float


@dataclass
class SegmentationGap:
    method: str
    noise_level: int
    pixel_acc_gap: float
    pixel_acc_relative_gap: float
    mean_iou_gap: float
    mean_iou_relative_gap: float
    pixel_acc_recovered: float
    mean_iou_recovered: float
