"""Restoration methods compared by the evaluation harness."""

import re
from typing import Optional

import numpy as np

from src.services.architectures.service import ModelGraph, restore_frame
from src.services.filters.schemas.filters import FILTER_KINDS, FilterSettings
from src.services.filters.service import bilateral_filter, median_filter
from src.core.errors import ContractViolation

LOSS_LABELS = {"mse": "MSE", "ssim": "SSIM", "combined": "MSE+SSIM"}
FILTER_LABELS = {"median": "Median Filtering", "bilateral": "Bilateral Denoising"}


class RestorationMethod:
    name = "method"
    uses_previous = False

    def restore(self, current: np.ndarray, previous: Optional[np.ndarray] = None) -> np.ndarray:
        raise NotImplementedError

    @property
    def slug(self) -> str:
        return re.sub(r"[^a-z0-9]+", "_", self.name.lower()).strip("_")

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r})"


class IdentityMethod(RestorationMethod):
    """No defense: the degraded frame goes straight to perception."""
    name = "Unguarded"

    def restore(self, current, previous=None):
        return np.asarray(current, dtype=np.float32).copy()


class FilterMethod(RestorationMethod):
    def __init__(self, kind: str, settings: Optional[FilterSettings] = None):
        if kind not in FILTER_KINDS:
            raise ContractViolation(f"filter must be one of {FILTER_KINDS}, got {kind!r}")
        self.kind = kind
        self.settings = settings or FilterSettings()
        self.name = FILTER_LABELS[kind]

    def restore(self, current, previous=None):
        s = self.settings
        if self.kind == "median":
            return median_filter(current, s.median_kernel)
        return bilateral_filter(current, s.sigma_spatial, s.sigma_range, s.bilateral_radius)


class ModelMethod(RestorationMethod):
    def __init__(self, graph: ModelGraph, name: Optional[str] = None):
        self.graph = graph
        loss = LOSS_LABELS.get(graph.loss_mode or "")
        self.name = name or (f"{graph.kind}({loss})" if loss else graph.kind)

    @property
    def uses_previous(self) -> bool:
        return self.graph.uses_previous

    def restore(self, current, previous=None):
        return restore_frame(self.graph, current, previous if self.uses_previous else None)
