import logging
import math
from typing import Iterator, Optional, Sequence

import numpy as np

from src.core.errors import ContractViolation
from src.services.data.schemas.data import FrameSequence, SamplePair
from src.services.degradation.schemas.degradation import DegradationSettings
from src.services.degradation.service import degrade_at_level
from src.utils.seeding import derive_seed

logger = logging.getLogger(__name__)


def _ceil(x: float) -> int:
    return math.ceil(round(x, 9))


def is_clean_index(index: int, clean_ratio: float) -> bool:
    """Evenly interleaved clean slots: exactly ceil(r * n) of the first n indices, index 0 included."""
    return _ceil((index + 1) * clean_ratio) > _ceil(index * clean_ratio)


def make_pairs(
    seq: FrameSequence,
    levels: Sequence[int] = (2,),
    clean_ratio: float = 0.25,
    temporal_stride: int = 1,
    seed: int = 0,
    settings: Optional[DegradationSettings] = None,
) -> Iterator[SamplePair]:
    """
    One (degraded, clean) pair per frame, deterministic for `seed`.

    Degraded pairs draw their level from `levels`; the previous frame
    (index i - stride, clamped at 0) is degraded at the same level with its
    own seed. Clean pairs keep both frames untouched.
    """
    if len(seq) == 0:
        raise ContractViolation(f"sequence {seq.source!r} is empty")
    if temporal_stride < 1:
        raise ContractViolation(f"temporal_stride must be >= 1, got {temporal_stride}")
    if len(seq) <= temporal_stride and len(seq) > 1:
        raise ContractViolation(f"sequence {seq.source!r} of {len(seq)} frames is not longer than stride {temporal_stride}")
    if not 0.0 <= clean_ratio <= 1.0:
        raise ContractViolation(f"clean_ratio must lie in [0, 1], got {clean_ratio}")
    if not levels:
        raise ContractViolation("level schedule is empty")

    for i, clean in enumerate(seq.frames):
        pair_seed = derive_seed(seed, seq.source, i)
        prev_index = max(i - temporal_stride, 0)
        prev_clean = seq.frames[prev_index]
        labels = seq.labels[i] if seq.labels is not None else None

        if is_clean_index(i, clean_ratio):
            yield SamplePair(
                degraded=clean.copy(),
                clean=clean,
                is_clean=True,
                previous=prev_clean.copy(),
                labels=labels,
                seed=pair_seed,
                index=i,
            )
            continue

        rng = np.random.default_rng(derive_seed(pair_seed, "level"))
        level = int(levels[int(rng.integers(len(levels)))])
        degraded, spec, placements = degrade_at_level(clean, level, pair_seed, settings)
        previous, _, _ = degrade_at_level(prev_clean, level, derive_seed(pair_seed, "previous"), settings)
        yield SamplePair(
            degraded=degraded,
            clean=clean,
            is_clean=False,
            previous=previous,
            labels=labels,
            spec=spec,
            placements=tuple(placements),
            seed=pair_seed,
            index=i,
        )
