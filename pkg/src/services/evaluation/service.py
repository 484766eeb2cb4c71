"""
Evaluation sweep: degrade every frame at each level, restore it with a
method, score the restoration against the clean frame and, when label maps
are available, score segmentation of the restored frame.

Per-frame degradation seeds depend only on (seed, sequence, frame index),
so results do not depend on thread scheduling.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from src.core.errors import ContractViolation
from src.services.data.schemas.data import CLASS_NAMES, FrameSequence
from src.services.data.segmenter import Prototypes, toy_segment
from src.services.degradation.schemas.degradation import DegradationSettings, occlusion_mask
from src.services.degradation.service import degrade_artifacts_only, degrade_at_level
from src.services.evaluation.methods import RestorationMethod
from src.services.evaluation.schemas.evaluation import MetricRow, OcclusionRow, SegmentationGap
from src.services.losses.schemas.losses import SsimConfig
from src.services.losses.segmentation import ConfusionMatrix, summarize
from src.services.losses.service import mse, psnr_from_mse, ssim_mean
from src.utils.env_handler import THREADS
from src.utils.image_io import read_labels, write_rgb
from src.utils.seeding import derive_seed

logger = logging.getLogger(__name__)


@dataclass
class FrameResult:
    mse: float
    ssim: float
    restored: np.ndarray


def frame_seed(seed: int, source: str, index: int) -> int:
    return derive_seed(seed, source, index)


def level_dir(root: Path, level: int, seq: FrameSequence) -> Path:
    return Path(root) / f"level_{level}" / seq.source


def _check_dataset(method: RestorationMethod, sequences: Sequence[FrameSequence], need_labels: bool) -> None:
    if not sequences or not any(len(s) for s in sequences):
        raise ContractViolation("evaluation dataset is empty")
    if method.uses_previous and any(len(s) < 2 for s in sequences):
        raise ContractViolation(f"{method.name} needs frame sequences (at least 2 frames per sequence)")
    if need_labels and not all(s.has_labels for s in sequences):
        raise ContractViolation("segmentation metrics requested but the dataset has no label maps")


def _restore_all(method, degraded: List[np.ndarray], stride: int, threads: int) -> List[np.ndarray]:
    def restore(i: int) -> np.ndarray:
        previous = degraded[max(i - stride, 0)] if method.uses_previous else None
        return method.restore(degraded[i], previous)

    if threads <= 1:
        return [restore(i) for i in range(len(degraded))]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(restore, range(len(degraded))))


def _external_predictions(root: Path, level: int, seq: FrameSequence) -> List[np.ndarray]:
    directory = level_dir(root, level, seq)
    preds = []
    for name in seq.frame_names:
        path = directory / name
        if not path.is_file():
            raise ContractViolation(f"missing external prediction {path}")
        preds.append(read_labels(path))
    return preds


def average_row(method: str, rows: Sequence[MetricRow]) -> MetricRow:
    """Unweighted mean over the per-level rows."""
    if not rows:
        raise ContractViolation("cannot average an empty row list")

    def mean(attr: str) -> float:
        return float(np.mean([getattr(r, attr) for r in rows]))

    return MetricRow(
        method=method,
        noise_level=None,
        n=sum(r.n for r in rows),
        mse=mean("mse"),
        psnr=mean("psnr"),
        ssim=mean("ssim"),
        pixel_acc=mean("pixel_acc"),
        mean_iou=mean("mean_iou"),
    )


def evaluate(
    method: RestorationMethod,
    sequences: Sequence[FrameSequence],
    levels: Sequence[int] = (0, 1, 2, 3, 4),
    seed: int = 0,
    prototypes: Optional[Prototypes] = None,
    external_preds: Optional[Path] = None,
    dump_dir: Optional[Path] = None,
    temporal_stride: int = 1,
    settings: Optional[DegradationSettings] = None,
    ssim_cfg: SsimConfig = SsimConfig(),
    threads: int = THREADS,
    class_count: int = len(CLASS_NAMES),
) -> List[MetricRow]:
    """
    One MetricRow per level plus the average row. Segmentation metrics use
    `prototypes` (toy segmenter on the restored frame) or `external_preds`
    (label PNGs under level_<k>/<sequence>/); without either they are nan.
    """
    segment = prototypes is not None or external_preds is not None
    _check_dataset(method, sequences, segment)
    rows: List[MetricRow] = []
    for level in levels:
        errors, ssims = [], []
        confusion = ConfusionMatrix(class_count) if segment else None
        for seq in sequences:
            degraded = [
                degrade_at_level(frame, level, frame_seed(seed, seq.source, i), settings)[0]
                for i, frame in enumerate(seq.frames)
            ]
            restored = _restore_all(method, degraded, temporal_stride, threads)
            for clean, out in zip(seq.frames, restored):
                errors.append(mse(out, clean))
                ssims.append(ssim_mean(out, clean, ssim_cfg))
            if dump_dir is not None:
                for name, out in zip(seq.frame_names, restored):
                    write_rgb(level_dir(dump_dir, level, seq) / name, out)
            if confusion is not None:
                preds = (
                    _external_predictions(external_preds, level, seq)
                    if external_preds is not None
                    else [toy_segment(out, prototypes) for out in restored]
                )
                for pred, gt in zip(preds, seq.labels):
                    confusion.add(pred, gt)

        err = float(np.mean(errors))
        row = MetricRow(
            method=method.name,
            noise_level=level,
            n=len(errors),
            mse=err,
            psnr=psnr_from_mse(err),
            ssim=float(np.mean(ssims)),
            **summarize(confusion),
        )
        logger.info(
            f"{method.name} level {level}: mse {row.mse:.6f} psnr {row.psnr:.2f} ssim {row.ssim:.4f} "
            f"pixel_acc {row.pixel_acc:.4f} mean_iou {row.mean_iou:.4f} (n={row.n})"
        )
        rows.append(row)
    rows.append(average_row(method.name, rows))
    return rows


def occlusion_report(
    method: RestorationMethod,
    sequences: Sequence[FrameSequence],
    level: int = 2,
    seed: int = 0,
    temporal_stride: int = 1,
    settings: Optional[DegradationSettings] = None,
    threads: int = THREADS,
) -> OcclusionRow:
    """Restoration MSE inside vs outside the artifact rectangles of an artifact-only attack."""
    _check_dataset(method, sequences, need_labels=False)
    inside_sum = outside_sum = 0.0
    inside_count = outside_count = 0
    frames = 0
    for seq in sequences:
        attacked = [
            degrade_artifacts_only(frame, level, frame_seed(seed, seq.source, i), settings)
            for i, frame in enumerate(seq.frames)
        ]
        restored = _restore_all(method, [a[0] for a in attacked], temporal_stride, threads)
        for clean, out, (_, _, placements) in zip(seq.frames, restored, attacked):
            mask = occlusion_mask(placements, *clean.shape[1:])
            sq = (out.astype(np.float64) - clean.astype(np.float64)) ** 2
            inside_sum += float(sq[:, mask].sum())
            outside_sum += float(sq[:, ~mask].sum())
            inside_count += int(mask.sum()) * clean.shape[0]
            outside_count += int((~mask).sum()) * clean.shape[0]
            frames += 1
    if inside_count == 0:
        raise ContractViolation(f"artifact-only attack at level {level} placed no artifacts")
    row = OcclusionRow(
        method=method.name,
        noise_level=level,
        n=frames,
        occluded_mse=inside_sum / inside_count,
        unoccluded_mse=outside_sum / outside_count if outside_count else 0.0,
        occluded_fraction=inside_count / (inside_count + outside_count),
    )
    logger.info(
        f"{method.name} occlusion level {level}: occluded mse {row.occluded_mse:.6f}, "
        f"unoccluded mse {row.unoccluded_mse:.6f} ({row.occluded_fraction:.1%} occluded)"
    )
    return row


def _ratio(num: float, den: float) -> float:
    return num / den if den != 0 and np.isfinite(den) else float("nan")


def segmentation_gaps(method_rows: Sequence[MetricRow], reference_rows: Sequence[MetricRow]) -> List[SegmentationGap]:
    """
    Gap of each level's segmentation scores to the unguarded clean reference
    (level 0 of `reference_rows`), and the share of the unguarded gap recovered.
    """
    reference = {r.noise_level: r for r in reference_rows if not r.is_average}
    if 0 not in reference:
        raise ContractViolation("segmentation gaps need an unguarded level-0 row")
    clean = reference[0]
    gaps = []
    for row in method_rows:
        if row.is_average:
            continue
        base = reference.get(row.noise_level, clean)
        gaps.append(
            SegmentationGap(
                method=row.method,
                noise_level=row.noise_level,
                pixel_acc_gap=clean.pixel_acc - row.pixel_acc,
                pixel_acc_relative_gap=_ratio(clean.pixel_acc - row.pixel_acc, clean.pixel_acc),
                mean_iou_gap=clean.mean_iou - row.mean_iou,
                mean_iou_relative_gap=_ratio(clean.mean_iou - row.mean_iou, clean.mean_iou),
                pixel_acc_recovered=_ratio(row.pixel_acc - base.pixel_acc, clean.pixel_acc - base.pixel_acc),
                mean_iou_recovered=_ratio(row.mean_iou - base.mean_iou, clean.mean_iou - base.mean_iou),
            )
        )
    return gaps
