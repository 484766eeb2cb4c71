"""Segmentation metrics over integer label maps."""

from typing import Optional

import numpy as np

from src.core.errors import ContractViolation


def _check_maps(pred: np.ndarray, gt: np.ndarray) -> None:
    if pred.shape != gt.shape:
        raise ContractViolation(f"label maps differ in shape: {pred.shape} vs {gt.shape}")
    if pred.size == 0:
        raise ContractViolation("label maps are empty")
    for name, m in (("prediction", pred), ("ground truth", gt)):
        if not np.issubdtype(m.dtype, np.integer):
            raise ContractViolation(f"{name} label map must hold integer class ids, got {m.dtype}")


def pixel_accuracy(pred_labels: np.ndarray, gt_labels: np.ndarray) -> float:
    pred, gt = np.asarray(pred_labels), np.asarray(gt_labels)
    _check_maps(pred, gt)
    return float(np.count_nonzero(pred == gt) / pred.size)


def mean_iou(pred_labels: np.ndarray, gt_labels: np.ndarray, class_count: int) -> float:
    """Per-image mean IoU over the classes present in the prediction or the ground truth."""
    matrix = ConfusionMatrix(class_count)
    matrix.add(pred_labels, gt_labels)
    return matrix.mean_iou()


class ConfusionMatrix:
    """
    Global confusion counts, rows = ground truth, columns = prediction.

    Accumulating over a dataset and taking ratios at the end avoids dividing by
    empty per-image classes.
    """

    def __init__(self, class_count: int):
        if class_count < 1:
            raise ContractViolation(f"class_count must be >= 1, got {class_count}")
        self.class_count = class_count
        self.counts = np.zeros((class_count, class_count), dtype=np.int64)

    def add(self, pred_labels: np.ndarray, gt_labels: np.ndarray) -> None:
        pred, gt = np.asarray(pred_labels), np.asarray(gt_labels)
        _check_maps(pred, gt)
        for name, m in (("prediction", pred), ("ground truth", gt)):
            low, high = int(m.min()), int(m.max())
            if low < 0 or high >= self.class_count:
                bad = low if low < 0 else high
                raise ContractViolation(f"{name} class id {bad} out of range for {self.class_count} classes")
        index = self.class_count * gt.reshape(-1).astype(np.int64) + pred.reshape(-1)
        self.counts += np.bincount(index, minlength=self.class_count ** 2).reshape(self.class_count, self.class_count)

    def merge(self, other: "ConfusionMatrix") -> None:
        if other.class_count != self.class_count:
            raise ContractViolation("cannot merge confusion matrices with different class counts")
        self.counts += other.counts

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def pixel_accuracy(self) -> float:
        if self.total == 0:
            return float("nan")
        return float(np.trace(self.counts) / self.total)

    def class_iou(self) -> np.ndarray:
        """IoU per class; nan for classes absent from both prediction and ground truth."""
        intersection = np.diag(self.counts).astype(np.float64)
        union = self.counts.sum(axis=0) + self.counts.sum(axis=1) - intersection
        iou = np.full(self.class_count, np.nan)
        present = union > 0
        iou[present] = intersection[present] / union[present]
        return iou

    def mean_iou(self) -> float:
        iou = self.class_iou()
        if np.all(np.isnan(iou)):
            return float("nan")
        return float(np.nanmean(iou))

    def reset(self) -> None:
        self.counts[...] = 0


def summarize(matrix: Optional[ConfusionMatrix]) -> dict:
    if matrix is None or matrix.total == 0:
        return {"pixel_acc": float("nan"), "mean_iou": float("nan")}
    return {"pixel_acc": matrix.pixel_accuracy(), "mean_iou": matrix.mean_iou()}
