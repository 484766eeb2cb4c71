"""Metric reports: CSV for machines, a methods-as-columns markdown table for people."""

import csv
import io
import logging
import math
from dataclasses import fields
from pathlib import Path
from typing import Dict, List, Sequence, Union

from src.core.errors import ContractViolation
from src.services.evaluation.schemas.evaluation import (
    AVG_LEVEL,
    REPORT_COLUMNS,
    MetricRow,
    OcclusionRow,
    SegmentationGap,
)

logger = logging.getLogger(__name__)

MARKDOWN_METRICS = (
    ("MSE", "mse"),
    ("PSNR", "psnr"),
    ("SSIM", "ssim"),
    ("Pixel Accuracy", "pixel_acc"),
    ("IoU Score", "mean_iou"),
)


def _number(value: float) -> str:
    return repr(float(value))


def render_csv(rows: Sequence[MetricRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for r in rows:
        writer.writerow(
            [r.method, r.level_label, r.n]
            + [_number(getattr(r, column)) for column in REPORT_COLUMNS[3:]]
        )
    return buffer.getvalue()


def _cell(value: float) -> str:
    if math.isnan(value):
        return "-"
    if math.isinf(value):
        return "inf"
    return f"{value:.4f}"


def render_markdown(rows: Sequence[MetricRow]) -> str:
    """
    One column per method holding its average row (or its only row when no
    average exists), one table row per metric.
    """
    columns: Dict[str, MetricRow] = {}
    for r in rows:
        if r.is_average or r.method not in columns:
            columns[r.method] = r
    lines = ["| Metric | " + " | ".join(columns) + " |", "|---|" + "---|" * len(columns)]
    if columns:
        for label, attr in MARKDOWN_METRICS:
            lines.append(f"| {label} | " + " | ".join(_cell(getattr(r, attr)) for r in columns.values()) + " |")
    return "\n".join(lines) + "\n"


def write_report(rows: Sequence[MetricRow], path: Union[str, Path], fmt: str = "csv") -> Path:
    if fmt == "csv":
        text = render_csv(rows)
    elif fmt == "markdown":
        text = render_markdown(rows)
    else:
        raise ContractViolation(f"report format must be csv or markdown, got {fmt!r}")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise ContractViolation(f"Cannot write report {path}: {e}") from e
    logger.info(f"Wrote {fmt} report with {len(rows)} row(s) to {path}")
    return path


def read_report(path: Union[str, Path]) -> List[MetricRow]:
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(header) != REPORT_COLUMNS:
            raise ContractViolation(f"{path} is not a metric report (header {header!r})")
        rows = []
        for number, record in enumerate(reader, start=2):
            if len(record) != len(REPORT_COLUMNS):
                raise ContractViolation(f"{path}:{number}: expected {len(REPORT_COLUMNS)} fields, got {len(record)}")
            method, level, n, *values = record
            rows.append(
                MetricRow(
                    method,
                    None if level == AVG_LEVEL else int(level),
                    int(n),
                    *(float(v) for v in values),
                )
            )
    return rows


def _write_csv(path: Union[str, Path], header: Sequence[str], rows: Sequence[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_occlusion_report(rows: Sequence[OcclusionRow], path: Union[str, Path]) -> Path:
    columns = [f.name for f in fields(OcclusionRow)]
    path = _write_csv(
        path,
        columns,
        [[r.method, r.noise_level, r.n] + [_number(getattr(r, c)) for c in columns[3:]] for r in rows],
    )
    logger.info(f"Wrote occlusion report with {len(rows)} row(s) to {path}")
    return path


def write_gap_report(gaps: Sequence[SegmentationGap], path: Union[str, Path]) -> Path:
    columns = [f.name for f in fields(SegmentationGap)]
    path = _write_csv(
        path,
        columns,
        [[g.method, g.noise_level] + [_number(getattr(g, c)) for c in columns[2:]] for g in gaps],
    )
    logger.info(f"Wrote segmentation gap report with {len(gaps)} row(s) to {path}")
    return path
