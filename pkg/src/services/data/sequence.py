"""
Frame-sequence directories.

A sequence directory holds lexicographically ordered `*.png` RGB frames and,
optionally, a `labels/` subdirectory with single-channel label maps under the
same file names. A corpus root is one sequence directory or a directory of them.
"""

import logging
from pathlib import Path
from typing import List, Optional, Tuple, Union

from src.core.errors import ContractViolation
from src.services.data.schemas.data import FrameSequence
from src.utils.image_io import read_labels, read_rgb, write_labels, write_rgb

logger = logging.getLogger(__name__)

LABELS_DIR = "labels"


def _frame_files(directory: Path, pattern: str) -> List[Path]:
    return sorted(p for p in directory.glob(pattern) if p.is_file())


def load_sequence(
    directory: Union[str, Path],
    pattern: str = "*.png",
    size: Optional[Tuple[int, int]] = None,
) -> FrameSequence:
    directory = Path(directory)
    if not directory.is_dir():
        raise ContractViolation(f"{directory} is not a directory")
    files = _frame_files(directory, pattern)
    if not files:
        raise ContractViolation(f"{directory} holds no frames matching {pattern!r}")

    frames = [read_rgb(p, size) for p in files]
    labels = None
    label_dir = directory / LABELS_DIR
    if label_dir.is_dir():
        label_files = _frame_files(label_dir, pattern)
        if len(label_files) != len(files):
            raise ContractViolation(f"{directory}: {len(label_files)} label maps for {len(files)} frames")
        missing = [p.name for p in files if not (label_dir / p.name).is_file()]
        if missing:
            raise ContractViolation(f"{directory}: no label map for {missing[0]}")
        labels = [read_labels(label_dir / p.name, size) for p in files]

    seq = FrameSequence(frames=frames, labels=labels, source=directory.name, frame_names=[p.name for p in files])
    logger.debug(f"Loaded {len(seq)} frames from {directory} (labels: {seq.has_labels})")
    return seq


def load_corpus(
    root: Union[str, Path],
    pattern: str = "*.png",
    size: Optional[Tuple[int, int]] = None,
) -> List[FrameSequence]:
    root = Path(root)
    if not root.is_dir():
        raise ContractViolation(f"{root} is not a directory")
    if _frame_files(root, pattern):
        return [load_sequence(root, pattern, size)]
    sequences = [
        load_sequence(d, pattern, size)
        for d in sorted(p for p in root.iterdir() if p.is_dir() and p.name != LABELS_DIR)
        if _frame_files(d, pattern)
    ]
    if not sequences:
        raise ContractViolation(f"{root} holds no sequence directories")
    logger.info(f"Loaded {len(sequences)} sequence(s) from {root}")
    return sequences


def write_sequence(seq: FrameSequence, directory: Union[str, Path], with_labels: bool = True) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, frame in zip(seq.frame_names, seq.frames):
        write_rgb(directory / name, frame)
    if with_labels and seq.labels is not None:
        for name, labels in zip(seq.frame_names, seq.labels):
            write_labels(directory / LABELS_DIR / name, labels)
    return directory


def is_sequence_dir(directory: Union[str, Path], pattern: str = "*.png") -> bool:
    return bool(_frame_files(Path(directory), pattern))


def sequence_output_dir(root_in: Union[str, Path], root_out: Union[str, Path], seq: FrameSequence) -> Path:
    """Mirror the input layout: a single-sequence input maps onto `root_out` itself."""
    return Path(root_out) if is_sequence_dir(root_in) else Path(root_out) / seq.source
