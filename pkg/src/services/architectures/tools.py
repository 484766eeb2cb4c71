import argparse
import logging
from pathlib import Path
from typing import List

from src.core.errors import ContractViolation
from src.services.architectures.service import ModelGraph, restore_frame
from src.services.architectures.weights import load_weights
from src.services.data.schemas.data import FrameSequence
from src.services.data.sequence import load_corpus, sequence_output_dir
from src.utils.image_io import write_rgb

logger = logging.getLogger(__name__)


def restore_sequence(graph: ModelGraph, seq: FrameSequence, temporal_stride: int = 1) -> List:
    """Restore every frame; STAE reads frame i - stride (clamped at 0) of the same input stream."""
    if temporal_stride < 1:
        raise ContractViolation(f"temporal_stride must be >= 1, got {temporal_stride}")
    restored = []
    for i, frame in enumerate(seq.frames):
        previous = seq.frames[max(i - temporal_stride, 0)] if graph.uses_previous else None
        restored.append(restore_frame(graph, frame, previous))
    return restored


def run_restore(args: argparse.Namespace) -> int:
    graph = load_weights(args.weights)
    source, target = Path(args.input), Path(args.output)
    for seq in load_corpus(source):
        out_dir = sequence_output_dir(source, target, seq)
        for name, frame in zip(seq.frame_names, restore_sequence(graph, seq, args.temporal_stride)):
            write_rgb(out_dir / name, frame)
        logger.info(f"Restored {len(seq)} frames of {seq.source} with {graph.kind} into {out_dir}")
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("restore", help="Restore degraded frames with trained weights")
    parser.add_argument("--weights", required=True, help="DGW1 weight file")
    parser.add_argument("--input", required=True, help="Sequence directory or corpus root")
    parser.add_argument("--output", required=True)
    parser.add_argument("--temporal-stride", type=int, default=1)
    parser.set_defaults(handler=run_restore)
