import argparse
import logging
from pathlib import Path
from typing import List

from src.services.data.sequence import load_corpus, sequence_output_dir
from src.services.degradation.schemas.degradation import LEVELS, DegradationSettings
from src.services.degradation.service import degrade_artifacts_only, degrade_at_level, format_record
from src.utils.config_handler import section
from src.utils.image_io import write_labels, write_rgb
from src.utils.seeding import derive_seed

logger = logging.getLogger(__name__)

SIDECAR = "degradation.tsv"
SIDECAR_HEADER = "frame\tlevel\tseed\tnoise\tparameters\tplacements"


def frame_seed(seed: int, source: str, index: int) -> int:
    return derive_seed(seed, source, index)


def degrade_corpus(
    input_dir: Path,
    output_dir: Path,
    level: int,
    seed: int,
    settings: DegradationSettings,
    artifacts_only: bool = False,
) -> List[Path]:
    written = []
    degrade = degrade_artifacts_only if artifacts_only else degrade_at_level
    for seq in load_corpus(input_dir):
        target = sequence_output_dir(input_dir, output_dir, seq)
        lines = [SIDECAR_HEADER]
        for i, (name, frame) in enumerate(zip(seq.frame_names, seq.frames)):
            out, spec, placements = degrade(frame, level, frame_seed(seed, seq.source, i), settings)
            written.append(write_rgb(target / name, out))
            lines.append(format_record(name, spec, placements))
        if seq.labels is not None:
            for name, labels in zip(seq.frame_names, seq.labels):
                write_labels(target / "labels" / name, labels)
        (target / SIDECAR).write_text("\n".join(lines) + "\n", encoding="utf-8")
        logger.info(f"Degraded {len(seq)} frames of {seq.source} at level {level} into {target}")
    return written


def run_degrade(args: argparse.Namespace) -> int:
    settings = DegradationSettings.from_config(
        section("degradation"),
        stack_noises=args.stack_noises or None,
        variance_scale=args.variance_scale,
        poisson_peak=args.poisson_peak,
        artifact_fill=args.artifact_fill,
    )
    degrade_corpus(Path(args.input), Path(args.output), args.level, args.seed, settings, args.artifacts_only)
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("degrade", help="Apply a noise level to every frame of a corpus")
    parser.add_argument("--input", required=True, help="Sequence directory or corpus root")
    parser.add_argument("--output", required=True)
    parser.add_argument("--level", type=int, choices=LEVELS, required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--stack-noises", action="store_true", help="Apply several statistical noises per frame")
    parser.add_argument("--artifacts-only", action="store_true", help="Skip statistical noise, keep the artifacts")
    parser.add_argument("--variance-scale", type=float, default=None)
    parser.add_argument("--poisson-peak", type=float, default=None)
    parser.add_argument("--artifact-fill", type=float, default=None)
    parser.set_defaults(handler=run_degrade)
