import argparse
import logging
from pathlib import Path

from src.services.data.labels import identity_class_map, write_class_map
from src.services.data.schemas.data import MotionConfig
from src.services.data.sequence import write_sequence
from src.services.data.synthetic import generate_synthetic_sequence
from src.utils.seeding import derive_seed

logger = logging.getLogger(__name__)

CLASSES_FILE = "classes.txt"


def synthesize_corpus(out: Path, sequences: int, frames: int, size: int, seed: int, motion: MotionConfig) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    for k in range(sequences):
        name = f"seq_{k:03d}"
        seq = generate_synthetic_sequence(derive_seed(seed, "synth", k), frames, size, motion, source=name)
        write_sequence(seq, out / name)
        logger.info(f"Wrote {name}: {frames} frames at {size}x{size}")
    write_class_map(out / CLASSES_FILE, identity_class_map())
    return out


def run_synth(args: argparse.Namespace) -> int:
    motion = MotionConfig(
        vehicle_count=args.vehicles,
        pedestrian_count=args.pedestrians,
        max_speed=args.max_speed,
        illumination_drift=not args.no_drift,
    )
    synthesize_corpus(Path(args.out), args.sequences, args.frames, args.size, args.seed, motion)
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("synth", help="Generate a synthetic driving corpus with label maps")
    parser.add_argument("--out", required=True, help="Output corpus directory")
    parser.add_argument("--sequences", type=int, default=8)
    parser.add_argument("--frames", type=int, default=24)
    parser.add_argument("--size", type=int, default=64)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--vehicles", type=int, default=2)
    parser.add_argument("--pedestrians", type=int, default=1)
    parser.add_argument("--max-speed", type=int, default=2)
    parser.add_argument("--no-drift", action="store_true", help="Disable the day-to-dusk illumination drift")
    parser.set_defaults(handler=run_synth)
