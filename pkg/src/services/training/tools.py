import argparse
import logging
from pathlib import Path

from src.services.data.schemas.data import AugmentConfig
from src.services.degradation.schemas.degradation import DegradationSettings, parse_levels
from src.services.training.schemas.training import LOSS_MODES, TrainConfig
from src.services.training.service import train
from src.utils.config_handler import section

logger = logging.getLogger(__name__)


def train_config_from_args(args: argparse.Namespace) -> TrainConfig:
    out = Path(args.out)
    return TrainConfig(
        arch=args.arch,
        loss_mode=args.loss,
        lambda_mse=args.lambda_mse,
        lambda_ssim=args.lambda_ssim,
        lr=args.lr,
        epochs=args.epochs,
        batch_size=args.batch,
        seed=args.seed,
        size=args.size,
        base_channels=args.base_channels,
        levels=args.levels,
        clean_ratio=args.clean_ratio,
        temporal_stride=args.temporal_stride,
        augment=not args.no_augment,
        checkpoint_every=args.checkpoint_every,
        checkpoint_dir=Path(args.checkpoint_dir) if args.checkpoint_dir else out.parent / f"{out.stem}_checkpoints",
        out_path=out,
        loss_log=Path(args.loss_log) if args.loss_log else out.with_suffix(".loss.csv"),
        data_dir=Path(args.data) if args.data else None,
        synthetic_sequences=args.synthetic_sequences,
        synthetic_frames=args.synthetic_frames,
    )


def run_train(args: argparse.Namespace) -> int:
    cfg = train_config_from_args(args)
    result = train(
        cfg,
        settings=DegradationSettings.from_config(section("degradation")),
        augment=AugmentConfig.from_config(section("augment")),
    )
    final = result.history[-1]
    logger.info(f"Finished: final mean loss {final.mean_loss:.6f}; loss log at {cfg.loss_log}")
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("train", help="Train an AE, SCAE or STAE restoration model")
    parser.add_argument("--arch", type=str.upper, choices=("AE", "SCAE", "STAE"), default="SCAE")
    parser.add_argument("--loss", choices=LOSS_MODES, default="combined")
    parser.add_argument("--data", default=None, help="Corpus root; a synthetic corpus is generated when omitted")
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--lr", type=float, default=1e-4)
    parser.add_argument("--batch", type=int, default=8)
    parser.add_argument("--size", type=int, default=64)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True, help="Final DGW1 weight file")
    parser.add_argument("--lambda-mse", type=float, default=1.0)
    parser.add_argument("--lambda-ssim", type=float, default=0.1)
    parser.add_argument("--levels", type=parse_levels, default=(2,), help="Comma-separated training noise levels")
    parser.add_argument("--clean-ratio", type=float, default=0.25)
    parser.add_argument("--temporal-stride", type=int, default=1)
    parser.add_argument("--base-channels", type=int, default=32)
    parser.add_argument("--no-augment", action="store_true")
    parser.add_argument("--checkpoint-every", type=int, default=0, help="Epoch cadence; 0 disables checkpoints")
    parser.add_argument("--checkpoint-dir", default=None)
    parser.add_argument("--loss-log", default=None, help="Loss CSV (default: next to --out)")
    parser.add_argument("--synthetic-sequences", type=int, default=8)
    parser.add_argument("--synthetic-frames", type=int, default=24)
    parser.set_defaults(handler=run_train)
