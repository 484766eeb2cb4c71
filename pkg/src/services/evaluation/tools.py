import argparse
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional

from src.core.errors import ContractViolation
from src.core.storage_manager import ReportStorageManager
from src.services.architectures.weights import load_weights
from src.services.data.schemas.data import CLASS_NAMES, FrameSequence
from src.services.data.segmenter import Prototypes, fit_prototypes
from src.services.data.sequence import load_corpus
from src.services.degradation.schemas.degradation import DegradationSettings, parse_levels
from src.services.evaluation.methods import FilterMethod, IdentityMethod, ModelMethod, RestorationMethod
from src.services.evaluation.report import write_gap_report, write_occlusion_report, write_report
from src.services.evaluation.service import evaluate, occlusion_report, segmentation_gaps
from src.services.filters.schemas.filters import FILTER_KINDS, FilterSettings
from src.utils.config_handler import section
from src.utils.env_handler import DATABASE_URL

logger = logging.getLogger(__name__)


def build_methods(args: argparse.Namespace) -> List[RestorationMethod]:
    """Methods in report order: identity, filters, then models."""
    methods: List[RestorationMethod] = []
    if args.identity:
        methods.append(IdentityMethod())
    if args.filter:
        settings = FilterSettings.from_config(
            section("filters"),
            median_kernel=args.median_kernel,
            bilateral_radius=args.bilateral_radius,
            sigma_spatial=args.sigma_spatial,
            sigma_range=args.sigma_range,
        )
        methods.extend(FilterMethod(kind, settings) for kind in dict.fromkeys(args.filter))
    for path in args.weights or []:
        methods.append(ModelMethod(load_weights(path)))
    names = [m.name for m in methods]
    duplicated = sorted({n for n in names if names.count(n) > 1})
    if duplicated:
        raise ContractViolation(f"several methods share the report name {', '.join(duplicated)}")
    return methods


def fit_segmenter(sequences: List[FrameSequence], class_count: int = len(CLASS_NAMES)) -> Prototypes:
    """Toy segmenter fitted on the clean labelled frames it is later scored against."""
    frames = [f for s in sequences for f in s.frames]
    labels = [lab for s in sequences for lab in s.labels]
    prototypes = fit_prototypes(frames, labels, class_count)
    logger.info(f"Fitted toy segmenter on {len(frames)} clean frame(s)")
    return prototypes


def _method_dir(root: Optional[str], method: RestorationMethod) -> Optional[Path]:
    if root is None:
        return None
    per_method = Path(root) / method.slug
    return per_method if per_method.is_dir() else Path(root)


def run_eval(args: argparse.Namespace) -> int:
    methods = build_methods(args)
    if not methods:
        logger.error("eval needs at least one of --weights, --filter or --identity")
        return 2

    size = (args.size, args.size) if args.size else None
    sequences = load_corpus(Path(args.data), size=size)
    settings = DegradationSettings.from_config(section("degradation"))

    unlabeled = [s.source for s in sequences if not s.has_labels]
    if args.external_preds is not None and unlabeled:
        raise ContractViolation(
            f"--external-preds needs label maps, missing for {len(unlabeled)} sequence(s): {', '.join(unlabeled[:5])}"
        )
    segment = not args.no_segmentation and not unlabeled
    if not args.no_segmentation and not segment:
        logger.warning("Dataset has no label maps; segmentation metrics are reported as nan")
    prototypes = fit_segmenter(sequences) if segment and args.external_preds is None else None

    rows = []
    by_method = {}
    for method in methods:
        method_rows = evaluate(
            method,
            sequences,
            levels=args.levels,
            seed=args.seed,
            prototypes=prototypes,
            external_preds=_method_dir(args.external_preds, method) if segment else None,
            dump_dir=Path(args.dump_images) / method.slug if args.dump_images else None,
            temporal_stride=args.temporal_stride,
            settings=settings,
        )
        by_method[method.name] = method_rows
        rows.extend(method_rows)

    write_report(rows, args.report, "csv")
    if args.markdown:
        write_report(rows, args.markdown, "markdown")

    reference = by_method.get(IdentityMethod.name)
    if segment and reference is not None and 0 in args.levels:
        gaps = [g for method_rows in by_method.values() for g in segmentation_gaps(method_rows, reference)]
        write_gap_report(gaps, Path(args.report).with_suffix(".gaps.csv"))

    if args.occlusion_report:
        occlusion = [
            occlusion_report(m, sequences, args.occlusion_level, args.seed, args.temporal_stride, settings)
            for m in methods
        ]
        write_occlusion_report(occlusion, args.occlusion_report)

    db_url = args.db or DATABASE_URL
    if db_url:
        run_id = args.run_id or datetime.now(timezone.utc).strftime("eval-%Y%m%dT%H%M%SZ")
        ReportStorageManager(db_url).write_rows(run_id, rows)
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("eval", help="Score restoration methods across noise levels")
    parser.add_argument("--data", required=True, help="Clean corpus root (label maps enable segmentation metrics)")
    parser.add_argument("--weights", action="append", default=None, help="DGW1 weight file; repeatable")
    parser.add_argument("--filter", action="append", choices=FILTER_KINDS, default=None, help="Repeatable")
    parser.add_argument("--identity", action="store_true", help="Include the unguarded baseline")
    parser.add_argument("--levels", type=parse_levels, default=(0, 1, 2, 3, 4))
    parser.add_argument("--report", required=True, help="CSV report path")
    parser.add_argument("--markdown", default=None, help="Markdown comparison table path")
    parser.add_argument("--dump-images", default=None, help="Write restored frames under DIR/<method>/level_<k>/<sequence>/")
    parser.add_argument("--external-preds", default=None, help="Segmentation label maps laid out like --dump-images")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--temporal-stride", type=int, default=1)
    parser.add_argument("--size", type=int, default=None, help="Resize frames to SIZE x SIZE on load")
    parser.add_argument("--no-segmentation", action="store_true")
    parser.add_argument("--occlusion-report", default=None, help="CSV of occluded vs unoccluded MSE per method")
    parser.add_argument("--occlusion-level", type=int, default=2)
    parser.add_argument("--db", default=None, help="Results database URL (default: DRIVEGUARD_DATABASE_URL)")
    parser.add_argument("--run-id", default=None)
    parser.add_argument("--median-kernel", type=int, default=None)
    parser.add_argument("--bilateral-radius", type=int, default=None)
    parser.add_argument("--sigma-spatial", type=float, default=None)
    parser.add_argument("--sigma-range", type=float, default=None)
    parser.set_defaults(handler=run_eval)
