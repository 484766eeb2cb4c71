import argparse
import logging

from src.core.gradcheck import OP_CHECKS, run_checks

logger = logging.getLogger(__name__)


def run_gradcheck(args: argparse.Namespace) -> int:
    results = run_checks(args.op or ["all"], args.tolerance, args.epsilon, args.seed)
    failed = [r.name for r in results if not r.passed]
    for r in results:
        print(f"{r.name:<18} {r.max_error:.3e}  {'PASS' if r.passed else 'FAIL'}")
    if failed:
        logger.error(f"gradcheck failed for: {', '.join(failed)}")
        return 1
    logger.info(f"gradcheck passed for {len(results)} op(s)")
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("gradcheck", help="Compare analytic gradients with central finite differences")
    parser.add_argument(
        "--op", action="append", choices=("all",) + tuple(OP_CHECKS), default=None,
        help="Op to check; repeatable (default: all)",
    )
    parser.add_argument("--tolerance", type=float, default=None, help="Max relative error for layer ops")
    parser.add_argument("--epsilon", type=float, default=1e-3)
    parser.add_argument("--seed", type=int, default=0)
    parser.set_defaults(handler=run_gradcheck)
