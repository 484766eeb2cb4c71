import argparse
import logging
import sys
from typing import Any, Dict, List, Optional, Sequence

from src.core.errors import ContractViolation
from src.core.tools import register as register_gradcheck
from src.services.architectures.tools import register as register_restore
from src.services.data.tools import register as register_synth
from src.services.degradation.tools import register as register_degrade
from src.services.evaluation.tools import register as register_eval
from src.services.training.tools import register as register_train
from src.utils.config_handler import load_key_value_file, section
from src.utils.env_handler import LOG_LEVEL

logger = logging.getLogger("driveguard")

TRUE_VALUES = {"1", "true", "yes", "on"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driveguard",
        description="Degrade, restore and evaluate driving-camera frames",
        allow_abbrev=False,
    )
    parser.add_argument("--config", default=None, help="key = value file overriding config.json defaults")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    # Mount every service's subcommands
    for register in (
        register_synth,
        register_degrade,
        register_train,
        register_restore,
        register_eval,
        register_gradcheck,
    ):
        register(subparsers)
    return parser


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._subparsers._group_actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def _given(flag: str, argv: Sequence[str]) -> bool:
    return any(token == flag or token.startswith(flag + "=") for token in argv)


def config_flags(sub: argparse.ArgumentParser, values: Dict[str, Any], argv: Sequence[str]) -> List[str]:
    """
    Turn config values into extra command-line tokens. Keys the user already
    passed as flags are skipped, so command-line flags always win.
    """
    actions = {a.dest: a for a in sub._actions if a.option_strings}
    extra: List[str] = []
    for key, value in values.items():
        action = actions.get(key)
        if action is None:
            sub.error(f"unknown configuration key {key!r}")
        flag = action.option_strings[0]
        if _given(flag, argv) or value is None:
            continue
        if isinstance(action, argparse._StoreTrueAction):
            if str(value).strip().lower() in TRUE_VALUES:
                extra.append(flag)
        elif isinstance(action, argparse._AppendAction):
            items = value if isinstance(value, list) else [v.strip() for v in str(value).split(",") if v.strip()]
            for item in items:
                extra.extend([flag, str(item)])
        elif isinstance(value, list):
            extra.extend([flag, ",".join(str(v) for v in value)])
        else:
            extra.extend([flag, str(value)])
    return extra


def parse_args(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    """Parse with precedence: flag > --config file > config.json section > built-in default."""
    # Required flags may come from configuration, so find the command before the full parse
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config", default=None)
    pre.add_argument("command", nargs="?")
    known, _ = pre.parse_known_args(argv)
    try:
        sub = _subparser(parser, known.command)
    except KeyError:
        return parser.parse_args(argv)

    values: Dict[str, Any] = {k.replace("-", "_"): v for k, v in section(known.command).items()}
    if known.config:
        values.update(load_key_value_file(known.config))
    if not values:
        return parser.parse_args(argv)
    extra = config_flags(sub, values, argv)
    logger.debug(f"Configuration adds: {' '.join(extra)}")
    return parser.parse_args(list(argv) + extra)


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=LOG_LEVEL, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parse_args(parser, argv)
        return args.handler(args)
    except SystemExit as e:
        if e.code is None:
            return 0
        return e.code if isinstance(e.code, int) else 2
    except ContractViolation as e:
        logger.error(f"{type(e).__name__}: {e}")
        return 1
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
