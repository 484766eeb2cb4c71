import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

from src.core.errors import ContractViolation

logger = logging.getLogger(__name__)

# Absolute path to config.json at the repo root (two levels up from src/utils)
CONFIG_PATH = Path(__file__).resolve().parents[2] / "config.json"


def load_config(path: Path = CONFIG_PATH) -> Dict[str, Any]:
    try:
        with path.open("r", encoding="utf-8") as f:
            data = json.load(f)
            return data if isinstance(data, dict) else {}
    except Exception:
        return {}


def section(name: str) -> Dict[str, Any]:
    """One section of config.json, e.g. section("degradation")."""
    value = load_config().get(name)
    return dict(value) if isinstance(value, dict) else {}


def load_key_value_file(path: Union[str, Path]) -> Dict[str, str]:
    """
    Parse a `key = value` override file.

    Blank lines and `#` comments are skipped; keys are normalized to the
    underscore spelling so `lambda-ssim` and `lambda_ssim` are the same key.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise ContractViolation(f"Cannot read config file {path}: {e}") from e

    values: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ContractViolation(f"{path}:{number}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ContractViolation(f"{path}:{number}: empty key")
        values[key.replace("-", "_")] = value
    logger.debug(f"Loaded {len(values)} overrides from {path}")
    return values
