import os
from typing import Optional

from dotenv import load_dotenv

load_dotenv()


def _optional(name: str, default: Optional[str] = None) -> Optional[str]:
    val = os.getenv(name)
    return val if val is not None else default


def _positive_int(name: str, default: int) -> int:
    raw = _optional(name)
    if raw is None or not raw.strip():
        return default
    try:
        value = int(raw)
    except ValueError:
        raise EnvironmentError(f"{name} must be an integer, got {raw!r}")
    if value < 1:
        raise EnvironmentError(f"{name} must be >= 1, got {value}")
    return value


# Cap on intra-op and per-frame parallelism
THREADS: int = _positive_int("DRIVEGUARD_THREADS", os.cpu_count() or 1)

LOG_LEVEL: str = (_optional("DRIVEGUARD_LOG_LEVEL", "INFO") or "INFO").upper()

# Results database for `eval --db`; unset means no database
DATABASE_URL: Optional[str] = _optional("DRIVEGUARD_DATABASE_URL")
