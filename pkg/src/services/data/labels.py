"""Class remapping between a label source's ids and the unified class set."""

import logging
from pathlib import Path
from typing import Dict, Sequence, Union

import numpy as np

from src.core.errors import ContractViolation, UnknownClassIdError
from src.services.data.schemas.data import CLASS_NAMES, ClassMap

logger = logging.getLogger(__name__)


def identity_class_map(names: Sequence[str] = CLASS_NAMES) -> ClassMap:
    return ClassMap(table={i: i for i in range(len(names))}, names=tuple(names))


def load_class_map(path: Union[str, Path]) -> ClassMap:
    """
    Read `source_id unified_id class_name` lines (UTF-8, `#` comments allowed).
    The unified name list is ordered by unified id.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as e:
        raise ContractViolation(f"Cannot read class map {path}: {e}") from e

    table: Dict[int, int] = {}
    names: Dict[int, str] = {}
    for number, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 2)
        if len(parts) != 3:
            raise ContractViolation(f"{path}:{number}: expected 'source_id unified_id class_name'")
        try:
            source, unified = int(parts[0]), int(parts[1])
        except ValueError:
            raise ContractViolation(f"{path}:{number}: ids must be integers")
        if source in table:
            raise ContractViolation(f"{path}:{number}: source id {source} mapped twice")
        if unified in names and names[unified] != parts[2]:
            raise ContractViolation(f"{path}:{number}: unified id {unified} named both {names[unified]!r} and {parts[2]!r}")
        table[source] = unified
        names[unified] = parts[2]

    if not names:
        raise ContractViolation(f"{path} declares no classes")
    count = max(names) + 1
    if sorted(names) != list(range(count)):
        raise ContractViolation(f"{path}: unified ids must be dense in [0, {count})")
    return ClassMap(table=table, names=tuple(names[i] for i in range(count)))


def write_class_map(path: Union[str, Path], cm: ClassMap) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{source} {unified} {cm.names[unified]}" for source, unified in sorted(cm.table.items())]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def remap_labels(label_map: np.ndarray, cm: ClassMap) -> np.ndarray:
    labels = np.asarray(label_map)
    present = np.unique(labels)
    unknown = [int(v) for v in present if int(v) not in cm.table]
    if unknown:
        raise UnknownClassIdError(unknown[0])
    if not present.size:
        return np.zeros(labels.shape, dtype=np.int64)
    # mapped source ids may be negative; index the lookup from the smallest one
    low, high = int(present.min()), int(present.max())
    lookup = np.zeros(high - low + 1, dtype=np.int64)
    for source, unified in cm.table.items():
        if low <= source <= high:
            lookup[source - low] = unified
    return lookup[labels.astype(np.int64) - low]
