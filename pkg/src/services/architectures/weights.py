"""
DGW1 weight files.

Layout: b"DGW1" | u32 LE header length | UTF-8 JSON header | little-endian
float32 payload | u64 LE CRC-64 of the payload. The header carries the
architecture config, the training loss mode and the ordered tensor manifest
(name, shape, byte offset into the payload).
"""

import json
import logging
import os
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from src.core.errors import (
    ChecksumError,
    ManifestMismatchError,
    TruncatedPayloadError,
    WeightFormatError,
)
from src.services.architectures.schemas.architectures import ArchitectureConfig
from src.services.architectures.service import BUILDERS, ModelGraph
from src.utils.checksum import crc64

logger = logging.getLogger(__name__)

MAGIC = b"DGW1"
VERSION = 1
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


def save_weights(graph: ModelGraph, path: Union[str, Path], loss_mode: Optional[str] = None) -> Path:
    path = Path(path)
    manifest, chunks, offset = [], [], 0
    for name, array in graph.state_arrays().items():
        data = np.ascontiguousarray(array, dtype="<f4").tobytes()
        manifest.append({"name": name, "shape": list(array.shape), "offset": offset})
        chunks.append(data)
        offset += len(data)
    payload = b"".join(chunks)
    header = json.dumps(
        {
            "format": "DGW1",
            "version": VERSION,
            "kind": graph.kind,
            "config": graph.config.to_dict(),
            "loss_mode": loss_mode or graph.loss_mode,
            "tensors": manifest,
        },
        sort_keys=True,
    ).encode("utf-8")

    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    with tmp.open("wb") as f:
        f.write(MAGIC)
        f.write(_U32.pack(len(header)))
        f.write(header)
        f.write(payload)
        f.write(_U64.pack(crc64(payload)))
    os.replace(tmp, path)
    logger.debug(f"Saved {graph.kind} weights ({len(manifest)} tensors, {len(payload)} bytes) to {path}")
    return path


def read_header(blob: bytes) -> dict:
    if len(blob) < len(MAGIC) + _U32.size:
        raise TruncatedPayloadError("weight file ends before its header length")
    if blob[: len(MAGIC)] != MAGIC:
        raise WeightFormatError(f"bad magic bytes {blob[:len(MAGIC)]!r}, expected {MAGIC!r}")
    (length,) = _U32.unpack_from(blob, len(MAGIC))
    start = len(MAGIC) + _U32.size
    if len(blob) < start + length:
        raise TruncatedPayloadError("weight file ends inside its header")
    try:
        header = json.loads(blob[start : start + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise WeightFormatError(f"unreadable weight header: {e}") from e
    if not isinstance(header, dict) or header.get("format") != "DGW1":
        raise WeightFormatError("weight header does not describe a DGW1 file")
    if header.get("version") != VERSION:
        raise WeightFormatError(f"unsupported weight file version {header.get('version')!r}")
    header["_payload_start"] = start + length
    return header


def load_weights(path: Union[str, Path], expected: Optional[ArchitectureConfig] = None) -> ModelGraph:
    """
    Read a DGW1 file into a fresh ModelGraph. With `expected`, the stored
    architecture must match it (kind, widths, kernel, channels).
    """
    path = Path(path)
    blob = path.read_bytes()
    header = read_header(blob)
    try:
        config = ArchitectureConfig.from_dict(header["config"])
        manifest = header["tensors"]
    except (KeyError, TypeError) as e:
        raise WeightFormatError(f"weight header is missing {e}") from e

    if expected is not None:
        mine = {k: v for k, v in config.to_dict().items() if k != "input_size"}
        theirs = {k: v for k, v in expected.to_dict().items() if k != "input_size"}
        if mine != theirs:
            diff = {k: (mine.get(k), theirs.get(k)) for k in theirs if mine.get(k) != theirs.get(k)}
            raise ManifestMismatchError(f"{path}: stored architecture differs from the expected one: {diff}")

    graph = BUILDERS[config.kind](config)
    target = graph.state_arrays()
    names = [entry.get("name") for entry in manifest]
    if names != list(target):
        raise ManifestMismatchError(f"{path}: tensor manifest does not match a {config.kind} graph")

    start = header["_payload_start"]
    size = 0
    for entry in manifest:
        shape = tuple(entry["shape"])
        if shape != target[entry["name"]].shape:
            raise ManifestMismatchError(f"{path}: {entry['name']} has shape {shape}, expected {target[entry['name']].shape}")
        if entry["offset"] != size:
            raise WeightFormatError(f"{path}: tensor {entry['name']} has offset {entry['offset']}, expected {size}")
        size += int(np.prod(shape, dtype=np.int64)) * 4
    end = start + size
    if len(blob) < end + _U64.size:
        raise TruncatedPayloadError(f"{path}: payload needs {size} bytes plus checksum, file has {len(blob) - start}")
    if len(blob) > end + _U64.size:
        raise WeightFormatError(f"{path}: {len(blob) - end - _U64.size} unexpected trailing bytes")
    payload = blob[start:end]
    (stored,) = _U64.unpack_from(blob, end)
    if crc64(payload) != stored:
        raise ChecksumError(f"{path}: payload checksum mismatch")

    arrays = {}
    for entry in manifest:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        arrays[entry["name"]] = np.frombuffer(payload, dtype="<f4", count=count, offset=entry["offset"]).reshape(shape)
    graph.load_state(arrays)
    graph.loss_mode = header.get("loss_mode")
    logger.debug(f"Loaded {config.kind} weights from {path}")
    return graph
