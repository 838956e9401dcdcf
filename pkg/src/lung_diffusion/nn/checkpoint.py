"""
Binary checkpoint codec.

Layout (little-endian):

    b"LANDCKPT" | u32 version | 32-byte config hash
    repeated records: u32 name_len | name | u32 rank | u32 dims... | f32 payload

Parameters come first, then optimizer moments under "<name>.m" / "<name>.v",
then one "<group>/.step" scalar per parameter group. Several parameter groups
(generator and discriminator) share one file; record names are
"<group>/<param>".
"""

import json
import logging
import struct
from pathlib import Path
from typing import Mapping, Optional

import numpy as np
from pydantic import ValidationError

from ..errors import ConfigError, FormatError
from ..models.reports import CheckpointMeta
from ..utils import atomic_write
from .params import ParamSet

logger = logging.getLogger(__name__)

MAGIC = b"LANDCKPT"
FORMAT_VERSION = 1
HASH_BYTES = 32
MAX_RANK = 8
STEP_SUFFIX = ".step"


def _pack_record(out: list[bytes], name: str, array: np.ndarray) -> None:
    encoded = name.encode("utf-8")
    out.append(struct.pack("<I", len(encoded)))
    out.append(encoded)
    out.append(struct.pack("<I", array.ndim))
    out.append(struct.pack(f"<{array.ndim}I", *array.shape))
    out.append(np.ascontiguousarray(array, dtype="<f4").tobytes())


def encode_checkpoint(groups: Mapping[str, ParamSet], config_hash_hex: str) -> bytes:
    """
    Serialize parameter groups and their optimizer state.

    Raises:
        ConfigError: If the hash is not a 64-character hex digest
    """
    try:
        digest = bytes.fromhex(config_hash_hex)
    except ValueError:
        digest = b""
    if len(digest) != HASH_BYTES:
        raise ConfigError(f"config hash must be {HASH_BYTES} bytes of hex, got {config_hash_hex!r}")

    out = [MAGIC, struct.pack("<I", FORMAT_VERSION), digest]
    for group, params in groups.items():
        for name in params:
            _pack_record(out, f"{group}/{name}", params.values[name])
    for group, params in groups.items():
        for name in params:
            _pack_record(out, f"{group}/{name}.m", params.m[name])
            _pack_record(out, f"{group}/{name}.v", params.v[name])
    for group, params in groups.items():
        _pack_record(out, f"{group}/{STEP_SUFFIX}", np.array(float(params.step)))
    return b"".join(out)


class _Reader:
    """Cursor over a checkpoint buffer that reports byte offsets on failure."""

    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, n: int, what: str) -> bytes:
        end = self.offset + n
        if end > len(self.data):
            raise FormatError(
                f"truncated checkpoint reading {what}: expected {end} bytes, file has {len(self.data)}",
                self.offset,
            )
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    @property
    def done(self) -> bool:
        return self.offset >= len(self.data)


def decode_checkpoint(data: bytes) -> tuple[str, dict[str, np.ndarray]]:
    """
    Parse a checkpoint buffer.

    Returns:
        tuple: (config hash hex, tensors by record name as float64)

    Raises:
        FormatError: On bad magic, unknown version, truncation or absurd dims
    """
    reader = _Reader(data)
    if reader.take(len(MAGIC), "magic") != MAGIC:
        raise FormatError("not a checkpoint file (bad magic)", 0)
    version = reader.u32("version")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", reader.offset - 4)
    config_hash_hex = reader.take(HASH_BYTES, "config hash").hex()

    tensors: dict[str, np.ndarray] = {}
    while not reader.done:
        start = reader.offset
        name_len = reader.u32("record name length")
        try:
            name = reader.take(name_len, "record name").decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError("record name is not valid UTF-8", start + 4)
        rank = reader.u32(f"rank of {name}")
        if rank > MAX_RANK:
            raise FormatError(f"record {name} has rank {rank} (max {MAX_RANK})", reader.offset - 4)
        dims = struct.unpack(f"<{rank}I", reader.take(4 * rank, f"dims of {name}"))
        count = int(np.prod(dims, dtype=np.int64)) if rank else 1
        if count * 4 > len(data) - reader.offset:
            raise FormatError(
                f"truncated checkpoint: record {name} needs {count * 4} payload bytes, "
                f"{len(data) - reader.offset} remain",
                reader.offset,
            )
        payload = reader.take(count * 4, f"payload of {name}")
        if name in tensors:
            raise FormatError(f"duplicate record {name}", start)
        tensors[name] = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(dims)
    return config_hash_hex, tensors


def sidecar_path(path: Path) -> Path:
    """Metadata file stored next to a checkpoint."""
    path = Path(path)
    return path.with_name(path.name + ".json")


def save_checkpoint(
    path: Path,
    groups: Mapping[str, ParamSet],
    meta: CheckpointMeta,
) -> None:
    """
    Atomically write a checkpoint and its JSON sidecar.

    Parameters and moments are rounded to storage precision in place first,
    so a run resumed from this file continues exactly where this one does.
    """
    for params in groups.values():
        params.round_to_storage()
    payload = encode_checkpoint(groups, meta.config_hash)
    with atomic_write(path) as f:
        f.write(payload)
    with atomic_write(sidecar_path(path), "w") as f:
        f.write(meta.model_dump_json(indent=2))
    logger.debug("Wrote checkpoint %s (step %d, %d bytes)", path, meta.step, len(payload))


def read_checkpoint_meta(path: Path) -> Optional[CheckpointMeta]:
    """Sidecar metadata, or None when the sidecar is missing."""
    meta_path = sidecar_path(path)
    if not meta_path.exists():
        return None
    try:
        return CheckpointMeta.model_validate(json.loads(meta_path.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, ValidationError) as e:
        raise FormatError(f"invalid checkpoint metadata {meta_path}: {e}")


def load_checkpoint(
    path: Path,
    groups: Mapping[str, ParamSet],
    expected_hash: str,
) -> Optional[CheckpointMeta]:
    """
    Restore parameter groups (values, moments, step) from a checkpoint.

    Args:
        path: Checkpoint file
        groups: Parameter sets to fill, keyed by group name
        expected_hash: Config hash the checkpoint must carry

    Returns:
        CheckpointMeta | None: Sidecar metadata when present

    Raises:
        FileNotFoundError: If the checkpoint is missing
        ConfigError: If the stored config hash differs from expected_hash
        FormatError: If the file is malformed, or its sidecar names another step
        ShapeError: If parameter names or shapes do not match the groups
    """
    stored_hash, tensors = decode_checkpoint(Path(path).read_bytes())
    if stored_hash != expected_hash:
        raise ConfigError(
            f"checkpoint {path} was written for config {stored_hash[:12]}, "
            f"current config is {expected_hash[:12]}"
        )
    for group in groups:
        if f"{group}/{STEP_SUFFIX}" not in tensors:
            raise FormatError(f"checkpoint {path} has no parameter group '{group}'")
    meta = read_checkpoint_meta(path)
    if meta is not None and groups:
        # sidecar step tracks the first group
        stored_step = int(tensors[f"{next(iter(groups))}/{STEP_SUFFIX}"])
        if meta.step != stored_step:
            raise FormatError(
                f"checkpoint {path} is at step {stored_step} but its sidecar says step {meta.step}"
            )
    for group, params in groups.items():
        prefix = f"{group}/"
        step_name = f"{prefix}{STEP_SUFFIX}"
        values = {n[len(prefix):]: t for n, t in tensors.items() if n.startswith(prefix) and n != step_name
                  and not n.endswith((".m", ".v"))}
        m = {n: tensors[f"{prefix}{n}.m"] for n in values if f"{prefix}{n}.m" in tensors}
        v = {n: tensors[f"{prefix}{n}.v"] for n in values if f"{prefix}{n}.v" in tensors}
        params.load(values, m, v, step=int(tensors[step_name]))
    return meta
