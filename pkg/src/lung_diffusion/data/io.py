"""
Binary volume and mask file formats.

Volume:  b"LANDVOL1" | u32 version | u32 C | u32 D, H, W | f32 payload
Mask:    b"LANDMSK1" | u32 version | u32 D, H, W | u8 labels

All integers little-endian; payloads in z-major (C, D, H, W) order.
"""

import struct
from pathlib import Path

import numpy as np

from ..core import Volume, check_volume
from ..errors import FormatError, ShapeError
from ..utils import atomic_write

VOLUME_MAGIC = b"LANDVOL1"
MASK_MAGIC = b"LANDMSK1"
FORMAT_VERSION = 1
MAX_LABEL = 6


def _read_header(data: bytes, magic: bytes, n_dims: int, what: str) -> tuple[int, ...]:
    header_len = len(magic) + 4 + 4 * n_dims
    if len(data) < header_len:
        raise FormatError(
            f"truncated {what} header: expected {header_len} bytes, file has {len(data)}", len(data)
        )
    if data[: len(magic)] != magic:
        raise FormatError(f"not a {what} file (bad magic {data[:len(magic)]!r})", 0)
    version, *dims = struct.unpack_from(f"<I{n_dims}I", data, len(magic))
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported {what} format version {version}", len(magic))
    for i, d in enumerate(dims):
        if d == 0:
            raise FormatError(f"{what} dim {i} is zero", len(magic) + 4 + 4 * i)
    return tuple(dims)


def _check_payload(data: bytes, offset: int, expected: int, what: str) -> None:
    actual = len(data) - offset
    if actual != expected:
        kind = "truncated" if actual < expected else "oversized"
        raise FormatError(
            f"{kind} {what}: expected {offset + expected} bytes in total, file has {len(data)}",
            len(data) if actual < expected else offset + expected,
        )


def encode_volume(v: Volume) -> bytes:
    check_volume(v)
    header = VOLUME_MAGIC + struct.pack("<5I", FORMAT_VERSION, *v.shape)
    return header + np.ascontiguousarray(v, dtype="<f4").tobytes()


def decode_volume(data: bytes) -> Volume:
    """
    Parse volume bytes.

    Raises:
        FormatError: On bad magic, truncation, or dims exceeding the payload
    """
    dims = _read_header(data, VOLUME_MAGIC, 4, "volume")
    offset = len(VOLUME_MAGIC) + 4 + 16
    count = int(np.prod(dims, dtype=np.int64))
    _check_payload(data, offset, 4 * count, "volume")
    payload = np.frombuffer(data, dtype="<f4", count=count, offset=offset)
    volume = payload.astype(np.float64).reshape(dims)
    if not np.all(np.isfinite(volume)):
        bad = int(np.argmax(~np.isfinite(payload)))
        raise FormatError("volume payload contains non-finite values", offset + 4 * bad)
    return volume


def write_volume(path: Path, v: Volume) -> None:
    """Atomically write a Volume (stored as float32)."""
    payload = encode_volume(v)
    with atomic_write(path) as f:
        f.write(payload)


def read_volume(path: Path) -> Volume:
    """Read a Volume as float64."""
    return decode_volume(Path(path).read_bytes())


def check_labels(labels: np.ndarray) -> None:
    """
    Reject mask arrays that are not 3-D or hold labels outside 0..6.

    Raises:
        ShapeError: If labels is not 3-D
        ValueError: Naming the first invalid voxel coordinate
    """
    if labels.ndim != 3:
        raise ShapeError(f"mask must be a (D, H, W) label grid, got shape {labels.shape}")
    invalid = (labels < 0) | (labels > MAX_LABEL)
    if np.any(invalid):
        z, y, x = np.argwhere(invalid)[0]
        raise ValueError(f"invalid mask label {labels[z, y, x]} at voxel ({z}, {y}, {x})")


def encode_mask_file(labels: np.ndarray) -> bytes:
    check_labels(labels)
    header = MASK_MAGIC + struct.pack("<4I", FORMAT_VERSION, *labels.shape)
    return header + np.ascontiguousarray(labels, dtype=np.uint8).tobytes()


def decode_mask_file(data: bytes) -> np.ndarray:
    dims = _read_header(data, MASK_MAGIC, 3, "mask")
    offset = len(MASK_MAGIC) + 4 + 12
    count = int(np.prod(dims, dtype=np.int64))
    _check_payload(data, offset, count, "mask")
    labels = np.frombuffer(data, dtype=np.uint8, count=count, offset=offset).reshape(dims).copy()
    invalid = labels > MAX_LABEL
    if np.any(invalid):
        bad = int(np.argmax(invalid.reshape(-1)))
        raise FormatError(f"invalid mask label {labels.reshape(-1)[bad]}", offset + bad)
    return labels


def write_mask(path: Path, labels: np.ndarray) -> None:
    """Atomically write a label grid."""
    payload = encode_mask_file(labels)
    with atomic_write(path) as f:
        f.write(payload)


def read_mask(path: Path) -> np.ndarray:
    """Read a (D, H, W) uint8 label grid."""
    return decode_mask_file(Path(path).read_bytes())
