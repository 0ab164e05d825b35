"""Reader/writer for the UQV1 binary volume format.

Layout (little-endian), 36-byte header followed by the raw payload:

    magic    4 bytes  b"UQV1"
    version  u16      1
    dtype    u8       0 = 32-bit float, 1 = unsigned 8-bit label
    flags    u8       0
    dims     3 x u32  voxel counts (x, y, z)
    channels u32
    spacing  3 x f32  mm per voxel (x, y, z)
    payload  channel-slowest, then z, then y, then x fastest

which is exactly the C order of our ``(channels, z, y, x)`` arrays. Unknown
magic or version is rejected.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import IoFailure, UqvFormatError
from .volume import GridMeta, LabelVolume, ProbVolume

MAGIC = b"UQV1"
VERSION = 1
DTYPE_FLOAT32 = 0
DTYPE_LABEL8 = 1
_HEADER = struct.Struct("<4sHBB3II3f")


def _write_atomic(path: Path, header: bytes, payload: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(header)
            f.write(payload)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise IoFailure(f"writing {path}: {exc}") from exc


def write_float_volume(path: str | Path, meta: GridMeta, data: np.ndarray) -> None:
    """Write a float volume; ``data`` shape must be ``meta.shape`` or, for
    single-channel metas, the bare grid shape."""
    path = Path(path)
    data = np.asarray(data)
    if data.shape == meta.grid_shape and meta.channels == 1:
        data = data[np.newaxis]
    if data.shape != meta.shape:
        raise UqvFormatError(f"data shape {data.shape} does not match meta {meta.shape}")
    header = _HEADER.pack(
        MAGIC, VERSION, DTYPE_FLOAT32, 0, *meta.dims, meta.channels, *meta.spacing
    )
    _write_atomic(path, header, np.ascontiguousarray(data, dtype="<f4").tobytes())


def write_prob_volume(path: str | Path, vol: ProbVolume) -> None:
    write_float_volume(path, vol.meta, vol.data)


def write_label_volume(path: str | Path, vol: LabelVolume) -> None:
    path = Path(path)
    if vol.max_label() > 255:
        raise UqvFormatError("label payload is 8-bit; labels above 255 are not representable")
    header = _HEADER.pack(MAGIC, VERSION, DTYPE_LABEL8, 0, *vol.meta.dims, 1, *vol.meta.spacing)
    _write_atomic(path, header, np.ascontiguousarray(vol.data, dtype=np.uint8).tobytes())


def _read_raw(path: Path) -> tuple[GridMeta, int, np.ndarray]:
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"reading {path}: {exc}") from exc
    if len(blob) < _HEADER.size:
        raise UqvFormatError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, version, dtype, flags, nx, ny, nz, channels, sx, sy, sz = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise UqvFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise UqvFormatError(f"{path}: unsupported version {version}")
    if dtype not in (DTYPE_FLOAT32, DTYPE_LABEL8):
        raise UqvFormatError(f"{path}: unknown dtype code {dtype}")
    if flags != 0:
        raise UqvFormatError(f"{path}: unknown flags {flags:#x}")
    meta = GridMeta((nx, ny, nz), (sx, sy, sz), channels if dtype == DTYPE_FLOAT32 else 1)
    itemsize = 4 if dtype == DTYPE_FLOAT32 else 1
    expected = meta.channels * meta.n_voxels() * itemsize
    payload = blob[_HEADER.size:]
    if len(payload) != expected:
        raise UqvFormatError(
            f"{path}: payload is {len(payload)} bytes, header implies {expected}"
        )
    np_dtype = np.dtype("<f4") if dtype == DTYPE_FLOAT32 else np.dtype(np.uint8)
    data = np.frombuffer(payload, dtype=np_dtype).reshape(meta.shape)
    return meta, dtype, data


def read_float_volume(path: str | Path) -> tuple[GridMeta, np.ndarray]:
    """Read a dtype-0 volume as ``(meta, float32 array of meta.shape)``."""
    meta, dtype, data = _read_raw(Path(path))
    if dtype != DTYPE_FLOAT32:
        raise UqvFormatError(f"{path}: expected float payload, found labels")
    return meta, data


def read_prob_volume(path: str | Path) -> ProbVolume:
    meta, data = read_float_volume(path)
    return ProbVolume(meta, data)


def read_label_volume(path: str | Path) -> LabelVolume:
    meta, dtype, data = _read_raw(Path(path))
    if dtype != DTYPE_LABEL8:
        raise UqvFormatError(f"{path}: expected label payload, found floats")
    return LabelVolume(meta, data[0].astype(np.uint8))
