"""Per-clip cache container.

Layout (all integers little-endian)::

    magic     4 bytes  b"DGSC"
    version   u16
    n_arrays  u16
    per array: name_len u16, name utf-8, ndim u16, dims u32 * ndim
    payload   each array as raw <f4, in header order
"""

from __future__ import annotations

import os
import re
import struct
from pathlib import Path

import numpy as np

MAGIC = b"DGSC"
VERSION = 1
SUFFIX = ".dgs"
CACHE_ENV = "DIGISHIELD_CACHE"


class CacheError(ValueError):
    pass


def cache_path(cache_dir: str | Path, clip_id: str) -> Path:
    safe = re.sub(r"[^A-Za-z0-9._-]", "_", clip_id)
    return Path(cache_dir) / f"{safe}{SUFFIX}"


def default_cache_dir(fallback: str | Path) -> Path:
    return Path(os.environ.get(CACHE_ENV) or fallback)


def write_arrays(path: str | Path, arrays: dict[str, np.ndarray]) -> Path:
    path = Path(path)
    header = bytearray(MAGIC)
    header += struct.pack("<HH", VERSION, len(arrays))
    payload = []
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr, dtype="<f4")
        raw_name = name.encode("utf-8")
        header += struct.pack("<H", len(raw_name)) + raw_name
        header += struct.pack("<H", a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape)
        payload.append(a.tobytes())
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(bytes(header))
        for chunk in payload:
            fh.write(chunk)
    os.replace(tmp, path)
    return path


def read_arrays(path: str | Path) -> dict[str, np.ndarray]:
    buf = Path(path).read_bytes()
    if buf[:4] != MAGIC:
        raise CacheError(f"{path}: bad magic {buf[:4]!r}")
    try:
        version, n = struct.unpack_from("<HH", buf, 4)
        if version != VERSION:
            raise CacheError(f"{path}: unsupported cache version {version}")
        off = 8
        specs = []
        for _ in range(n):
            (ln,) = struct.unpack_from("<H", buf, off)
            off += 2
            name = buf[off : off + ln].decode("utf-8")
            off += ln
            (ndim,) = struct.unpack_from("<H", buf, off)
            off += 2
            shape = struct.unpack_from(f"<{ndim}I", buf, off)
            off += 4 * ndim
            specs.append((name, shape))
    except (struct.error, UnicodeDecodeError) as exc:
        raise CacheError(f"{path}: truncated or corrupt header ({exc})") from None
    out = {}
    for name, shape in specs:
        count = int(np.prod(shape)) if shape else 1
        end = off + 4 * count
        if end > len(buf):
            raise CacheError(f"{path}: truncated payload for {name!r}")
        out[name] = np.frombuffer(buf, dtype="<f4", count=count, offset=off).reshape(shape).copy()
        off = end
    if off != len(buf):
        raise CacheError(f"{path}: {len(buf) - off} trailing bytes")
    return out


def write_clip(path: str | Path, frames: np.ndarray, mfcc: np.ndarray) -> Path:
    """Store K windows: frames K x T x 3 x H x W and mfcc K x 3 x H_a x W_a."""
    if frames.ndim != 5 or mfcc.ndim != 4 or frames.shape[0] != mfcc.shape[0]:
        raise CacheError(f"inconsistent window shapes {frames.shape} / {mfcc.shape}")
    return write_arrays(path, {"frames": frames, "mfcc": mfcc})


def read_clip(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    arrays = read_arrays(path)
    try:
        return arrays["frames"], arrays["mfcc"]
    except KeyError as exc:
        raise CacheError(f"{path}: missing array {exc}") from None
