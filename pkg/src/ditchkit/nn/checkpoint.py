"""Model checkpoints (.dkpt): named float32 blobs with a payload CRC.

Layout, little-endian:

    magic "DKPT" | u32 version | u32 n_params
    per param: u16 name length | utf-8 name | u8 ndim | u32 dims...
               | f32 data (C order)
    trailer:   u32 CRC32 over all data blobs

Architecture metadata travels in a JSON sidecar next to the file
(`<path>.json`), keeping the binary format parameter-only.
"""

from __future__ import annotations

import json
import os
import struct
import zlib

import numpy as np

from ..errors import ChecksumError, MagicError, TruncatedError, VersionError

DKPT_MAGIC = b"DKPT"
DKPT_VERSION = 1


def save_dkpt(arrays: dict, path, meta: dict | None = None) -> None:
    names = sorted(arrays)
    crc = 0
    with open(path, "wb") as fh:
        fh.write(DKPT_MAGIC)
        fh.write(struct.pack("<II", DKPT_VERSION, len(names)))
        for name in names:
            arr = np.ascontiguousarray(arrays[name], dtype="<f4")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            blob = arr.tobytes()
            crc = zlib.crc32(blob, crc)
            fh.write(blob)
        fh.write(struct.pack("<I", crc & 0xFFFFFFFF))
    if meta is not None:
        with open(f"{path}.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_dkpt(path):
    """Returns (arrays, meta); meta is {} without a sidecar."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != DKPT_MAGIC:
        raise MagicError(f"{path}: not a DKPT file")
    off = 4
    version, count = struct.unpack_from("<II", blob, off)
    off += 8
    if version != DKPT_VERSION:
        raise VersionError(f"{path}: unsupported DKPT version {version}")
    arrays = {}
    crc = 0
    for _ in range(count):
        if off + 2 > len(blob):
            raise TruncatedError(f"{path}: truncated name header")
        (nlen,) = struct.unpack_from("<H", blob, off)
        off += 2
        name = blob[off:off + nlen].decode("utf-8")
        off += nlen
        (ndim,) = struct.unpack_from("<B", blob, off)
        off += 1
        shape = struct.unpack_from(f"<{ndim}I", blob, off)
        off += 4 * ndim
        n_bytes = int(np.prod(shape, dtype=np.int64)) * 4 if ndim else 4
        if off + n_bytes > len(blob):
            raise TruncatedError(f"{path}: truncated data for {name!r}")
        raw = blob[off:off + n_bytes]
        off += n_bytes
        crc = zlib.crc32(raw, crc)
        arrays[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    if off + 4 > len(blob):
        raise TruncatedError(f"{path}: missing trailer")
    (crc_stored,) = struct.unpack_from("<I", blob, off)
    if crc_stored != crc & 0xFFFFFFFF:
        raise ChecksumError(f"{path}: parameter CRC mismatch")
    meta = {}
    sidecar = f"{path}.json"
    if os.path.exists(sidecar):
        with open(sidecar) as fh:
            meta = json.load(fh)
    return arrays, meta
