"""Flat binary parameter files.

Layout: magic ``SPCK1``, then per parameter: u32 name length, UTF-8 name,
u32 rank, rank x u32 dims, little-endian float64 payload.  All integers are
little-endian.  An optional trailing text field (u32 length + UTF-8) carries
metadata such as a parent checkpoint path.
"""

import struct

import numpy as np

from ..errors import DecodeError

MAGIC = b"SPCK1"
_META_TAG = b"\x00META"


def dumps(params, meta=None):
    """Serialize ``{name: array}`` (insertion order kept) and optional metadata text."""
    out = [MAGIC]
    for name, arr in params.items():
        arr = np.asarray(arr, dtype="<f8")
        raw = name.encode("utf-8")
        out.append(struct.pack("<I", len(raw)))
        out.append(raw)
        out.append(struct.pack("<I", arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(np.ascontiguousarray(arr).tobytes())
    if meta is not None:
        raw = meta.encode("utf-8")
        out.append(_META_TAG + struct.pack("<I", len(raw)) + raw)
    return b"".join(out)


def loads(blob):
    """Inverse of :func:`dumps`; returns (params dict, meta or None)."""
    if not blob.startswith(MAGIC):
        raise DecodeError("missing SPCK1 magic")
    pos = len(MAGIC)
    params, meta = {}, None

    def take(n):
        nonlocal pos
        if pos + n > len(blob):
            raise DecodeError("truncated checkpoint")
        chunk = blob[pos:pos + n]
        pos += n
        return chunk

    while pos < len(blob):
        if blob.startswith(_META_TAG, pos):
            pos += len(_META_TAG)
            (n,) = struct.unpack("<I", take(4))
            meta = take(n).decode("utf-8")
            continue
        (n,) = struct.unpack("<I", take(4))
        name = take(n).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        count = int(np.prod(dims, dtype=np.int64))
        arr = np.frombuffer(take(8 * count), dtype="<f8").reshape(dims).astype(np.float64)
        if name in params:
            raise DecodeError(f"duplicate parameter {name!r}")
        params[name] = arr
    return params, meta


def save(path, params, meta=None):
    with open(path, "wb") as fh:
        fh.write(dumps(params, meta))


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
