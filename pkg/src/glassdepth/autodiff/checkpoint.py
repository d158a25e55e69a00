"""Binary weight checkpoints.

Layout: the 6-byte magic ``TNETW1`` followed by one record per parameter
until end of file. Each record is::

    uint32 name_length | name (utf-8) | uint8 dtype_code | uint32 rank |
    uint32 dims[rank] | payload (little-endian, C order)

All integers are little-endian. Dtype codes: 0 = float32, 1 = float64.
"""

import struct

import numpy as np

from ..errors import FormatError

MAGIC = b"TNETW1"
_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODE_OF = {np.dtype("float32"): 0, np.dtype("float64"): 1}


def encode(params):
    """Serialize an ordered mapping ``name -> array`` to bytes."""
    chunks = [MAGIC]
    for name, value in params.items():
        arr = np.asarray(getattr(value, "data", value))
        code = _CODE_OF.get(arr.dtype)
        if code is None:
            raise TypeError(f"parameter {name!r} has unsupported dtype {arr.dtype}")
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<BI", code, arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype=_CODES[code]).tobytes())
    return b"".join(chunks)


def decode(blob, path=None):
    """Parse checkpoint bytes into a dict ``name -> np.ndarray`` (file order)."""
    if blob[:len(MAGIC)] != MAGIC:
        raise FormatError("bad checkpoint magic", offset=0, path=path)
    pos = len(MAGIC)
    out = {}

    def take(n, what):
        nonlocal pos
        if pos + n > len(blob):
            raise FormatError(f"truncated checkpoint while reading {what}", offset=pos, path=path)
        chunk = blob[pos:pos + n]
        pos += n
        return chunk

    while pos < len(blob):
        (name_len,) = struct.unpack("<I", take(4, "name length"))
        try:
            name = take(name_len, "name").decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError("parameter name is not utf-8", offset=pos - name_len,
                              path=path) from None
        code, rank = struct.unpack("<BI", take(5, "dtype/rank"))
        if code not in _CODES:
            raise FormatError(f"unknown dtype code {code}", offset=pos - 5, path=path)
        dims = struct.unpack(f"<{rank}I", take(4 * rank, "dims"))
        dtype = _CODES[code]
        count = int(np.prod(dims)) if rank else 1
        payload = take(count * dtype.itemsize, f"payload of {name!r}")
        out[name] = np.frombuffer(payload, dtype=dtype).reshape(dims).astype(dtype.newbyteorder("="))
    return out


def save(path, params):
    with open(path, "wb") as fh:
        fh.write(encode(params))


def load(path):
    with open(path, "rb") as fh:
        return decode(fh.read(), path=path)
