"""Readers and writers for depth (PFM), mask/RGB (PGM/PPM) and mesh (OBJ) files."""

import re

import numpy as np

from ..errors import FormatError

_TOKEN = re.compile(rb"\S+")


def _header_tokens(blob, count, path):
    """Read ``count`` whitespace-separated header tokens; returns (tokens, data_offset).

    The data starts after exactly one whitespace byte following the last token.
    """
    tokens = []
    pos = 0
    while len(tokens) < count:
        m = _TOKEN.search(blob, pos)
        if m is None:
            raise FormatError("truncated header", offset=len(blob), path=path)
        tokens.append((m.group(), m.start()))
        pos = m.end()
    if pos >= len(blob) or blob[pos:pos + 1] not in b" \t\r\n":
        raise FormatError("header not terminated by whitespace", offset=pos, path=path)
    return tokens, pos + 1


def _int_token(token, what, path):
    value, offset = token
    try:
        n = int(value)
    except ValueError:
        raise FormatError(f"bad {what} {value!r}", offset=offset, path=path) from None
    if n < 0:
        raise FormatError(f"negative {what}", offset=offset, path=path)
    return n


# -- PFM ---------------------------------------------------------------------

def encode_pfm(depth):
    """Single-channel little-endian PFM; rows stored bottom to top."""
    depth = np.asarray(depth, dtype=np.float32)
    if depth.ndim != 2:
        raise ValueError(f"PFM depth must be 2-D, got {depth.shape}")
    h, w = depth.shape
    header = f"Pf\n{w} {h}\n-1.0\n".encode("ascii")
    return header + np.ascontiguousarray(depth[::-1], dtype="<f4").tobytes()


def decode_pfm(blob, path=None):
    if blob[:2] != b"Pf":
        raise FormatError("bad PFM magic (expected 'Pf')", offset=0, path=path)
    tokens, start = _header_tokens(blob, 4, path)
    w = _int_token(tokens[1], "width", path)
    h = _int_token(tokens[2], "height", path)
    try:
        scale = float(tokens[3][0])
    except ValueError:
        raise FormatError(f"bad PFM scale {tokens[3][0]!r}", offset=tokens[3][1],
                          path=path) from None
    if scale == 0:
        raise FormatError("PFM scale must be nonzero", offset=tokens[3][1], path=path)
    dtype = "<f4" if scale < 0 else ">f4"
    need = w * h * 4
    if len(blob) - start < need:
        raise FormatError(f"truncated PFM payload: need {need} bytes, have {len(blob) - start}",
                          offset=len(blob), path=path)
    if len(blob) - start > need:
        raise FormatError("trailing bytes after PFM payload", offset=start + need, path=path)
    data = np.frombuffer(blob, dtype=dtype, count=w * h, offset=start).reshape(h, w)
    return data[::-1].astype(np.float32)


# -- PGM / PPM ---------------------------------------------------------------

def encode_pnm(image):
    """8-bit P5 (H x W) or P6 (H x W x 3) image."""
    image = np.asarray(image)
    if image.dtype != np.uint8:
        if image.size and (image.min() < 0 or image.max() > 255):
            raise ValueError("8-bit image values must lie in [0, 255]")
        image = image.astype(np.uint8)
    if image.ndim == 2:
        magic = b"P5"
    elif image.ndim == 3 and image.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"unsupported image shape {image.shape}")
    h, w = image.shape[:2]
    return magic + f"\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(image).tobytes()


def decode_pnm(blob, path=None, expect=None):
    magic = blob[:2]
    if magic not in (b"P5", b"P6") or (expect is not None and magic != expect):
        want = expect.decode() if expect else "P5/P6"
        raise FormatError(f"bad image magic {magic!r} (expected {want})", offset=0, path=path)
    tokens, start = _header_tokens(blob, 4, path)
    w = _int_token(tokens[1], "width", path)
    h = _int_token(tokens[2], "height", path)
    maxval = _int_token(tokens[3], "maxval", path)
    if maxval != 255:
        raise FormatError(f"only 8-bit images are supported (maxval {maxval})",
                          offset=tokens[3][1], path=path)
    channels = 1 if magic == b"P5" else 3
    need = w * h * channels
    if len(blob) - start < need:
        raise FormatError(f"truncated image payload: need {need} bytes, have {len(blob) - start}",
                          offset=len(blob), path=path)
    if len(blob) - start > need:
        raise FormatError("trailing bytes after image payload", offset=start + need, path=path)
    data = np.frombuffer(blob, dtype=np.uint8, count=need, offset=start)
    shape = (h, w) if channels == 1 else (h, w, 3)
    return data.reshape(shape).copy()


# -- OBJ ---------------------------------------------------------------------

def encode_obj(vertices, triangles):
    """OBJ with only ``v`` and triangular ``f`` lines (1-based indices)."""
    lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in np.asarray(vertices, dtype=np.float64).tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in np.asarray(triangles, dtype=np.int64).tolist()]
    return ("\n".join(lines) + "\n").encode("ascii")


def decode_obj(blob, path=None):
    """Parse the OBJ subset; any other statement is rejected.

    ``FormatError.offset`` is the byte offset of the offending line.
    """
    vertices, faces = [], []
    offset = 0
    for raw in blob.split(b"\n"):
        line_offset = offset
        offset += len(raw) + 1
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == b"v" and len(parts) == 4:
                vertices.append([float(p) for p in parts[1:]])
                continue
            if parts[0] == b"f" and len(parts) == 4:
                faces.append([int(p) - 1 for p in parts[1:]])
                continue
        except ValueError:
            raise FormatError(f"malformed OBJ statement {line[:40]!r}", offset=line_offset,
                              path=path) from None
        raise FormatError(f"unsupported OBJ statement {line[:40]!r}", offset=line_offset,
                          path=path)
    v = np.array(vertices, dtype=np.float64).reshape(-1, 3)
    f = np.array(faces, dtype=np.int64).reshape(-1, 3)
    if f.size and (f.min() < 0 or f.max() >= len(v)):
        raise FormatError("OBJ face index out of range", path=path)
    return v, f


# -- file helpers --------------------------------------------------------------

def _read(path):
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except FileNotFoundError:
        raise FileNotFoundError(f"missing file: {path}") from None


def _write(path, blob):
    with open(path, "wb") as fh:
        fh.write(blob)


def read_depth(path):
    return decode_pfm(_read(path), path=path).astype(np.float64)


def write_depth(path, depth):
    _write(path, encode_pfm(depth))


def read_mask(path):
    return decode_pnm(_read(path), path=path, expect=b"P5")


def write_mask(path, mask):
    _write(path, encode_pnm(mask))


def read_rgb(path):
    return decode_pnm(_read(path), path=path, expect=b"P6")


def write_rgb(path, rgb):
    _write(path, encode_pnm(rgb))


def read_obj(path):
    return decode_obj(_read(path), path=path)


def write_obj(path, vertices, triangles):
    _write(path, encode_obj(vertices, triangles))
