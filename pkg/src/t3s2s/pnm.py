"""Minimal Netpbm (PGM P2/P5, PPM P3/P6) reading and writing, 8-bit only."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import IOFailure, ParseError

_WS = b" \t\r\n\v\f"


def _header(data: bytes, count: int) -> tuple[list[int], int]:
    """Read ``count`` integer header fields after the magic; return them and the body offset."""
    fields: list[int] = []
    pos = 2
    while len(fields) < count:
        while pos < len(data) and data[pos] in _WS:
            pos += 1
        if pos < len(data) and data[pos] == ord("#"):
            while pos < len(data) and data[pos] not in b"\r\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos] not in _WS and data[pos] != ord("#"):
            pos += 1
        tok = data[start:pos]
        if not tok:
            raise ParseError("truncated header")
        try:
            fields.append(int(tok))
        except ValueError:
            raise ParseError(f"bad header field {tok!r}") from None
    # exactly one whitespace byte separates the header from a binary body
    if pos < len(data) and data[pos] not in _WS:
        raise ParseError("missing whitespace after header")
    return fields, min(pos + 1, len(data))


def _read_bytes(path: str | Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc


def decode(data: bytes) -> np.ndarray:
    """Decode PGM (h, w) or PPM (h, w, 3) bytes to a uint8 array."""
    magic = data[:2]
    if magic not in (b"P2", b"P5", b"P3", b"P6"):
        raise ParseError(f"unsupported magic {magic!r}")
    (w, h, maxval), body = _header(data, 3)
    if w <= 0 or h <= 0:
        raise ParseError(f"bad dimensions {w}x{h}")
    if not 0 < maxval <= 255:
        raise ParseError(f"maxval {maxval} not in 1..255")
    channels = 3 if magic in (b"P3", b"P6") else 1
    size = w * h * channels
    if magic in (b"P5", b"P6"):
        raw = data[body:body + size]
        if len(raw) != size:
            raise ParseError(f"expected {size} data bytes, got {len(raw)}")
        arr = np.frombuffer(raw, dtype=np.uint8).copy()
    else:
        try:
            vals = [int(t) for t in data[body:].split()]
        except ValueError:
            raise ParseError("non-integer sample in ASCII body") from None
        if len(vals) != size:
            raise ParseError(f"expected {size} samples, got {len(vals)}")
        arr = np.asarray(vals, dtype=np.int64)
    if arr.max(initial=0) > maxval:
        raise ParseError("sample exceeds maxval")
    arr = arr.astype(np.uint8)
    return arr.reshape((h, w, 3) if channels == 3 else (h, w))


def read(path: str | Path) -> np.ndarray:
    try:
        return decode(_read_bytes(path))
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from None


def encode_pgm(img: np.ndarray, ascii: bool = False) -> bytes:
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError("PGM needs a 2-D array")
    h, w = img.shape
    if ascii:
        lines = [" ".join(str(int(v)) for v in row) for row in img]
        return f"P2\n{w} {h}\n255\n".encode() + "\n".join(lines).encode() + b"\n"
    return f"P5\n{w} {h}\n255\n".encode() + img.astype(np.uint8).tobytes()


def encode_ppm(img: np.ndarray) -> bytes:
    h, w, _ = img.shape
    return f"P6\n{w} {h}\n255\n".encode() + np.ascontiguousarray(img, dtype=np.uint8).tobytes()


def write(path: str | Path, data: bytes) -> None:
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc
