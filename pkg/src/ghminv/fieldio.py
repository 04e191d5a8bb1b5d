"""Field serialization: raw-f32 container, CSV, and 8-bit RGB raster images.

Raw container layout: magic ``MCF1``, little-endian u32 M, N, extent[M],
f64 spacing, then the samples as little-endian f32 in C order with the
channel index fastest.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DimMismatchError, ParseError
from .field import MultiChannelField

_MAGIC = b"MCF1"


def save_raw(field: MultiChannelField, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        m, n = field.coord_dim, field.channel_dim
        fh.write(struct.pack("<2I", m, n))
        fh.write(struct.pack(f"<{m}I", *field.extent))
        fh.write(struct.pack("<d", field.spacing))
        fh.write(np.ascontiguousarray(field.data, dtype="<f4").tobytes())


def load_raw(path) -> MultiChannelField:
    blob = Path(path).read_bytes()
    if blob[:4] != _MAGIC:
        raise ParseError("bad magic, not an MCF1 container", offset=0)
    try:
        m, n = struct.unpack_from("<2I", blob, 4)
        extent = struct.unpack_from(f"<{m}I", blob, 12)
        (spacing,) = struct.unpack_from("<d", blob, 12 + 4 * m)
    except struct.error as exc:
        raise ParseError(f"truncated header: {exc}", offset=len(blob)) from exc
    header_len = 20 + 4 * m
    count = int(np.prod(extent)) * n
    expected = header_len + 4 * count
    if len(blob) != expected:
        raise ParseError(
            f"payload size mismatch: expected {expected} bytes, got {len(blob)}",
            offset=header_len,
        )
    data = np.frombuffer(blob, dtype="<f4", count=count, offset=header_len)
    return MultiChannelField(data.reshape(extent + (n,)).astype(np.float64), spacing)


def save_csv(field: MultiChannelField, path) -> None:
    m, n = field.coord_dim, field.channel_dim
    header = ",".join(str(v) for v in (m, n, *field.extent, repr(field.spacing)))
    rows = field.data.reshape(-1, n)
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_csv(path) -> MultiChannelField:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty file", line=1)
    head = lines[0].split(",")
    try:
        m, n = int(head[0]), int(head[1])
        extent = tuple(int(v) for v in head[2 : 2 + m])
        spacing = float(head[2 + m])
    except (ValueError, IndexError) as exc:
        raise ParseError(f"bad header: {exc}", line=1) from exc
    if len(head) != m + 3:
        raise DimMismatchError("header length inconsistent with M")
    count = int(np.prod(extent))
    if len(lines) - 1 != count:
        raise DimMismatchError(f"expected {count} sample rows, got {len(lines) - 1}")
    data = np.empty((count, n))
    for i, line in enumerate(lines[1:]):
        parts = line.split(",")
        if len(parts) != n:
            raise ParseError(f"expected {n} values", line=i + 2)
        try:
            data[i] = [float(v) for v in parts]
        except ValueError as exc:
            raise ParseError(str(exc), line=i + 2) from exc
    return MultiChannelField(data.reshape(extent + (n,)), spacing)


def load_image(path) -> MultiChannelField:
    """Decode an 8-bit RGB raster file to an M=2, N=3 field scaled to [0, 1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float64)
    return MultiChannelField(arr / 255.0)


def save_image(field: MultiChannelField, path) -> None:
    if field.coord_dim != 2 or field.channel_dim != 3:
        raise DimMismatchError("image export needs an M=2, N=3 field")
    arr = np.clip(np.rint(field.data * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path)


_FORMATS = {"raw": (load_raw, save_raw), "csv": (load_csv, save_csv), "image": (load_image, save_image)}


def _guess_format(path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix in (".mcf", ".raw", ".bin"):
        return "raw"
    if suffix == ".csv":
        return "csv"
    if suffix in (".png", ".bmp", ".tiff", ".tif"):
        return "image"
    raise ParseError(f"cannot infer format from suffix {suffix!r}", line=1)


def load_field(path, format: str | None = None) -> MultiChannelField:
    fmt = format or _guess_format(path)
    if fmt not in _FORMATS:
        raise ParseError(f"unknown format {fmt!r}", line=1)
    return _FORMATS[fmt][0](path)


def save_field(field: MultiChannelField, path, format: str | None = None) -> None:
    fmt = format or _guess_format(path)
    if fmt not in _FORMATS:
        raise ParseError(f"unknown format {fmt!r}", line=1)
    _FORMATS[fmt][1](field, path)
