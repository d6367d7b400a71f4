"""Image loading and the in-memory raster type.

Supported input formats: 8-bit PNG (gray or RGB) and binary PGM/PPM
(P5/P6). Pixel intensities are normalized to [0, 1]. RGB images keep
their color planes and expose a derived grayscale plane computed with
fixed luma weights (0.299, 0.587, 0.114).
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import UnreadableImageError, UnsupportedFormatError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


@dataclass(frozen=True, eq=False)
class RasterImage:
    """Normalized raster: ``pixels`` is (height, width, channels) float32 in [0, 1]."""

    width: int
    height: int
    channels: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise UnreadableImageError(
                f"zero-dimension image: {self.width}x{self.height}")
        if self.channels not in (1, 3):
            raise UnsupportedFormatError(
                f"unsupported channel count {self.channels}")
        if self.pixels.shape != (self.height, self.width, self.channels):
            raise ValueError(
                f"pixel buffer shape {self.pixels.shape} does not match "
                f"{self.height}x{self.width}x{self.channels}")
        if self.pixels.size and (float(self.pixels.min()) < 0.0
                                 or float(self.pixels.max()) > 1.0):
            raise ValueError("pixel values outside [0, 1]")
        self.pixels.setflags(write=False)

    @cached_property
    def gray(self) -> np.ndarray:
        """Grayscale plane, (height, width) float32."""
        if self.channels == 1:
            return self.pixels[:, :, 0]
        r, g, b = LUMA_WEIGHTS
        plane = (r * self.pixels[:, :, 0] + g * self.pixels[:, :, 1]
                 + b * self.pixels[:, :, 2]).astype(np.float32)
        plane.setflags(write=False)
        return plane


def from_array(arr: np.ndarray) -> RasterImage:
    """Wrap a (h, w), (h, w, 1) or (h, w, 3) float array in [0, 1]."""
    a = np.asarray(arr, dtype=np.float32)
    if a.ndim == 2:
        a = a[:, :, np.newaxis]
    h, w, c = a.shape
    return RasterImage(width=w, height=h, channels=c, pixels=np.ascontiguousarray(a))


def _pnm_header_tokens(data: bytes, count: int) -> tuple[list[int], int]:
    """Read `count` integer tokens after the magic, skipping comments.

    Returns the tokens and the offset of the first pixel byte (one single
    whitespace character separates the header from binary data).
    """
    pos = 2
    tokens: list[int] = []
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            eol = data.find(b"\n", pos)
            if eol < 0:
                raise UnreadableImageError("malformed PGM/PPM header")
            pos = eol + 1
            continue
        m = re.match(rb"\d+", data[pos:])
        if m is None:
            raise UnreadableImageError("malformed PGM/PPM header")
        tokens.append(int(m.group()))
        pos += m.end()
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise UnreadableImageError("malformed PGM/PPM header")
    return tokens, pos + 1


def _parse_pnm(data: bytes) -> RasterImage:
    """Parse binary PGM (P5) or PPM (P6); samples normalized by maxval."""
    magic = data[:2]
    (width, height, maxval), body_start = _pnm_header_tokens(data, 3)
    if width <= 0 or height <= 0:
        raise UnreadableImageError(f"zero-dimension image: {width}x{height}")
    if maxval <= 0 or maxval > 65535:
        raise UnreadableImageError(f"invalid maxval {maxval}")
    channels = 1 if magic == b"P5" else 3
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    count = width * height * channels
    body = data[body_start:]
    if len(body) < count * dtype.itemsize:
        raise UnreadableImageError("truncated PGM/PPM pixel data")
    samples = np.frombuffer(body, dtype=dtype, count=count)
    pixels = (samples.astype(np.float32) / maxval).reshape(height, width, channels)
    return RasterImage(width=width, height=height, channels=channels,
                       pixels=np.ascontiguousarray(pixels))


def _parse_png(data: bytes) -> RasterImage:
    try:
        im = Image.open(io.BytesIO(data))
        im.load()
    except UnidentifiedImageError as exc:
        raise UnreadableImageError(f"cannot decode PNG: {exc}") from exc
    except OSError as exc:
        raise UnreadableImageError(f"cannot decode PNG: {exc}") from exc
    if im.mode == "L":
        channels = 1
    elif im.mode in ("RGB", "RGBA", "P", "LA", "1"):
        # palette/alpha variants collapse to plain RGB; gray stays single-plane
        im = im.convert("L") if im.mode == "1" else im.convert("RGB")
        channels = 1 if im.mode == "L" else 3
    else:
        raise UnsupportedFormatError(f"unsupported PNG mode {im.mode}")
    arr = np.asarray(im, dtype=np.float32) / 255.0
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    h, w = arr.shape[:2]
    return RasterImage(width=w, height=h, channels=channels,
                       pixels=np.ascontiguousarray(arr))


def decode_image(data: bytes) -> RasterImage:
    """Decode PNG/PGM/PPM bytes, sniffing the format from magic bytes."""
    if data.startswith(_PNG_MAGIC):
        return _parse_png(data)
    if data[:2] in (b"P5", b"P6"):
        return _parse_pnm(data)
    raise UnsupportedFormatError("unsupported image format (need PNG, PGM or PPM)")


def sniff_extension(data: bytes) -> str:
    if data.startswith(_PNG_MAGIC):
        return ".png"
    if data[:2] == b"P5":
        return ".pgm"
    if data[:2] == b"P6":
        return ".ppm"
    raise UnsupportedFormatError("unsupported image format (need PNG, PGM or PPM)")


def load_image(path) -> RasterImage:
    """Load and normalize an image file."""
    p = Path(path)
    try:
        data = p.read_bytes()
    except OSError as exc:
        raise UnreadableImageError(f"cannot read {p}: {exc}") from exc
    return decode_image(data)


def rgba_to_png_bytes(rgba: np.ndarray) -> bytes:
    """Encode an (h, w, 4) uint8 array as PNG."""
    if rgba.dtype != np.uint8 or rgba.ndim != 3 or rgba.shape[2] != 4:
        raise ValueError("expected (h, w, 4) uint8 array")
    im = Image.fromarray(rgba, mode="RGBA")
    buf = io.BytesIO()
    im.save(buf, format="PNG")
    return buf.getvalue()
