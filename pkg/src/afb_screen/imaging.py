"""Raster containers, PNG/PPM codecs and per-plane contrast stretching."""

from __future__ import annotations

import io
import re
import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import DimensionMismatch, MalformedFile, UnsupportedFormat

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def _frozen(arr):
    arr = np.ascontiguousarray(arr)
    if arr.flags.writeable:
        arr = arr.copy()
        arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RgbImage:
    """8-bit RGB raster, stored as a read-only ``(height, width, 3)`` uint8 array."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (h, w, 3) array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if arr.dtype != np.uint8:
            raise ValueError(f"expected uint8 data, got {arr.dtype}")
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def __eq__(self, other):
        if not isinstance(other, RgbImage):
            return NotImplemented
        return np.array_equal(self.data, other.data)


@dataclass(frozen=True, eq=False)
class ScalarImage:
    """Single-channel real raster, ``(height, width)`` float64."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"expected non-empty 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("scalar image contains NaN or infinity")
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Boolean raster, ``True`` marks foreground."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ValueError(f"expected 2-D array, got shape {arr.shape}")
        object.__setattr__(self, "data", _frozen(arr.astype(bool, copy=False)))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self):
        return self.data.shape

    def count(self) -> int:
        return int(self.data.sum())


@dataclass(frozen=True)
class ContrastStretchSpec:
    out_min: float = 0
    out_max: float = 255

    def __post_init__(self):
        if not self.out_min < self.out_max:
            raise ValueError("out_min must be below out_max")


def check_same_shape(*images):
    shapes = {img.shape for img in images}
    if len(shapes) != 1:
        raise DimensionMismatch(f"raster shapes differ: {sorted(shapes)}")


# --- codecs -----------------------------------------------------------------

def _decode_png(data: bytes) -> RgbImage:
    # IHDR is always first: length(4) type(4) width(4) height(4) depth(1) colour(1)
    if len(data) < 33 or data[12:16] != b"IHDR":
        raise MalformedFile("truncated or missing PNG header")
    width, height, depth, colour = struct.unpack(">IIBB", data[16:26])
    if colour != 2:
        raise UnsupportedFormat(f"PNG colour type {colour} is not RGB")
    if depth != 8:
        raise UnsupportedFormat(f"PNG bit depth {depth} is not 8")
    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            arr = np.array(im)
    except Exception as exc:  # Pillow raises a zoo of types for corrupt streams
        raise MalformedFile(f"cannot decode PNG: {exc}") from exc
    if arr.shape != (height, width, 3):
        raise MalformedFile("decoded PNG does not match its header")
    return RgbImage(arr.astype(np.uint8, copy=False))


_PPM_HEADER = re.compile(rb"P6(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)\s")


def _decode_ppm(data: bytes) -> RgbImage:
    m = _PPM_HEADER.match(data)
    if m is None:
        raise MalformedFile("bad PPM header")
    width, height, maxval = (int(g) for g in m.groups())
    if maxval > 255:
        raise UnsupportedFormat("16-bit PPM is not supported")
    if width < 1 or height < 1 or maxval < 1:
        raise MalformedFile("PPM dimensions or maxval out of range")
    body = data[m.end():]
    need = width * height * 3
    if len(body) < need:
        raise MalformedFile(f"PPM body truncated: {len(body)} of {need} bytes")
    arr = np.frombuffer(body[:need], dtype=np.uint8).reshape(height, width, 3)
    if maxval != 255:
        arr = np.floor(arr.astype(np.float64) * 255.0 / maxval + 0.5).astype(np.uint8)
    return RgbImage(arr)


def decode_image(data: bytes) -> RgbImage:
    """Decode an 8-bit RGB PNG or binary PPM (P6)."""
    if data[:8] == PNG_SIGNATURE:
        return _decode_png(data)
    if data[:2] == b"P6":
        return _decode_ppm(data)
    if data[:2] in (b"P1", b"P2", b"P3", b"P4", b"P5"):
        raise UnsupportedFormat("only binary RGB PPM (P6) is supported")
    if data[:4] == PNG_SIGNATURE[:4]:
        raise MalformedFile("truncated PNG signature")
    raise UnsupportedFormat("not a PNG or PPM file")


def encode_png(img: RgbImage) -> bytes:
    buf = io.BytesIO()
    # fixed compression level so output bytes are reproducible
    Image.fromarray(np.asarray(img.data), mode="RGB").save(buf, format="PNG", compress_level=6)
    return buf.getvalue()


def encode_ppm(img: RgbImage) -> bytes:
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.data.tobytes()


def read_image(path) -> RgbImage:
    with open(path, "rb") as fh:
        return decode_image(fh.read())


def write_png(path, img: RgbImage) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_png(img))


# --- planes -----------------------------------------------------------------

def split_planes(img: RgbImage):
    """Return the red, green and blue planes as ScalarImages."""
    d = img.data
    return tuple(ScalarImage(d[:, :, c].astype(np.float64)) for c in range(3))


def merge_planes(r: ScalarImage, g: ScalarImage, b: ScalarImage) -> RgbImage:
    check_same_shape(r, g, b)
    stacked = np.stack([r.data, g.data, b.data], axis=-1)
    if stacked.min() < 0 or stacked.max() > 255:
        raise ValueError("plane values must lie in [0, 255]")
    return RgbImage(np.floor(stacked + 0.5).astype(np.uint8))


def contrast_stretch(plane: ScalarImage, spec: ContrastStretchSpec = ContrastStretchSpec()) -> ScalarImage:
    """Linearly map the plane's [min, max] onto [spec.out_min, spec.out_max].

    Outputs are rounded half-up to integer levels. A constant plane has no
    contrast to stretch and is returned as is.
    """
    q = plane.data
    f_min = q.min()
    f_max = q.max()
    if f_max == f_min:
        return plane
    # multiply before dividing so integer inputs hit exact .5 ties
    p = np.floor((q - f_min) * (spec.out_max - spec.out_min) / (f_max - f_min) + spec.out_min + 0.5)
    # guard the top level against scale*(f_max-f_min) landing a ulp short
    np.clip(p, spec.out_min, spec.out_max, out=p)
    return ScalarImage(p)


def enhance(img: RgbImage, spec: ContrastStretchSpec = ContrastStretchSpec()) -> RgbImage:
    """Contrast-stretch each plane independently and re-assemble."""
    return merge_planes(*(contrast_stretch(p, spec) for p in split_planes(img)))
