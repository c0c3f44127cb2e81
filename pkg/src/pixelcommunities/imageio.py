"""Raster input, sRGB to CIELAB conversion and the plain-text label-map format.

Images are read from binary PPM (P6, 8-bit). Label maps are text files::

    width height
    id id id ...        (height lines of width integers)

Ground-truth segmentations use the same format.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RgbImage", "LabImage", "Labeling",
    "ImageFormatError", "PPMHeaderError", "PPMTruncatedError", "LabelMapError",
    "load_image", "write_ppm", "rgb_to_lab", "densify",
    "read_label_map", "write_label_map",
]

# sRGB (IEC 61966-2-1) linear RGB -> XYZ, D65
_SRGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
D65_WHITE = np.array([0.95047, 1.0, 1.08883])


class ImageFormatError(ValueError):
    """The file is not a decodable 8-bit binary PPM."""


class PPMHeaderError(ImageFormatError):
    pass


class PPMTruncatedError(ImageFormatError):
    pass


class LabelMapError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RgbImage:
    """8-bit sRGB raster, ``pixels`` has shape (height, width, 3)."""
    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 3 or p.shape[2] != 3 or p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError(f"expected a non-empty (H, W, 3) array, got shape {p.shape}")
        p = p.astype(np.uint8, copy=True)
        p.setflags(write=False)
        object.__setattr__(self, "pixels", p)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class LabImage:
    """CIELAB raster, ``pixels`` has shape (height, width, 3) holding (L, a, b)."""
    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.float64)
        if p.ndim != 3 or p.shape[2] != 3 or p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError(f"expected a non-empty (H, W, 3) array, got shape {p.shape}")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "pixels", p)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def size(self) -> int:
        return self.width * self.height


def densify(ids) -> np.ndarray:
    """Relabel ``ids`` to 0..k-1 in order of first occurrence (row-major)."""
    ids = np.asarray(ids)
    flat = ids.ravel()
    if flat.size == 0:
        return np.zeros(ids.shape, dtype=np.int64)
    uniq, first, inverse = np.unique(flat, return_index=True, return_inverse=True)
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(uniq))
    return rank[inverse.ravel()].reshape(ids.shape)


@dataclass(frozen=True, eq=False)
class Labeling:
    """Per-pixel region ids, dense in [0, region_count). ``ids`` is (height, width)."""
    ids: np.ndarray
    region_count: int

    def __post_init__(self):
        ids = np.asarray(self.ids)
        if ids.ndim != 2 or ids.shape[0] < 1 or ids.shape[1] < 1:
            raise ValueError(f"expected a non-empty 2-D id array, got shape {ids.shape}")
        ids = ids.astype(np.int64, copy=True)
        ids.setflags(write=False)
        object.__setattr__(self, "ids", ids)

    @classmethod
    def from_ids(cls, ids) -> "Labeling":
        dense = densify(ids)
        return cls(dense, int(dense.max()) + 1)

    @property
    def width(self) -> int:
        return self.ids.shape[1]

    @property
    def height(self) -> int:
        return self.ids.shape[0]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.ids.ravel(), minlength=self.region_count)

    def __eq__(self, other):
        if not isinstance(other, Labeling):
            return NotImplemented
        return self.region_count == other.region_count and np.array_equal(self.ids, other.ids)

    __hash__ = None


# --- PPM -------------------------------------------------------------------

def _read_header(data: bytes):
    """Parse "P6 <w> <h> <maxval>" with comments; return (w, h, maxval, offset)."""
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < 4:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= n:
            raise PPMHeaderError("header ended early")
        if data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        tokens.append(data[start:pos])
    if pos >= n or not data[pos:pos + 1].isspace():
        raise PPMHeaderError("missing whitespace after maxval")
    pos += 1  # exactly one whitespace byte precedes the raster
    magic, *nums = tokens
    if magic != b"P6":
        raise PPMHeaderError(f"unsupported magic number {magic!r}, expected b'P6'")
    try:
        w, h, maxval = (int(t) for t in nums)
    except ValueError:
        raise PPMHeaderError(f"non-integer header fields {nums!r}") from None
    if w < 1 or h < 1:
        raise PPMHeaderError(f"invalid dimensions {w}x{h}")
    if not 1 <= maxval <= 255:
        raise PPMHeaderError(f"maxval {maxval} is not 8-bit")
    return w, h, maxval, pos


def load_image(path) -> RgbImage:
    """Decode a binary P6 PPM file."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such image: {path}")
    with open(path, "rb") as f:
        data = f.read()
    w, h, maxval, offset = _read_header(data)
    need = w * h * 3
    raster = data[offset:offset + need]
    if len(raster) < need:
        raise PPMTruncatedError(
            f"{path}: expected {need} bytes of pixel data for {w}x{h}, found {len(raster)}")
    px = np.frombuffer(raster, dtype=np.uint8).reshape(h, w, 3)
    if maxval != 255:
        px = np.round(px.astype(np.float64) * (255.0 / maxval)).astype(np.uint8)
    return RgbImage(px)


def write_ppm(path, img: RgbImage) -> None:
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (img.width, img.height))
        f.write(np.ascontiguousarray(img.pixels, dtype=np.uint8).tobytes())


# --- color -----------------------------------------------------------------

def _lab_f(t):
    delta = 6.0 / 29.0
    return np.where(t > delta ** 3, np.cbrt(t), t / (3 * delta ** 2) + 4.0 / 29.0)


def rgb_to_lab(img: RgbImage) -> LabImage:
    """sRGB -> CIEXYZ -> CIELAB with the D65 reference white."""
    c = img.pixels.astype(np.float64) / 255.0
    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = lin @ _SRGB_TO_XYZ.T / D65_WHITE
    fx, fy, fz = (_lab_f(xyz[..., i]) for i in range(3))
    lab = np.stack([116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)], axis=-1)
    lab[..., 0] = np.clip(lab[..., 0], 0.0, 100.0)
    return LabImage(lab)


# --- label maps ------------------------------------------------------------

def read_label_map(path) -> Labeling:
    with open(path) as f:
        lines = [ln.split() for ln in f if ln.strip()]
    if not lines or len(lines[0]) != 2:
        raise LabelMapError(f"{path}: first line must be 'width height'")
    try:
        w, h = int(lines[0][0]), int(lines[0][1])
    except ValueError:
        raise LabelMapError(f"{path}: non-integer dimensions {lines[0]!r}") from None
    rows = lines[1:]
    if w < 1 or h < 1 or len(rows) != h:
        raise LabelMapError(f"{path}: header says {w}x{h} but found {len(rows)} rows")
    ids = np.empty((h, w), dtype=np.int64)
    for y, row in enumerate(rows):
        if len(row) != w:
            raise LabelMapError(f"{path}: row {y} has {len(row)} values, expected {w}")
        for x, tok in enumerate(row):
            if not tok.isdigit():
                raise LabelMapError(f"{path}: row {y} has non-integer token {tok!r}")
            ids[y, x] = int(tok)
    return Labeling.from_ids(ids)


def write_label_map(labeling: Labeling, path) -> None:
    with open(path, "w", newline="\n") as f:
        f.write(f"{labeling.width} {labeling.height}\n")
        for row in labeling.ids:
            f.write(" ".join(map(str, row.tolist())))
            f.write("\n")
