"""Grid types for 2D reference images and 3D volumes, phase encoding, and file I/O.

Phase encoding is fixed throughout the package: 0 = solid, 1 = pore.
Axis order is (L, H, W) = (z, y, x), row-major with x fastest; images are (H, W).

Two on-disk formats are supported:

- binary PGM (P5, maxval 255) for 2D images, thresholded at 128 on load;
- "MV01" for volumes: a 24-byte little-endian header followed by the voxels.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

# Pore fraction in [0, 1].
PhaseFraction = float

PGM_MAXVAL = 255
PORE_THRESHOLD = 128

MV01_MAGIC = b"MV01"
MV01_VERSION = 1
_MV01_HEADER = struct.Struct("<4sHHIIII")
_U32_MAX = 2**32 - 1

_PIXEL_SIZE_RE = re.compile(rb"pixel_size\s*=\s*([0-9.eE+-]+)")
_TOKEN_STOP = b"# \t\n\r\x0b\x0c"


class VolumeFormatError(Exception):
    pass


class VolumeMode(IntEnum):
    binary = 0
    continuous = 1


@dataclass(frozen=True)
class Image2D:
    """Binary 2D reference image, data shape (H, W) with values in {0, 1}."""

    data: np.ndarray
    pixel_size: float | None = None

    def __post_init__(self) -> None:
        data = np.asarray(self.data)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise VolumeFormatError(f"Image must be a non-empty 2D grid, got shape {data.shape}")
        if not np.isin(data, (0, 1)).all():
            raise VolumeFormatError("Image pixels must be 0 (solid) or 1 (pore)")
        data = data.astype(np.uint8, copy=True)
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])


@dataclass(frozen=True)
class Volume3D:
    """3D voxel grid stored as (L, H, W, C).

    Binary mode holds phase labels with C = 1; continuous mode holds finite
    float64 values with any channel count (network output has C = 3).
    """

    data: np.ndarray
    mode: VolumeMode = VolumeMode.binary

    def __post_init__(self) -> None:
        mode = VolumeMode(self.mode)
        data = np.asarray(self.data)
        if data.ndim == 3:
            data = data[..., np.newaxis]
        if data.ndim != 4 or min(data.shape) < 1:
            raise VolumeFormatError(
                f"Volume must be (L, H, W[, C]) and non-empty, got {data.shape}"
            )
        if mode is VolumeMode.binary:
            if data.shape[3] != 1:
                raise VolumeFormatError("Binary volumes have exactly one channel")
            if not np.isin(data, (0, 1)).all():
                raise VolumeFormatError("Binary voxels must be 0 (solid) or 1 (pore)")
            data = data.astype(np.uint8, copy=False)
        else:
            data = data.astype(np.float64, copy=False)
            if not np.isfinite(data).all():
                raise VolumeFormatError("Continuous volumes must hold finite values")
        # Read-only view; matching dtypes share the caller's buffer.
        data = data.view()
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "mode", mode)

    @classmethod
    def from_labels(cls, labels: np.ndarray) -> Volume3D:
        return cls(np.asarray(labels)[..., np.newaxis], VolumeMode.binary)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(d) for d in self.data.shape[:3])  # type: ignore[return-value]

    @property
    def channels(self) -> int:
        return int(self.data.shape[3])

    @property
    def labels(self) -> np.ndarray:
        """Phase labels as an (L, H, W) array; binary mode only."""
        if self.mode is not VolumeMode.binary:
            raise VolumeFormatError("Phase labels are only defined for binary volumes")
        return self.data[..., 0]


def grid_of(g: Image2D | Volume3D | np.ndarray) -> np.ndarray:
    """Return the phase-label array of a binary grid (2D or 3D)."""
    if isinstance(g, Image2D):
        return g.data
    if isinstance(g, Volume3D):
        return g.labels
    arr = np.asarray(g)
    if arr.ndim not in (2, 3) or arr.size == 0:
        raise VolumeFormatError(f"Expected a non-empty 2D or 3D grid, got shape {arr.shape}")
    if not np.isin(arr, (0, 1)).all():
        raise VolumeFormatError("Grid values must be 0 or 1")
    return arr.astype(np.uint8, copy=False)


def porosity(g: Image2D | Volume3D | np.ndarray) -> PhaseFraction:
    """Pore voxel count divided by total voxel count."""
    if isinstance(g, Volume3D) and g.mode is not VolumeMode.binary:
        raise VolumeFormatError("Porosity is undefined for continuous volumes")
    labels = grid_of(g)
    return int(np.count_nonzero(labels)) / labels.size


def complement(g: Image2D | Volume3D) -> Image2D | Volume3D:
    """Swap pore and solid phases."""
    if isinstance(g, Image2D):
        return Image2D(1 - g.data, pixel_size=g.pixel_size)
    return Volume3D.from_labels(1 - g.labels)


# -- PGM --


def _read_pgm_tokens(raw: bytes) -> tuple[list[bytes], int, float | None]:
    """Read the four header tokens; return them, the payload offset, and pixel size."""
    tokens: list[bytes] = []
    pixel_size: float | None = None
    pos = 0
    while len(tokens) < 4:
        if pos >= len(raw):
            raise VolumeFormatError("Malformed PGM header: unexpected end of file")
        ch = raw[pos : pos + 1]
        if ch == b"#":
            end = raw.find(b"\n", pos)
            if end < 0:
                raise VolumeFormatError("Malformed PGM header: unterminated comment")
            match = _PIXEL_SIZE_RE.search(raw[pos:end])
            if match:
                pixel_size = float(match.group(1))
            pos = end + 1
        elif ch.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(raw) and raw[pos : pos + 1] not in _TOKEN_STOP:
                pos += 1
            tokens.append(raw[start:pos])
    # Exactly one whitespace byte separates maxval from the raster.
    if pos >= len(raw) or not raw[pos : pos + 1].isspace():
        raise VolumeFormatError("Malformed PGM header: missing separator after maxval")
    return tokens, pos + 1, pixel_size


def load_image(path: Path | str) -> Image2D:
    """Load an 8-bit binary PGM; values >= 128 become pore."""
    raw = Path(path).read_bytes()
    if raw[:2] != b"P5":
        raise VolumeFormatError(f"{path}: only binary PGM (P5) is supported, got {raw[:2]!r}")
    tokens, offset, pixel_size = _read_pgm_tokens(raw)
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise VolumeFormatError(f"{path}: malformed PGM header") from exc
    if width < 1 or height < 1:
        raise VolumeFormatError(f"{path}: invalid PGM dimensions {width}x{height}")
    if maxval != PGM_MAXVAL:
        raise VolumeFormatError(f"{path}: PGM maxval must be {PGM_MAXVAL}, got {maxval}")
    payload = raw[offset : offset + width * height]
    if len(payload) < width * height:
        raise VolumeFormatError(
            f"{path}: truncated payload ({len(payload)} of {width * height} bytes)"
        )
    gray = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return Image2D((gray >= PORE_THRESHOLD).astype(np.uint8), pixel_size=pixel_size)


def save_image(image: Image2D, path: Path | str) -> None:
    """Write a binary P5 PGM with pore = 255, solid = 0."""
    header = b"P5\n"
    if image.pixel_size is not None:
        header += f"# pixel_size={image.pixel_size!r}\n".encode()
    header += f"{image.width} {image.height}\n255\n".encode()
    Path(path).write_bytes(header + (image.data * 255).astype(np.uint8).tobytes())


# -- MV01 --


def save_volume(volume: Volume3D, path: Path | str) -> None:
    """Write a volume in MV01 format."""
    dims = (*volume.dims, volume.channels)
    if any(d > _U32_MAX for d in dims):
        raise VolumeFormatError(f"Volume dimensions {dims} overflow the u32 header fields")
    header = _MV01_HEADER.pack(MV01_MAGIC, MV01_VERSION, int(volume.mode), *dims)
    if volume.mode is VolumeMode.binary:
        payload = volume.data.astype(np.uint8).tobytes(order="C")
    else:
        payload = volume.data.astype("<f8").tobytes(order="C")
    Path(path).write_bytes(header + payload)


def load_volume(path: Path | str) -> Volume3D:
    """Read an MV01 file written by :func:`save_volume`."""
    raw = Path(path).read_bytes()
    if len(raw) < _MV01_HEADER.size:
        raise VolumeFormatError(f"{path}: file shorter than the MV01 header")
    magic, version, mode, length, height, width, chans = _MV01_HEADER.unpack_from(raw)
    if magic != MV01_MAGIC:
        raise VolumeFormatError(f"{path}: bad magic {magic!r}, expected {MV01_MAGIC!r}")
    if version != MV01_VERSION:
        raise VolumeFormatError(f"{path}: unsupported MV01 version {version}")
    try:
        vmode = VolumeMode(mode)
    except ValueError as exc:
        raise VolumeFormatError(f"{path}: unknown volume mode {mode}") from exc
    dtype = np.dtype(np.uint8) if vmode is VolumeMode.binary else np.dtype("<f8")
    count = length * height * width * chans
    expected = count * dtype.itemsize
    payload = raw[_MV01_HEADER.size :]
    if len(payload) != expected:
        raise VolumeFormatError(
            f"{path}: payload is {len(payload)} bytes, header declares {expected}"
        )
    data = np.frombuffer(payload, dtype=dtype).reshape(length, height, width, chans)
    if vmode is VolumeMode.continuous:
        data = data.astype(np.float64)
    return Volume3D(data, vmode)
