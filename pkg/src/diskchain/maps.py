"""GeometryMaps, the TSM1 container and score-map binarization."""
import logging
import math
import pathlib
from dataclasses import dataclass
from typing import Union

import numpy as np

from diskchain.constants import CHANNEL_NAMES, TSM_CHANNELS, TSM_MAGIC, TSM_MAX_PIXELS
from diskchain.errors import (
    BadMagic,
    DimensionMismatch,
    DimensionOverflow,
    InvariantViolation,
    MapsFormatError,
    MapsIOError,
    ThresholdOutOfRange,
    UnsupportedChannels,
)
from diskchain.geometry import PixelMask

logger = logging.getLogger(__name__)

HEADER_DTYPE = np.dtype("<u4")
PLANE_DTYPE = np.dtype("<f4")
HEADER_SIZE = len(TSM_MAGIC) + 3 * HEADER_DTYPE.itemsize


@dataclass(frozen=True, eq=False)
class GeometryMaps:
    """
    Five per-pixel channels over an h x w grid.

    Values are float64 in memory and binary32 on disk, so only maps whose
    values are representable in binary32 survive a save/load bit-exactly.
    """

    tr: np.ndarray
    tcl: np.ndarray
    r: np.ndarray
    cos_t: np.ndarray
    sin_t: np.ndarray

    def __post_init__(self):
        shape = None
        for name in CHANNEL_NAMES:
            arr = np.array(getattr(self, name), dtype=np.float64)
            if arr.ndim != 2 or arr.shape[0] <= 0 or arr.shape[1] <= 0:
                raise ValueError(f"Channel {name} must be a non-empty 2D array, got {arr.shape}")
            if shape is None:
                shape = arr.shape
            elif arr.shape != shape:
                raise DimensionMismatch(f"Channel {name} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def zeros(cls, h: int, w: int) -> "GeometryMaps":
        return cls.from_stack(np.zeros((TSM_CHANNELS, h, w)))

    @classmethod
    def from_stack(cls, stack: np.ndarray) -> "GeometryMaps":
        if len(stack) != TSM_CHANNELS:
            raise UnsupportedChannels(f"Expected {TSM_CHANNELS} channels, got {len(stack)}")
        return cls(*stack)

    @property
    def height(self) -> int:
        return self.tr.shape[0]

    @property
    def width(self) -> int:
        return self.tr.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.tr.shape  # type: ignore

    def stack(self) -> np.ndarray:
        """Channels as a (5, h, w) array in on-disk order."""
        return np.stack([getattr(self, name) for name in CHANNEL_NAMES])

    def channels(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in CHANNEL_NAMES}

    def __eq__(self, other) -> bool:
        if not isinstance(other, GeometryMaps):
            return NotImplemented
        return self.shape == other.shape and all(
            np.array_equal(getattr(self, n), getattr(other, n), equal_nan=True)
            for n in CHANNEL_NAMES
        )

    __hash__ = None  # type: ignore

    def sample(self, x: float, y: float) -> tuple[float, float, float]:
        """
        Geometry at the pixel containing (x, y): radius, cos and sin.

        The orientation is re-normalized; a vector shorter than 1e-6 or with a
        non-finite component reads as theta = 0. A non-finite radius reads as 0.
        Points off the grid read as (0, 1, 0).
        """
        col, row = math.floor(x), math.floor(y)
        if not (0 <= row < self.height and 0 <= col < self.width):
            return 0.0, 1.0, 0.0
        c, s = float(self.cos_t[row, col]), float(self.sin_t[row, col])
        norm = math.hypot(c, s)
        if not math.isfinite(norm) or norm < 1e-6:
            c, s = 1.0, 0.0
        else:
            c, s = c / norm, s / norm
        r = float(self.r[row, col])
        return (r if math.isfinite(r) else 0.0), c, s


@dataclass(frozen=True)
class BinarizedMaps:
    tr_mask: PixelMask
    tcl_mask: PixelMask

    def __post_init__(self):
        if not self.tcl_mask.issubset(self.tr_mask):
            raise InvariantViolation("TCL mask must lie inside the TR mask")


def check_threshold(name: str, value: float) -> None:
    if not 0.0 < value < 1.0:
        raise ThresholdOutOfRange(f"{name} must be in (0, 1), got {value}")


def binarize(maps: GeometryMaps, t_tr: float, t_tcl: float) -> BinarizedMaps:
    """
    Threshold the score channels.

    Args:
        maps: Score and geometry maps.
        t_tr: TR threshold in (0, 1).
        t_tcl: TCL threshold in (0, 1).

    Returns:
        BinarizedMaps: TR mask and the TCL mask masked by TR.
    """
    check_threshold("t_tr", t_tr)
    check_threshold("t_tcl", t_tcl)
    tr_bits = maps.tr >= t_tr
    tcl_bits = (maps.tcl >= t_tcl) & tr_bits
    return BinarizedMaps(PixelMask(tr_bits), PixelMask(tcl_bits))


def encode_maps(maps: GeometryMaps) -> bytes:
    if maps.height * maps.width > TSM_MAX_PIXELS:
        raise DimensionOverflow(f"{maps.height}x{maps.width} exceeds {TSM_MAX_PIXELS} pixels")
    header = np.array([maps.height, maps.width, TSM_CHANNELS], dtype=HEADER_DTYPE)
    return TSM_MAGIC + header.tobytes() + maps.stack().astype(PLANE_DTYPE).tobytes()


def decode_maps(data: bytes) -> GeometryMaps:
    if len(data) < len(TSM_MAGIC):
        raise MapsIOError("Truncated magic", offset=len(data))
    if data[: len(TSM_MAGIC)] != TSM_MAGIC:
        raise BadMagic(f"Bad magic {data[:len(TSM_MAGIC)]!r}, expected {TSM_MAGIC!r}")
    if len(data) < HEADER_SIZE:
        raise MapsIOError("Truncated header", offset=len(data))
    h, w, c = (int(v) for v in np.frombuffer(data, HEADER_DTYPE, 3, len(TSM_MAGIC)))
    if c != TSM_CHANNELS:
        raise UnsupportedChannels(f"Expected {TSM_CHANNELS} channels, got {c}")
    if h == 0 or w == 0:
        raise MapsFormatError(f"Zero map dimension {h}x{w}")
    if h * w > TSM_MAX_PIXELS:
        raise DimensionOverflow(f"{h}x{w} exceeds {TSM_MAX_PIXELS} pixels")
    expected = HEADER_SIZE + c * h * w * PLANE_DTYPE.itemsize
    if len(data) < expected:
        raise MapsIOError(
            f"Truncated channel data, expected {expected} bytes", offset=len(data)
        )
    if len(data) > expected:
        raise MapsFormatError(f"{len(data) - expected} trailing bytes after channel data")
    planes = np.frombuffer(data, PLANE_DTYPE, c * h * w, HEADER_SIZE).reshape(c, h, w)
    return GeometryMaps.from_stack(planes.astype(np.float64))


def save_maps(maps: GeometryMaps, path: Union[str, pathlib.Path]) -> None:
    pathlib.Path(path).write_bytes(encode_maps(maps))
    logger.debug(f"Wrote {maps.height}x{maps.width} maps to {path}")


def load_maps(path: Union[str, pathlib.Path]) -> GeometryMaps:
    return decode_maps(pathlib.Path(path).read_bytes())
