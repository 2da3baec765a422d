import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from diskchain.errors import DegenerateSnake
from diskchain.geometry import polyline_lengths
from diskchain.labelgen import SnakeDescriptor

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RasterImage:
    """8-bit image stored as (height, width, channels), channels 1 or 3."""

    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples)
        if arr.dtype != np.uint8:
            raise ValueError(f"Samples must be uint8, got {arr.dtype}")
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3) or arr.shape[0] <= 0 or arr.shape[1] <= 0:
            raise ValueError(f"Expected an (h, w, 1|3) image, got {arr.shape}")
        object.__setattr__(self, "samples", arr)

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def channels(self) -> int:
        return self.samples.shape[2]

    def __eq__(self, other) -> bool:
        if not isinstance(other, RasterImage):
            return NotImplemented
        return bool(np.array_equal(self.samples, other.samples))

    __hash__ = None  # type: ignore


def strip_geometry(snake: SnakeDescriptor, h: int, w: int):
    """Axis, radii, unit normals and arc lengths of a snake, centres clamped to the image."""
    c, r = snake.centers(), snake.radii()
    c = np.stack([np.clip(c[:, 0], 0, w), np.clip(c[:, 1], 0, h)], axis=1)
    keep = np.concatenate([[True], np.any(np.diff(c, axis=0) != 0, axis=1)])
    c, r = c[keep], r[keep]
    if len(c) < 2:
        raise DegenerateSnake("Rectification needs at least two distinct disk centres")
    tangents = np.gradient(c, axis=0)
    tangents /= np.hypot(tangents[:, 0], tangents[:, 1])[:, None]
    normals = np.stack([-tangents[:, 1], tangents[:, 0]], axis=1)
    return c, r, normals, polyline_lengths(c)


def rectify_instance(img: RasterImage, snake: SnakeDescriptor) -> RasterImage:
    """
    Unwarp a curved instance into a horizontal strip.

    The output is round(axis length) px wide and round(2 * median radius) px
    high (at least 2). Consecutive disk pairs bound quads
    (c_i - r_i n_i, c_i+1 - r_i+1 n_i+1, c_i+1 + r_i+1 n_i+1, c_i + r_i n_i)
    that map bilinearly onto adjacent column strips of the output; the top
    row follows the c - r n side.

    Args:
        img: Source image.
        snake: Disk chain of the instance, at least two disks.

    Returns:
        RasterImage: The rectified strip with the input's channel count.
    """
    c, r, n, s = strip_geometry(snake, img.height, img.width)
    length = s[-1]
    out_w = max(1, int(round(length)))
    out_h = max(2, int(round(2 * float(np.median(r)))))
    top = c - r[:, None] * n
    bottom = c + r[:, None] * n

    # arc length of every output column centre
    col_s = (np.arange(out_w) + 0.5) * length / out_w
    seg = np.clip(np.searchsorted(s, col_s, side="right") - 1, 0, len(s) - 2)
    u = ((col_s - s[seg]) / (s[seg + 1] - s[seg]))[None, :, None]
    v = ((np.arange(out_h) + 0.5) / out_h)[:, None, None]
    upper = (1 - u) * top[seg][None] + u * top[seg + 1][None]
    lower = (1 - u) * bottom[seg][None] + u * bottom[seg + 1][None]
    src = (1 - v) * upper + v * lower  # (out_h, out_w, 2) as (x, y)

    # map_coordinates indexes pixel centres at integers
    coords = [src[..., 1] - 0.5, src[..., 0] - 0.5]
    planes = [
        ndimage.map_coordinates(img.samples[:, :, k].astype(np.float64), coords, order=1, mode="nearest")
        for k in range(img.channels)
    ]
    out = np.clip(np.rint(np.stack(planes, axis=2)), 0, 255).astype(np.uint8)
    logger.debug(f"Rectified {len(c)} disks into a {out_w}x{out_h} strip")
    return RasterImage(out)
