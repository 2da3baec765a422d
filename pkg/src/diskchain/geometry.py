"""
Coordinate-level primitives shared by every other module.

Coordinates are continuous pixel units with the origin at the top-left corner,
x to the right and y downwards. Pixel (i, j) (row i, column j) covers the unit
square [j, j + 1) x [i, i + 1) and is represented by its centre
(j + 0.5, i + 0.5): every rasterization in this package decides membership
from pixel centres.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, NamedTuple, Optional, Sequence, Union

import cv2
import numpy as np

from diskchain.errors import (
    DegenerateInput,
    DegeneratePolygon,
    DimensionMismatch,
    EmptyInput,
)

logger = logging.getLogger(__name__)

AREA_EPS = 1e-12


class Point2(NamedTuple):
    x: float
    y: float


PointsLike = Union[np.ndarray, Sequence[Sequence[float]], Sequence[Point2]]


def as_points(points: PointsLike) -> np.ndarray:
    """Convert a point sequence to a finite float64 array of shape (n, 2)."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.size == 0:
        return arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"Expected points of shape (n, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("Point coordinates must be finite")
    return arr


def canonical_angle(theta: float) -> float:
    """Reduce an undirected angle to [0, pi)."""
    t = math.fmod(theta, math.pi)
    if t < 0:
        t += math.pi
    if t >= math.pi - 1e-12:
        t = 0.0
    return t + 0.0


def cross2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def signed_area(vertices: np.ndarray) -> float:
    """Shoelace area; positive means clockwise on screen (y points down)."""
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


class Orientation(Enum):
    CLOCKWISE = 1
    COUNTERCLOCKWISE = -1
    DEGENERATE = 0


@dataclass(frozen=True, eq=False)
class Polygon:
    """
    A closed polygon; the last vertex connects back to the first.

    The winding (as seen on screen) is recorded at construction time. Zero
    area polygons can be built, but every operation that needs an interior
    rejects them.
    """

    vertices: np.ndarray
    orientation: Orientation = field(init=False)

    def __post_init__(self):
        v = as_points(self.vertices)
        if len(v) < 3:
            raise DegeneratePolygon(f"A polygon needs >= 3 vertices, got {len(v)}")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        area = signed_area(v)
        if abs(area) < AREA_EPS:
            orientation = Orientation.DEGENERATE
        elif area > 0:
            orientation = Orientation.CLOCKWISE
        else:
            orientation = Orientation.COUNTERCLOCKWISE
        object.__setattr__(self, "orientation", orientation)

    def __len__(self) -> int:
        return len(self.vertices)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polygon):
            return NotImplemented
        return bool(np.array_equal(self.vertices, other.vertices))

    __hash__ = None  # type: ignore

    @property
    def area(self) -> float:
        return abs(signed_area(self.vertices))

    def edges(self) -> np.ndarray:
        """Edge vectors; edge i runs from vertex i to vertex i + 1."""
        return np.roll(self.vertices, -1, axis=0) - self.vertices

    def edge_lengths(self) -> np.ndarray:
        return np.hypot(*self.edges().T)

    def reversed(self) -> "Polygon":
        return Polygon(self.vertices[::-1].copy())

    def rolled(self, k: int) -> "Polygon":
        return Polygon(np.roll(self.vertices, -k, axis=0))

    def translated(self, dx: float, dy: float) -> "Polygon":
        return Polygon(self.vertices + np.array([dx, dy]))

    def to_list(self) -> list[list[float]]:
        return [[float(x), float(y)] for x, y in self.vertices]


@dataclass(frozen=True, eq=False)
class PixelMask:
    """Binary occupancy grid of shape (height, width), row-major."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.ndim != 2 or bits.shape[0] <= 0 or bits.shape[1] <= 0:
            raise ValueError(f"Mask dimensions must be positive, got {bits.shape}")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @classmethod
    def empty(cls, h: int, w: int) -> "PixelMask":
        check_dims(h, w)
        return cls(np.zeros((h, w), dtype=bool))

    @classmethod
    def from_pixels(cls, rows, cols, h: int, w: int) -> "PixelMask":
        bits = np.zeros((h, w), dtype=bool)
        bits[np.asarray(rows, dtype=int), np.asarray(cols, dtype=int)] = True
        return cls(bits)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape  # type: ignore

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def any(self) -> bool:
        return bool(self.bits.any())

    def coords(self) -> np.ndarray:
        """(row, col) of every set pixel in raster order."""
        return np.argwhere(self.bits)

    def contains(self, x: float, y: float) -> bool:
        """True if the pixel containing the continuous point (x, y) is set."""
        if not (math.isfinite(x) and math.isfinite(y)):
            return False
        col, row = math.floor(x), math.floor(y)
        if 0 <= row < self.height and 0 <= col < self.width:
            return bool(self.bits[row, col])
        return False

    def contains_many(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        cols = np.floor(xs).astype(np.int64)
        rows = np.floor(ys).astype(np.int64)
        ok = (rows >= 0) & (rows < self.height) & (cols >= 0) & (cols < self.width)
        out = np.zeros(cols.shape, dtype=bool)
        out[ok] = self.bits[rows[ok], cols[ok]]
        return out

    def _check_same(self, other: "PixelMask") -> None:
        if self.shape != other.shape:
            raise DimensionMismatch(f"Mask shapes differ: {self.shape} vs {other.shape}")

    def __and__(self, other: "PixelMask") -> "PixelMask":
        self._check_same(other)
        return PixelMask(self.bits & other.bits)

    def __or__(self, other: "PixelMask") -> "PixelMask":
        self._check_same(other)
        return PixelMask(self.bits | other.bits)

    def __invert__(self) -> "PixelMask":
        return PixelMask(~self.bits)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PixelMask):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.bits, other.bits))

    __hash__ = None  # type: ignore

    def issubset(self, other: "PixelMask") -> bool:
        self._check_same(other)
        return not bool((self.bits & ~other.bits).any())


@dataclass(frozen=True)
class RotatedRect:
    """Rotated rectangle; `width` is the long side and `angle` its direction."""

    center: Point2
    width: float
    height: float
    angle: float

    @property
    def area(self) -> float:
        return self.width * self.height

    def corners(self) -> np.ndarray:
        """The four corners, in order, as a (4, 2) array."""
        u = np.array([math.cos(self.angle), math.sin(self.angle)])
        n = np.array([-u[1], u[0]])
        c = np.array(self.center)
        hw, hh = self.width / 2, self.height / 2
        return np.stack(
            [c - hw * u - hh * n, c + hw * u - hh * n, c + hw * u + hh * n, c - hw * u + hh * n]
        )

    def to_dict(self) -> dict:
        return {
            "center": [float(self.center.x), float(self.center.y)],
            "width": float(self.width),
            "height": float(self.height),
            "angle": float(self.angle),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RotatedRect":
        return cls(Point2(*map(float, d["center"])), float(d["width"]), float(d["height"]), float(d["angle"]))


@dataclass(frozen=True)
class Disk:
    """One element of a snake: centre, radius (half the local width), tangent."""

    center: Point2
    radius: float
    theta: float = 0.0

    def __post_init__(self):
        if not isinstance(self.center, Point2):
            object.__setattr__(self, "center", Point2(*map(float, self.center)))
        if not (math.isfinite(self.center.x) and math.isfinite(self.center.y)):
            raise ValueError("Disk centre must be finite")
        if not (math.isfinite(self.radius) and self.radius >= 0):
            raise ValueError(f"Disk radius must be finite and >= 0, got {self.radius}")
        object.__setattr__(self, "theta", canonical_angle(float(self.theta)))


def check_dims(h: int, w: int) -> None:
    if h <= 0 or w <= 0:
        raise ValueError(f"Grid dimensions must be positive, got {h}x{w}")


def _mark_boundary_centers(bits: np.ndarray, v: np.ndarray) -> None:
    """Set pixels whose centre lies on a vertex or a horizontal edge."""
    h, w = bits.shape
    for x, y in v:
        col, row = x - 0.5, y - 0.5
        if col.is_integer() and row.is_integer() and 0 <= row < h and 0 <= col < w:
            bits[int(row), int(col)] = True
    nxt = np.roll(v, -1, axis=0)
    for (x0, y0), (x1, _) in zip(v, nxt):
        row = y0 - 0.5
        if y0 != _ or not row.is_integer() or not 0 <= row < h:
            continue
        lo, hi = min(x0, x1), max(x0, x1)
        c0 = max(0, math.ceil(lo - 0.5))
        c1 = min(w - 1, math.floor(hi - 0.5))
        if c0 <= c1:
            bits[int(row), c0 : c1 + 1] = True


def rasterize_polygon(poly: Polygon, h: int, w: int) -> PixelMask:
    """
    Rasterize a polygon with the even-odd rule at pixel centres.

    A pixel is set iff its centre lies inside the polygon or on its boundary.
    Parts of the polygon outside the grid are clipped.

    Args:
        poly: The polygon to fill.
        h: Grid height in pixels.
        w: Grid width in pixels.

    Returns:
        PixelMask: The filled mask.
    """
    check_dims(h, w)
    v = poly.vertices
    if len(v) < 3 or abs(signed_area(v)) < AREA_EPS:
        raise DegeneratePolygon("Cannot rasterize a polygon with zero area")
    bits = np.zeros((h, w), dtype=bool)
    x0, y0 = v[:, 0], v[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)

    row_lo = max(0, math.floor(float(y0.min()) - 0.5))
    row_hi = min(h - 1, math.ceil(float(y0.max()) - 0.5))
    if row_lo <= row_hi:
        ys = np.arange(row_lo, row_hi + 1, dtype=np.float64)[:, None] + 0.5
        # Half-open rule so a vertex on a scanline is counted once.
        crosses = ((y0 <= ys) & (ys < y1)) | ((y1 <= ys) & (ys < y0))
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (ys - y0) / (y1 - y0)
            xs = np.where(crosses, x0 + t * (x1 - x0), np.inf)
        xs.sort(axis=1)
        counts = crosses.sum(axis=1)
        centers = np.arange(w, dtype=np.float64) + 0.5
        for k in np.flatnonzero(counts):
            xr = xs[k, : counts[k]]
            right = np.searchsorted(xr, centers, side="right")
            left = np.searchsorted(xr, centers, side="left")
            bits[row_lo + k] = (right % 2 == 1) | (left % 2 == 1)
    _mark_boundary_centers(bits, v)
    return PixelMask(bits)


def mask_iou(a: PixelMask, b: PixelMask) -> float:
    """Intersection over union of two masks; 0 when both are empty."""
    if a.shape != b.shape:
        raise DimensionMismatch(f"Mask shapes differ: {a.shape} vs {b.shape}")
    union = np.count_nonzero(a.bits | b.bits)
    if union == 0:
        return 0.0
    return np.count_nonzero(a.bits & b.bits) / union


def convex_hull(points: PointsLike) -> np.ndarray:
    """Monotone-chain convex hull without collinear points."""
    pts = np.unique(as_points(points), axis=0)  # lexicographic sort
    if len(pts) <= 2:
        return pts

    def half(seq):
        chain: list[np.ndarray] = []
        for p in seq:
            while len(chain) >= 2 and cross2(chain[-1] - chain[-2], p - chain[-2]) <= 0:
                chain.pop()
            chain.append(p)
        return chain

    lower = half(pts)
    upper = half(pts[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    if len(hull) < 2:
        # all collinear: keep the two extremes
        return np.array([pts[0], pts[-1]])
    return hull


def min_area_rect(points: PointsLike) -> RotatedRect:
    """
    Minimum-area enclosing rectangle by rotating calipers over the hull.

    A single point (or coincident points) yields a zero-size rectangle and
    collinear points a zero-height one.
    """
    pts = as_points(points)
    if len(pts) == 0:
        raise EmptyInput("min_area_rect needs at least one point")
    hull = convex_hull(pts)
    if len(hull) == 1:
        return RotatedRect(Point2(*map(float, hull[0])), 0.0, 0.0, 0.0)
    if len(hull) == 2:
        d = hull[1] - hull[0]
        mid = (hull[0] + hull[1]) / 2
        return RotatedRect(
            Point2(*map(float, mid)),
            float(np.hypot(*d)),
            0.0,
            canonical_angle(math.atan2(d[1], d[0])),
        )

    edges = np.roll(hull, -1, axis=0) - hull
    units = edges / np.hypot(edges[:, 0], edges[:, 1])[:, None]
    normals = np.stack([-units[:, 1], units[:, 0]], axis=1)
    pu = hull @ units.T  # (hull points, candidate edges)
    pn = hull @ normals.T
    u_lo, u_hi = pu.min(axis=0), pu.max(axis=0)
    n_lo, n_hi = pn.min(axis=0), pn.max(axis=0)
    areas = (u_hi - u_lo) * (n_hi - n_lo)
    i = int(np.argmin(areas))

    center = units[i] * (u_lo[i] + u_hi[i]) / 2 + normals[i] * (n_lo[i] + n_hi[i]) / 2
    width, height = float(u_hi[i] - u_lo[i]), float(n_hi[i] - n_lo[i])
    angle = math.atan2(units[i, 1], units[i, 0])
    if height > width:
        width, height = height, width
        angle += math.pi / 2
    return RotatedRect(Point2(*map(float, center)), width, height, canonical_angle(angle))


def fit_direction(points: PointsLike) -> float:
    """Direction in [0, pi) of the total-least-squares line through points."""
    pts = as_points(points)
    if len(pts) < 2 or float(np.ptp(pts, axis=0).max()) == 0.0:
        raise DegenerateInput("fit_direction needs at least two distinct points")
    centered = pts - pts.mean(axis=0)
    _, vecs = np.linalg.eigh(centered.T @ centered)
    d = vecs[:, -1]  # eigenvalues ascend
    return canonical_angle(math.atan2(d[1], d[0]))


def disks_union_bits(
    centers: np.ndarray, radii: np.ndarray, h: int, w: int, out: Optional[np.ndarray] = None
) -> np.ndarray:
    """Array version of `disks_union_mask`; ORs into `out` when given."""
    bits = np.zeros((h, w), dtype=bool) if out is None else out
    for (cx, cy), r in zip(np.asarray(centers, dtype=np.float64), np.asarray(radii, dtype=np.float64)):
        if not r > 0:
            continue
        c0 = max(0, math.floor(cx - r - 0.5))
        c1 = min(w - 1, math.ceil(cx + r - 0.5))
        r0 = max(0, math.floor(cy - r - 0.5))
        r1 = min(h - 1, math.ceil(cy + r - 0.5))
        if c0 > c1 or r0 > r1:
            continue
        dx = np.arange(c0, c1 + 1, dtype=np.float64) + 0.5 - cx
        dy = np.arange(r0, r1 + 1, dtype=np.float64) + 0.5 - cy
        bits[r0 : r1 + 1, c0 : c1 + 1] |= dy[:, None] ** 2 + dx[None, :] ** 2 <= r * r
    return bits


def disks_union_mask(disks: Iterable[Disk], h: int, w: int) -> PixelMask:
    """Pixels whose centre is within `radius` of at least one disk centre."""
    check_dims(h, w)
    disks = list(disks)
    if not disks:
        return PixelMask.empty(h, w)
    centers = np.array([d.center for d in disks], dtype=np.float64)
    radii = np.array([d.radius for d in disks], dtype=np.float64)
    return PixelMask(disks_union_bits(centers, radii, h, w))


def polyline_lengths(points: np.ndarray) -> np.ndarray:
    """Cumulative arc length at every vertex of an open polyline."""
    seg = np.hypot(*np.diff(points, axis=0).T) if len(points) > 1 else np.zeros(0)
    return np.concatenate([[0.0], np.cumsum(seg)])


def resample_polyline(points: np.ndarray, n: int) -> np.ndarray:
    """`n` points spaced uniformly in arc length along an open polyline."""
    points = as_points(points)
    s = polyline_lengths(points)
    targets = np.linspace(0.0, s[-1], n)
    return np.stack(
        [np.interp(targets, s, points[:, 0]), np.interp(targets, s, points[:, 1])], axis=1
    )


def segments_intersect(p1, p2, q1, q2) -> np.ndarray:
    """Element-wise closed-segment intersection test for arrays of segments."""
    r, s = p2 - p1, q2 - q1
    d1 = cross2(s, p1 - q1)
    d2 = cross2(s, p2 - q1)
    d3 = cross2(r, q1 - p1)
    d4 = cross2(r, q2 - p1)
    proper = (d1 * d2 < 0) & (d3 * d4 < 0)

    def on_segment(a, b, p):
        return (
            (np.minimum(a[..., 0], b[..., 0]) <= p[..., 0])
            & (p[..., 0] <= np.maximum(a[..., 0], b[..., 0]))
            & (np.minimum(a[..., 1], b[..., 1]) <= p[..., 1])
            & (p[..., 1] <= np.maximum(a[..., 1], b[..., 1]))
        )

    touch = (
        ((d1 == 0) & on_segment(q1, q2, p1))
        | ((d2 == 0) & on_segment(q1, q2, p2))
        | ((d3 == 0) & on_segment(p1, p2, q1))
        | ((d4 == 0) & on_segment(p1, p2, q2))
    )
    return proper | touch


def is_simple(poly: Polygon) -> bool:
    """True if no two non-adjacent edges of the polygon touch."""
    v = poly.vertices
    n = len(v)
    nxt = np.roll(v, -1, axis=0)
    i, j = np.triu_indices(n, k=2)
    keep = ~((i == 0) & (j == n - 1))
    i, j = i[keep], j[keep]
    if len(i) == 0:
        return poly.orientation is not Orientation.DEGENERATE
    return not bool(segments_intersect(v[i], nxt[i], v[j], nxt[j]).any())


def trace_boundary(mask: PixelMask) -> Optional[Polygon]:
    """
    Outer contour of the largest blob in a mask, through boundary pixel centres.

    Degenerate blobs (a pixel or a one-pixel line) fall back to the outline of
    their bounding pixel squares. Returns None for an empty mask.
    """
    if not mask.any():
        return None
    contours, _ = cv2.findContours(
        mask.bits.astype(np.uint8), cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_SIMPLE
    )
    if len(contours) > 1:
        logger.debug(f"Mask has {len(contours)} blobs, tracing the largest")
    best = max(contours, key=lambda c: (cv2.contourArea(c), len(c)))
    pts = best.reshape(-1, 2).astype(np.float64) + 0.5
    if len(pts) >= 3 and abs(signed_area(pts)) >= AREA_EPS:
        return Polygon(pts)
    c0, r0 = best.reshape(-1, 2).min(axis=0)
    c1, r1 = best.reshape(-1, 2).max(axis=0) + 1
    return Polygon(np.array([[c0, r0], [c1, r0], [c1, r1], [c0, r1]], dtype=np.float64))
