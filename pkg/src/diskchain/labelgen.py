"""
Ground-truth generation: polygon annotations to snakes and geometry maps.

An instance polygon is split at its head and tail edges into two sidelines.
Paired anchors sampled along both sidelines give the disk centres (midpoints)
and radii (half the anchor distance). The resulting axis is trimmed at both
ends and rendered into the five-channel label maps.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from diskchain.configs import LabelConfig
from diskchain.errors import (
    DegenerateInput,
    DegeneratePolygon,
    DegenerateWidth,
    ForkedInstance,
    InvariantViolation,
    UnsupportedPolygon,
)
from diskchain.geometry import (
    Disk,
    PixelMask,
    Point2,
    Polygon,
    check_dims,
    disks_union_bits,
    fit_direction,
    polyline_lengths,
    rasterize_polygon,
    resample_polyline,
)
from diskchain.maps import GeometryMaps

logger = logging.getLogger(__name__)

M_TIE_EPS = 1e-6
WIDTH_EPS = 1e-9
# smallest half-span, in px, of the orientation fit at the axis ends
MIN_THETA_SPAN = 0.5
# pixels per nearest-disk distance chunk
ASSIGN_CHUNK = 4096


@dataclass(frozen=True)
class AnnotatedInstance:
    polygon: Polygon
    ignore: bool = False
    text: Optional[str] = None


@dataclass(frozen=True, eq=False)
class SnakeDescriptor:
    """Ordered chain of overlapping disks describing one text instance."""

    disks: tuple[Disk, ...]
    source_polygon: Optional[Polygon] = None

    def __post_init__(self):
        disks = tuple(self.disks)
        if not disks:
            raise ValueError("A snake needs at least one disk")
        object.__setattr__(self, "disks", disks)

    @classmethod
    def from_arrays(
        cls,
        centers: np.ndarray,
        radii: np.ndarray,
        thetas: np.ndarray,
        source_polygon: Optional[Polygon] = None,
    ) -> "SnakeDescriptor":
        disks = tuple(
            Disk(Point2(float(x), float(y)), float(r), float(t))
            for (x, y), r, t in zip(centers, radii, thetas)
        )
        return cls(disks, source_polygon)

    def __len__(self) -> int:
        return len(self.disks)

    def centers(self) -> np.ndarray:
        return np.array([d.center for d in self.disks], dtype=np.float64)

    def radii(self) -> np.ndarray:
        return np.array([d.radius for d in self.disks], dtype=np.float64)

    def thetas(self) -> np.ndarray:
        return np.array([d.theta for d in self.disks], dtype=np.float64)

    def arc_length(self) -> float:
        return float(polyline_lengths(self.centers())[-1])

    def validate(self) -> None:
        """Raise InvariantViolation unless radii are positive and disks chain."""
        c, r = self.centers(), self.radii()
        if np.any(r <= 0):
            raise InvariantViolation("Snake radii must be strictly positive")
        if len(c) > 1:
            gaps = np.hypot(*np.diff(c, axis=0).T)
            if np.any(gaps == 0):
                raise InvariantViolation("Consecutive disk centres coincide")
            if np.any(gaps >= r[:-1] + r[1:]):
                raise InvariantViolation("Consecutive disks do not overlap")


def edge_measurements(poly: Polygon) -> np.ndarray:
    """M for every edge: cosine between the following and the preceding edge."""
    e = poly.edges()
    lengths = np.hypot(e[:, 0], e[:, 1])
    if np.any(lengths == 0):
        raise UnsupportedPolygon("Polygon has repeated consecutive vertices")
    u = e / lengths[:, None]
    return np.sum(np.roll(u, -1, axis=0) * np.roll(u, 1, axis=0), axis=1)


def edge_head_tail(poly: Polygon) -> tuple[int, int]:
    """
    Find the head and tail edges of an instance polygon.

    Edge i runs from vertex i to vertex i + 1. Pairs of edges are ranked by the
    sum of their M values; pairs within 1e-6 of the best sum are tied and the
    pair with the smallest total length wins, non-adjacent pairs before
    adjacent ones, then lowest indices. Quadrilaterals always tie both
    opposite pairs, so the shorter pair is chosen.

    Args:
        poly: Instance polygon, at least 4 vertices.

    Returns:
        tuple[int, int]: Edge indices (i, j) with i < j.
    """
    n = len(poly)
    if n < 4:
        raise UnsupportedPolygon(f"Head/tail detection needs >= 4 vertices, got {n}")
    m = edge_measurements(poly)
    lengths = poly.edge_lengths()

    if n == 4:
        candidates = [(0, 2), (1, 3)]
    else:
        first, second = np.triu_indices(n, k=1)
        sums = m[first] + m[second]
        tied = np.flatnonzero(sums <= sums.min() + M_TIE_EPS)
        candidates = [(int(first[k]), int(second[k])) for k in tied]

    def adjacent(i: int, j: int) -> bool:
        return j - i == 1 or (i == 0 and j == n - 1)

    head, tail = min(
        candidates,
        key=lambda p: (lengths[p[0]] + lengths[p[1]], adjacent(*p), p),
    )
    if adjacent(head, tail):
        raise ForkedInstance(f"Head and tail edges {head}, {tail} are adjacent")
    return head, tail


def split_sidelines(poly: Polygon, head: int, tail: int) -> tuple[np.ndarray, np.ndarray]:
    """Both sidelines, each running from the head edge to the tail edge."""
    n = len(poly)
    v = poly.vertices
    side_a = v[[(head + 1 + k) % n for k in range((tail - head) % n)]]
    side_b = v[[(head - k) % n for k in range((head - tail) % n)]]
    return side_a, side_b


def _sample_count(side_a: np.ndarray, side_b: np.ndarray, cfg: LabelConfig) -> int:
    if not cfg.adaptive_samples:
        return cfg.n_samples
    longest = max(polyline_lengths(side_a)[-1], polyline_lengths(side_b)[-1])
    n = int(round(longest / cfg.px_per_sample))
    return int(np.clip(n, cfg.min_samples, cfg.max_samples))


def _fit_thetas(centers: np.ndarray, s: np.ndarray, targets: np.ndarray, window: int) -> np.ndarray:
    """
    Tangent angle at each arc position `targets` along the untrimmed axis.

    The fit runs over `window` points spread symmetrically around the target,
    half a window of trimmed spacing each way. Near the axis ends the
    neighbourhood shrinks on both sides so it stays centred on the disk.
    """
    window = max(window, 3)
    spacing = (targets[-1] - targets[0]) / max(len(targets) - 1, 1)
    half = spacing * (window // 2)
    length = s[-1]
    thetas = np.zeros(len(targets))
    for i, t in enumerate(targets):
        h = max(min(half, t, length - t), MIN_THETA_SPAN)
        around = np.clip(np.linspace(t - h, t + h, window), 0.0, length)
        pts = np.stack([np.interp(around, s, centers[:, 0]), np.interp(around, s, centers[:, 1])], axis=1)
        thetas[i] = fit_direction(pts)
    return thetas


def extract_snake(
    instance: AnnotatedInstance,
    n_samples: Optional[int] = None,
    cfg: Optional[LabelConfig] = None,
) -> SnakeDescriptor:
    """
    Build the disk chain of one annotated instance.

    Args:
        instance: The annotated polygon.
        n_samples: Anchor count per sideline; overrides `cfg.n_samples`.
        cfg: Label generation settings.

    Returns:
        SnakeDescriptor: The trimmed axis with radius and orientation per disk.
    """
    cfg = cfg or LabelConfig()
    if n_samples is not None:
        cfg = replace(cfg, n_samples=n_samples, adaptive_samples=False)
    if cfg.n_samples < 2:
        raise ValueError(f"n_samples must be >= 2, got {cfg.n_samples}")

    poly = instance.polygon
    head, tail = edge_head_tail(poly)
    side_a, side_b = split_sidelines(poly, head, tail)
    n = _sample_count(side_a, side_b, cfg)
    anchors_a = resample_polyline(side_a, n)
    anchors_b = resample_polyline(side_b, n)

    centers = (anchors_a + anchors_b) / 2
    radii = np.hypot(*(anchors_a - anchors_b).T) / 2
    if np.any(radii < WIDTH_EPS):
        raise DegenerateWidth("Paired anchor points coincide")

    # drop repeated centres so arc length is strictly increasing
    keep = np.concatenate([[True], np.any(np.diff(centers, axis=0) != 0, axis=1)])
    centers, radii = centers[keep], radii[keep]
    s = polyline_lengths(centers)
    start = cfg.end_shrink * radii[0]
    stop = s[-1] - cfg.end_shrink * radii[-1]

    if len(centers) < 2 or stop <= start:
        # too short to trim: collapse to one disk at the axis midpoint
        mid = s[-1] / 2
        c = np.array([[np.interp(mid, s, centers[:, 0]), np.interp(mid, s, centers[:, 1])]])
        r = np.array([np.interp(mid, s, radii)])
        course = centers if len(centers) > 1 else np.vstack([anchors_a, anchors_b])
        try:
            theta = np.array([fit_direction(course)])
        except DegenerateInput:
            theta = np.zeros(1)
        logger.debug("Instance axis shorter than its end shrink; using a single disk")
        return SnakeDescriptor.from_arrays(c, r, theta, poly)

    targets = np.linspace(start, stop, n)
    trimmed = np.stack(
        [np.interp(targets, s, centers[:, 0]), np.interp(targets, s, centers[:, 1])], axis=1
    )
    trimmed_r = np.interp(targets, s, radii)
    thetas = _fit_thetas(centers, s, targets, cfg.theta_window)
    return SnakeDescriptor.from_arrays(trimmed, trimmed_r, thetas, poly)


def densify_snake(snake: SnakeDescriptor, step: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Interpolate the axis at roughly `step` px spacing.

    Radii are interpolated linearly in arc length; each new disk takes the
    orientation of the nearest original disk.
    """
    c, r, t = snake.centers(), snake.radii(), snake.thetas()
    if len(c) < 2:
        return c, r, t
    s = polyline_lengths(c)
    m = max(2, int(math.ceil(s[-1] / step)) + 1)
    targets = np.linspace(0.0, s[-1], m)
    dense = np.stack([np.interp(targets, s, c[:, 0]), np.interp(targets, s, c[:, 1])], axis=1)
    dense_r = np.interp(targets, s, r)
    idx = np.clip(np.searchsorted(s, targets), 1, len(s) - 1)
    nearer_left = targets - s[idx - 1] <= s[idx] - targets
    dense_t = t[np.where(nearer_left, idx - 1, idx)]
    return dense, dense_r, dense_t


def nearest_disk(pixels_xy: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Index of the nearest centre for every pixel; ties go to the lower index."""
    out = np.empty(len(pixels_xy), dtype=np.int64)
    for lo in range(0, len(pixels_xy), ASSIGN_CHUNK):
        chunk = pixels_xy[lo : lo + ASSIGN_CHUNK]
        d2 = ((chunk[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        out[lo : lo + ASSIGN_CHUNK] = np.argmin(d2, axis=1)
    return out


def _tcl_band(
    snake: SnakeDescriptor, h: int, w: int, cfg: LabelConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Rows, cols, radius and orientation of the band pixels of one snake."""
    dense, dense_r, dense_t = densify_snake(snake, cfg.densify_step)
    bits = disks_union_bits(dense, cfg.tcl_expand * dense_r, h, w)
    rows, cols = np.nonzero(bits)
    if len(rows) == 0:
        return rows, cols, np.zeros(0), np.zeros(0)
    xy = np.stack([cols + 0.5, rows + 0.5], axis=1)
    nearest = nearest_disk(xy, dense)

    keep = np.ones(len(rows), dtype=bool)
    if len(dense) > 1:
        # flat caps at both axis ends
        u0 = dense[1] - dense[0]
        u1 = dense[-1] - dense[-2]
        keep &= ~((nearest == 0) & ((xy - dense[0]) @ u0 < 0))
        keep &= ~((nearest == len(dense) - 1) & ((xy - dense[-1]) @ u1 > 0))
    nearest = nearest[keep]
    return rows[keep], cols[keep], dense_r[nearest], dense_t[nearest]


def render_label_maps(
    snakes: Sequence[SnakeDescriptor],
    masks: Sequence[Polygon],
    h: int,
    w: int,
    cfg: Optional[LabelConfig] = None,
) -> GeometryMaps:
    """
    Render the label maps of one image.

    TR is the union of the rasterized polygons. TCL is the union of the snake
    bands (disks of radius `tcl_expand * r` along the trimmed axis) clipped to
    TR. On TCL pixels r, cos and sin come from the nearest densified axis disk;
    when bands overlap the earlier snake wins. Off TCL they are 0.

    Args:
        snakes: Disk chains of the instances.
        masks: Source polygons forming the text region.
        h: Map height in pixels.
        w: Map width in pixels.
        cfg: Label generation settings.

    Returns:
        GeometryMaps: Binary TR/TCL scores plus geometry channels.
    """
    check_dims(h, w)
    cfg = cfg or LabelConfig()
    tr = np.zeros((h, w), dtype=bool)
    for poly in masks:
        tr |= rasterize_polygon(poly, h, w).bits

    tcl = np.zeros((h, w), dtype=bool)
    r_map = np.zeros((h, w))
    cos_map = np.zeros((h, w))
    sin_map = np.zeros((h, w))
    for snake in snakes:
        rows, cols, r, theta = _tcl_band(snake, h, w, cfg)
        free = tr[rows, cols] & ~tcl[rows, cols]
        rows, cols, r, theta = rows[free], cols[free], r[free], theta[free]
        tcl[rows, cols] = True
        r_map[rows, cols] = r
        cos_map[rows, cols] = np.cos(theta)
        sin_map[rows, cols] = np.sin(theta)

    return GeometryMaps(
        tr=tr.astype(np.float64),
        tcl=tcl.astype(np.float64),
        r=r_map,
        cos_t=cos_map,
        sin_t=sin_map,
    )


def render_ignore_mask(instances: Iterable[AnnotatedInstance], h: int, w: int) -> PixelMask:
    """Union of the don't-care polygons."""
    bits = np.zeros((h, w), dtype=bool)
    for inst in instances:
        if inst.ignore:
            try:
                bits |= rasterize_polygon(inst.polygon, h, w).bits
            except DegeneratePolygon:
                logger.warning("Skipping zero-area ignore polygon")
    return PixelMask(bits)


def generate_labels(
    instances: Sequence[AnnotatedInstance],
    h: int,
    w: int,
    cfg: Optional[LabelConfig] = None,
) -> tuple[GeometryMaps, PixelMask, list[SnakeDescriptor]]:
    """
    Label maps, ignore mask and snakes for one image.

    Instances whose polygon cannot be turned into a snake are logged and moved
    to the ignore mask rather than aborting the image.
    """
    cfg = cfg or LabelConfig()
    snakes: list[SnakeDescriptor] = []
    demoted: list[AnnotatedInstance] = []
    for k, inst in enumerate(instances):
        if inst.ignore:
            continue
        try:
            snakes.append(extract_snake(inst, cfg=cfg))
        except (UnsupportedPolygon, ForkedInstance, DegenerateWidth, DegeneratePolygon) as e:
            logger.warning(f"Instance {k} treated as ignore: {e}")
            demoted.append(AnnotatedInstance(inst.polygon, ignore=True, text=inst.text))

    maps = render_label_maps(snakes, [s.source_polygon for s in snakes], h, w, cfg)
    ignore = render_ignore_mask([*instances, *demoted], h, w)
    return maps, ignore, snakes
