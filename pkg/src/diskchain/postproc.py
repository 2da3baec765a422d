"""
Instance reconstruction from geometry maps.

The TCL mask is split into 8-connected components with a run-based
union-find. Each component is traced from a deterministic seed by alternating
strides along the local orientation with centralizing steps across it, and
the traced axis is swept with disks to recover the text region.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional, Sequence

import numpy as np

from diskchain.configs import PostprocParams
from diskchain.constants import DATASET_PRESETS
from diskchain.errors import EmptyAxis, OffComponent, UnknownCase
from diskchain.geometry import (
    Disk,
    PixelMask,
    Point2,
    Polygon,
    RotatedRect,
    canonical_angle,
    disks_union_mask,
    min_area_rect,
    rasterize_polygon,
    trace_boundary,
)
from diskchain.labelgen import SnakeDescriptor
from diskchain.maps import GeometryMaps, binarize

logger = logging.getLogger(__name__)

WALK_STEP = 0.5
BISECT_TOL = 1.0 / 128


class DisjointSet:
    """Union-find over integer ids with path compression and union by rank."""

    def __init__(self, n: int = 0) -> None:
        self.parent = list(range(n))
        self.rank = [0] * n

    def __len__(self) -> int:
        return len(self.parent)

    def add(self) -> int:
        self.parent.append(len(self.parent))
        self.rank.append(0)
        return len(self.parent) - 1

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return ra


@dataclass(frozen=True, eq=False)
class TclComponent:
    id: int
    pixels: np.ndarray  # (k, 2) of (row, col), raster order

    def __len__(self) -> int:
        return len(self.pixels)

    def mask(self, h: int, w: int) -> PixelMask:
        return PixelMask.from_pixels(self.pixels[:, 0], self.pixels[:, 1], h, w)

    def centroid(self) -> Point2:
        rows, cols = self.pixels[:, 0], self.pixels[:, 1]
        return Point2(float(cols.mean()) + 0.5, float(rows.mean()) + 0.5)


class AxisPoint(NamedTuple):
    point: Point2
    r: float
    theta: float


@dataclass(frozen=True, eq=False)
class Detection:
    """A reconstructed text instance."""

    snake: SnakeDescriptor
    region: PixelMask
    boundary: Optional[Polygon]
    score: float
    rect: Optional[RotatedRect] = None
    tcl_count: int = 0

    def axis(self) -> list[list[float]]:
        return [[d.center.x, d.center.y, d.radius, d.theta] for d in self.snake.disks]

    def to_dict(self) -> dict:
        return {
            "boundary": self.boundary.to_list() if self.boundary is not None else [],
            "axis": [[float(v) for v in a] for a in self.axis()],
            "score": float(self.score),
            "rect": self.rect.to_dict() if self.rect is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict, h: int, w: int) -> "Detection":
        """Rebuild a detection from its JSON form; the region is the filled boundary."""
        disks = tuple(Disk(Point2(x, y), max(r, 0.0), t) for x, y, r, t in d["axis"])
        boundary = Polygon(np.asarray(d["boundary"], dtype=np.float64)) if d["boundary"] else None
        if boundary is not None and boundary.area > 0:
            region = rasterize_polygon(boundary, h, w)
        else:
            region = disks_union_mask(disks, h, w)
        rect = RotatedRect.from_dict(d["rect"]) if d.get("rect") else None
        return cls(SnakeDescriptor(disks), region, boundary, float(d["score"]), rect)


def preset_params(name: str, **overrides) -> PostprocParams:
    """Post-processing parameters of a named dataset preset, with overrides."""
    if name not in DATASET_PRESETS:
        raise UnknownCase(f"Unknown preset {name!r}, expected one of {sorted(DATASET_PRESETS)}")
    values = {**DATASET_PRESETS[name], "preset": name}
    values.update({k: v for k, v in overrides.items() if v is not None})
    return replace(PostprocParams(), **values)


def segment_instances(tcl_mask: PixelMask) -> list[TclComponent]:
    """
    Split a mask into 8-connected components.

    Horizontal runs are the union-find elements; runs in adjacent rows are
    joined when their column ranges, widened by one pixel, overlap.
    Components are ordered by their first pixel in raster order.
    """
    bits = tcl_mask.bits
    h, w = bits.shape
    padded = np.zeros((h, w + 2), dtype=np.int8)
    padded[:, 1:-1] = bits
    edges = np.diff(padded, axis=1)
    run_rows, run_start = np.nonzero(edges == 1)
    _, run_end = np.nonzero(edges == -1)  # exclusive
    if len(run_rows) == 0:
        return []

    ds = DisjointSet(len(run_rows))
    row_first = np.searchsorted(run_rows, np.arange(h + 1))
    for row in range(1, h):
        i, i_end = row_first[row - 1], row_first[row]
        j, j_end = row_first[row], row_first[row + 1]
        while i < i_end and j < j_end:
            if run_start[j] <= run_end[i] and run_start[i] <= run_end[j]:
                ds.union(i, j)
            if run_end[i] < run_end[j]:
                i += 1
            else:
                j += 1

    labels = np.full((h, w), -1, dtype=np.int64)
    root_to_id: dict[int, int] = {}
    for k in range(len(run_rows)):
        cid = root_to_id.setdefault(ds.find(k), len(root_to_id))
        labels[run_rows[k], run_start[k] : run_end[k]] = cid

    coords = np.argwhere(bits)
    order = np.argsort(labels[coords[:, 0], coords[:, 1]], kind="stable")
    counts = np.bincount(labels[bits], minlength=len(root_to_id))
    groups = np.split(coords[order], np.cumsum(counts)[:-1])
    return [TclComponent(k, g) for k, g in enumerate(groups)]


def _exit_distance(
    pt: Point2, direction: tuple[float, float], reach: float, mask: PixelMask
) -> float:
    """Distance from pt to where the ray leaves the mask, capped at `reach`."""
    dx, dy = direction
    steps = np.arange(WALK_STEP, reach + WALK_STEP / 2, WALK_STEP)
    inside = mask.contains_many(pt.x + dx * steps, pt.y + dy * steps)
    if inside.all():
        return reach
    k = int(np.argmin(inside))
    lo = float(steps[k - 1]) if k > 0 else 0.0
    hi = float(steps[k])
    while hi - lo > BISECT_TOL:
        mid = (lo + hi) / 2
        if mask.contains(pt.x + dx * mid, pt.y + dy * mid):
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def centralize(pt: Point2, maps: GeometryMaps, tcl_mask: PixelMask) -> Point2:
    """
    Move a point to the middle of the TCL band along the local normal.

    Args:
        pt: A point on the mask.
        maps: Geometry maps supplying r and the orientation at pt.
        tcl_mask: The band to centre in.

    Returns:
        Point2: Midpoint of the two exit points of the normal line, or pt
        itself when that midpoint falls off the mask.
    """
    pt = Point2(*pt)
    if not tcl_mask.contains(*pt):
        raise OffComponent(f"Point ({pt.x:.2f}, {pt.y:.2f}) is not on the TCL mask")
    r, c, s = maps.sample(*pt)
    normal = (-s, c)
    reach = 2 * max(r, 0.0) + 2
    ahead = _exit_distance(pt, normal, reach, tcl_mask)
    behind = _exit_distance(pt, (s, -c), reach, tcl_mask)
    shift = (ahead - behind) / 2
    out = Point2(pt.x + normal[0] * shift, pt.y + normal[1] * shift)
    if not tcl_mask.contains(*out):
        return pt
    return out


def stride_step(
    pt: Point2,
    maps: GeometryMaps,
    tcl_mask: PixelMask,
    sign: int,
    max_halvings: int = 6,
    min_stride: float = 1.0,
) -> Optional[Point2]:
    """
    Advance along the local orientation by r / 2, shortening near the end.

    The stride is halved at most `max_halvings` times and never drops below
    `min_stride` px. Returns None when no candidate lands on the mask.
    """
    pt = Point2(*pt)
    if not tcl_mask.contains(*pt):
        raise OffComponent(f"Point ({pt.x:.2f}, {pt.y:.2f}) is not on the TCL mask")
    r, c, s = maps.sample(*pt)
    length = max(r, 0.0) / 2
    for k in range(max_halvings + 1):
        step = max(length / 2**k, min_stride)
        cand = Point2(pt.x + sign * step * c, pt.y + sign * step * s)
        if tcl_mask.contains(*cand):
            return cand
        if step == min_stride:
            break
    return None


def _axis_point(pt: Point2, maps: GeometryMaps) -> AxisPoint:
    r, c, s = maps.sample(*pt)
    return AxisPoint(pt, r, canonical_angle(math.atan2(s, c)))


def trace_axis(
    comp: TclComponent,
    maps: GeometryMaps,
    tcl_mask: PixelMask,
    params: Optional[PostprocParams] = None,
    seed_pixel: Optional[tuple[int, int]] = None,
) -> list[AxisPoint]:
    """
    Trace the centre line of one component.

    The seed is `seed_pixel` (row, col) when given, otherwise the component
    pixel nearest its centroid. From the centralized seed the walk strides
    both ways, choosing at each step the orientation sign that keeps the
    previous heading, and centralizes after every stride.
    A walk stops at the band end, on revisiting a 1 px cell, or after
    4 * (component size) strides in total.

    Args:
        comp: The component to trace.
        maps: Geometry maps.
        tcl_mask: Binarized TCL mask; tracing is restricted to `comp` within it.
        params: Stride schedule settings.
        seed_pixel: Component pixel to start from.

    Returns:
        list[AxisPoint]: Axis points from one end to the other.
    """
    params = params or PostprocParams()
    h, w = maps.shape
    comp_mask = comp.mask(h, w) & tcl_mask

    if seed_pixel is None:
        rows, cols = comp.pixels[:, 0], comp.pixels[:, 1]
        cx, cy = comp.centroid()
        k = int(np.argmin((cols + 0.5 - cx) ** 2 + (rows + 0.5 - cy) ** 2))
        seed_pixel = (int(rows[k]), int(cols[k]))
    row, col = seed_pixel
    if not (0 <= row < h and 0 <= col < w and comp_mask.bits[row, col]):
        raise OffComponent(f"Seed pixel {seed_pixel} is not in component {comp.id}")
    seed = centralize(Point2(col + 0.5, row + 0.5), maps, comp_mask)

    def cell(p: Point2) -> tuple[int, int]:
        return math.floor(p.x), math.floor(p.y)

    visited = {cell(seed)}
    budget = 4 * len(comp)

    def walk(sign: int) -> list[Point2]:
        nonlocal budget
        _, c, s = maps.sample(*seed)
        heading = (sign * c, sign * s)
        cur, out = seed, []
        while budget > 0:
            _, c, s = maps.sample(*cur)
            step_sign = 1 if c * heading[0] + s * heading[1] >= 0 else -1
            nxt = stride_step(cur, maps, comp_mask, step_sign, params.max_halvings, params.min_stride)
            if nxt is None:
                break
            nxt = centralize(nxt, maps, comp_mask)
            budget -= 1
            if cell(nxt) in visited:
                logger.debug(f"Component {comp.id}: revisited cell {cell(nxt)}, stopping")
                break
            visited.add(cell(nxt))
            d = math.hypot(nxt.x - cur.x, nxt.y - cur.y)
            if d > 0:
                heading = ((nxt.x - cur.x) / d, (nxt.y - cur.y) / d)
            out.append(nxt)
            cur = nxt
        if budget <= 0:
            logger.debug(f"Component {comp.id}: stride budget exhausted")
        return out

    forward = walk(1)
    backward = walk(-1)
    points = backward[::-1] + [seed] + forward
    return [_axis_point(p, maps) for p in points]


def reconstruct(
    axis: Sequence[AxisPoint], h: int, w: int
) -> tuple[SnakeDescriptor, PixelMask]:
    """Sweep disks along a traced axis; negative radii count as 0."""
    if len(axis) == 0:
        raise EmptyAxis("Cannot reconstruct an empty axis")
    disks = tuple(
        Disk(Point2(*p), max(float(r), 0.0) if math.isfinite(r) else 0.0, t) for p, r, t in axis
    )
    return SnakeDescriptor(disks), disks_union_mask(disks, h, w)


def pixel_rect(mask: PixelMask) -> Optional[RotatedRect]:
    """Minimum-area rectangle around the pixel squares of a mask."""
    if not mask.any():
        return None
    coords = mask.coords()
    rows = np.unique(coords[:, 0])
    first = np.searchsorted(coords[:, 0], rows)
    last = np.searchsorted(coords[:, 0], rows, side="right") - 1
    lo, hi = coords[first, 1], coords[last, 1] + 1
    corners = np.concatenate(
        [
            np.stack([lo, rows], axis=1),
            np.stack([lo, rows + 1], axis=1),
            np.stack([hi, rows], axis=1),
            np.stack([hi, rows + 1], axis=1),
        ]
    )
    return min_area_rect(corners.astype(np.float64))


def build_detection(
    comp: TclComponent, axis: Sequence[AxisPoint], maps: GeometryMaps, tr_mask: PixelMask
) -> Detection:
    h, w = maps.shape
    snake, region = reconstruct(axis, h, w)
    boundary = trace_boundary(region)
    score = float(np.nan_to_num(maps.tr[region.bits], nan=0.0, posinf=1.0, neginf=0.0).mean()) if region.any() else 0.0
    return Detection(snake, region, boundary, score, pixel_rect(region & tr_mask), len(comp))


def filter_candidates(
    cands: Sequence[tuple[Detection, TclComponent]],
    maps: GeometryMaps,
    params: PostprocParams,
) -> list[Detection]:
    """
    Drop false positives.

    A candidate is kept when its component has at least
    `tcl_count_factor * mean radius` pixels, at least `tr_overlap_min` of its
    region scores TR, and (ICDAR filters only) its rectangle's short side and
    its area reach `min_side_px` and `min_area_px`.
    """
    tr_bits = maps.tr >= params.t_tr
    kept = []
    for det, comp in cands:
        mean_r = float(det.snake.radii().mean())
        if len(comp) < params.tcl_count_factor * mean_r:
            logger.debug(f"Component {comp.id}: {len(comp)} TCL px < {params.tcl_count_factor} * {mean_r:.2f}")
            continue
        area = det.region.count
        if area == 0:
            logger.debug(f"Component {comp.id}: empty region")
            continue
        overlap = np.count_nonzero(det.region.bits & tr_bits) / area
        if overlap < params.tr_overlap_min:
            logger.debug(f"Component {comp.id}: TR overlap {overlap:.3f}")
            continue
        if params.icdar_filters:
            short = det.rect.height if det.rect is not None else 0.0
            if short < params.min_side_px or area < params.min_area_px:
                logger.debug(f"Component {comp.id}: below ICDAR size limits")
                continue
        kept.append(det)
    return kept


def detect(maps: GeometryMaps, params: Optional[PostprocParams] = None) -> list[Detection]:
    """
    Reconstruct every text instance in a set of maps.

    Args:
        maps: Score and geometry maps.
        params: Thresholds and filter settings.

    Returns:
        list[Detection]: Detections in component order.
    """
    params = params or PostprocParams()
    if params.tcl_count_factor < 0 or params.tr_overlap_min < 0:
        raise ValueError("Filter factors must be >= 0")
    binary = binarize(maps, params.t_tr, params.t_tcl)
    cands = []
    for comp in segment_instances(binary.tcl_mask):
        axis = trace_axis(comp, maps, binary.tcl_mask, params)
        cands.append((build_detection(comp, axis, maps, binary.tr_mask), comp))
    dets = filter_candidates(cands, maps, params)
    logger.debug(f"{len(cands)} components, {len(dets)} detections")
    return dets
