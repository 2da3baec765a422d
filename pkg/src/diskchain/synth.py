"""
Seeded generator of synthetic snake-shaped text instances.

Every instance is a smooth random axis with bounded curvature and a smooth
radius profile, offset by +-r along its normals to form the polygon. The
axis and radii double as the oracle for round-trip tests.
"""
import json
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from tqdm import trange

from diskchain.annotations import AnnotationRecord
from diskchain.configs import SynthParams
from diskchain.errors import GenerationFailure
from diskchain.geometry import Polygon, is_simple, polyline_lengths
from diskchain.labelgen import AnnotatedInstance

logger = logging.getLogger(__name__)

# curvature wobble amplitude, rad per px
CURVATURE_WOBBLE = 0.002


@dataclass(frozen=True, eq=False)
class SnakeOracle:
    axis: np.ndarray  # (m, 2)
    radii: np.ndarray  # (m,)

    def to_dict(self) -> dict:
        return {"axis": self.axis.tolist(), "radii": self.radii.tolist()}


def snake_polygon(axis: np.ndarray, radii: np.ndarray, vertex_every: int = 1) -> Polygon:
    """
    Polygon of a disk chain: the left side forward then the right side back.

    Normals come from central differences of the axis. Every `vertex_every`-th
    axis point becomes a vertex pair; both ends are always kept.
    """
    tangents = np.gradient(axis, axis=0)
    tangents /= np.hypot(tangents[:, 0], tangents[:, 1])[:, None]
    normals = np.stack([-tangents[:, 1], tangents[:, 0]], axis=1)
    idx = np.arange(0, len(axis), max(1, vertex_every))
    if idx[-1] != len(axis) - 1:
        idx = np.append(idx, len(axis) - 1)
    left = axis[idx] - radii[idx, None] * normals[idx]
    right = axis[idx] + radii[idx, None] * normals[idx]
    return Polygon(np.concatenate([left, right[::-1]]))


def _random_snake(rng: np.random.Generator, p: SynthParams, h: int, w: int) -> SnakeOracle:
    r_lo, r_hi = p.radius_range
    k_lo, k_hi = p.curvature_range
    r0 = rng.uniform(r_lo, r_hi)
    wobble = rng.uniform(0.0, p.radius_wobble)
    r_max = min(r_hi, r0 * (1 + wobble))
    length = max(rng.uniform(*p.length_range), p.min_aspect * r_max)

    m = int(math.ceil(length / p.axis_step)) + 1
    s = np.linspace(0.0, length, m)
    k0 = rng.uniform(k_lo, k_hi)
    k1 = rng.uniform(0.0, CURVATURE_WOBBLE)
    periods = rng.uniform(0.5, 1.5)
    phase = rng.uniform(0.0, 2 * math.pi)
    kappa = np.clip(k0 + k1 * np.sin(2 * math.pi * periods * s / length + phase), k_lo, k_hi)

    heading = rng.uniform(0.0, 2 * math.pi) + np.concatenate(
        [[0.0], np.cumsum((kappa[1:] + kappa[:-1]) / 2 * np.diff(s))]
    )
    steps = np.stack([np.cos(heading), np.sin(heading)], axis=1)[:-1] * np.diff(s)[:, None]
    axis = np.concatenate([[[0.0, 0.0]], np.cumsum(steps, axis=0)])

    r_periods = rng.uniform(0.5, 1.5)
    r_phase = rng.uniform(0.0, 2 * math.pi)
    radii = np.clip(r0 * (1 + wobble * np.sin(2 * math.pi * r_periods * s / length + r_phase)), r_lo, r_hi)

    # place the bounding box of the instance uniformly inside the image
    reach = radii.max() + p.margin
    lo = axis.min(axis=0) - reach
    hi = axis.max(axis=0) + reach
    span = hi - lo
    free = np.array([w, h]) - span
    if np.any(free < 0):
        return SnakeOracle(axis, radii)  # cannot fit; rejected by the caller
    offset = rng.uniform(0.0, 1.0, size=2) * free - lo
    return SnakeOracle(axis + offset, radii)


def _inside(poly: Polygon, p: SynthParams, h: int, w: int) -> bool:
    v = poly.vertices
    if v[:, 0].min() < p.margin or v[:, 1].min() < p.margin:
        return False
    return v[:, 0].max() <= w - p.margin and v[:, 1].max() <= h - p.margin


def _separated(a: SnakeOracle, b: SnakeOracle, gap: float) -> bool:
    d = np.hypot(*(a.axis[:, None, :] - b.axis[None, :, :]).transpose(2, 0, 1))
    return bool(np.all(d >= a.radii[:, None] + b.radii[None, :] + gap + 1))


def synth_image(
    rng: np.random.Generator, p: SynthParams, image_id: str
) -> tuple[AnnotationRecord, list[SnakeOracle]]:
    """One synthetic image; raises GenerationFailure when placement keeps failing."""
    h, w = p.image_size
    count = int(rng.integers(p.count[0], p.count[1] + 1))
    every = max(1, int(round(p.vertex_step / p.axis_step)))
    oracles: list[SnakeOracle] = []
    instances: list[AnnotatedInstance] = []
    for k in range(count):
        for _ in range(p.max_attempts):
            oracle = _random_snake(rng, p, h, w)
            poly = snake_polygon(oracle.axis, oracle.radii, every)
            if (
                _inside(poly, p, h, w)
                and all(_separated(oracle, other, p.min_separation) for other in oracles)
                and is_simple(poly)
            ):
                oracles.append(oracle)
                instances.append(AnnotatedInstance(poly))
                break
        else:
            raise GenerationFailure(
                f"{image_id}: could not place instance {k} in {p.max_attempts} attempts"
            )
    return AnnotationRecord(image_id, tuple(instances), (h, w)), oracles


def check_params(p: SynthParams) -> None:
    pairs = {
        "count": p.count,
        "image_size": p.image_size,
        "radius_range": p.radius_range,
        "curvature_range": p.curvature_range,
        "length_range": p.length_range,
    }
    for name, (lo, hi) in pairs.items():
        if lo > hi:
            raise ValueError(f"{name} is empty: {lo} > {hi}")
    if p.min_separation < 4:
        raise ValueError(f"min_separation must be >= 4 px, got {p.min_separation}")
    if p.count[0] < 0 or p.radius_range[0] <= 0 or min(p.image_size) <= 0:
        raise ValueError("count must be >= 0, radii and image size positive")


def synth_snakes(
    params: Optional[SynthParams] = None, progress: bool = False
) -> tuple[list[AnnotationRecord], list[list[SnakeOracle]]]:
    """
    Generate a seeded synthetic corpus.

    Args:
        params: Generator settings.
        progress: Show a progress bar.

    Returns:
        tuple: Annotation records, and per image the oracle axis and radii of
        every instance.
    """
    p = params or SynthParams()
    check_params(p)
    children = np.random.SeedSequence(p.seed).spawn(p.images)
    records, oracles = [], []
    for i in trange(p.images, disable=not progress, desc="synth"):
        rng = np.random.default_rng(children[i])
        record, oracle = synth_image(rng, p, f"synth_{i:05d}")
        records.append(record)
        oracles.append(oracle)
    logger.info(f"Generated {sum(len(r.instances) for r in records)} instances in {p.images} images")
    return records, oracles


def dump_oracle(records: Iterable[AnnotationRecord], oracles: Iterable[list[SnakeOracle]]) -> str:
    return "".join(
        json.dumps({"image": r.image_id, "instances": [o.to_dict() for o in per_image]}) + "\n"
        for r, per_image in zip(records, oracles)
    )


def oracle_axis_length(oracle: SnakeOracle) -> float:
    return float(polyline_lengths(oracle.axis)[-1])
