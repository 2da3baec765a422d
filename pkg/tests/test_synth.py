import json
from dataclasses import replace
from itertools import combinations

import numpy as np
import pytest

from diskchain.annotations import dump_polyjson
from diskchain.configs import SynthParams
from diskchain.errors import GenerationFailure
from diskchain.geometry import rasterize_polygon
from diskchain.synth import dump_oracle, oracle_axis_length, synth_snakes


def crossing_edges(vertices):
    """Pairs of non-adjacent edges that properly cross each other."""
    a = vertices
    b = np.roll(vertices, -1, axis=0)
    n = len(a)

    def orient(p, q, r):
        return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])

    i, j = np.triu_indices(n, k=2)
    keep = ~((i == 0) & (j == n - 1))
    i, j = i[keep], j[keep]
    d1 = orient(a[i], b[i], a[j])
    d2 = orient(a[i], b[i], b[j])
    d3 = orient(a[j], b[j], a[i])
    d4 = orient(a[j], b[j], b[i])
    hits = (d1 * d2 < 0) & (d3 * d4 < 0)
    return list(zip(i[hits], j[hits]))


def test_deterministic():
    params = SynthParams(seed=11, images=3, count=[1, 3], image_size=[256, 256], length_range=[80.0, 160.0])
    records_a, oracles_a = synth_snakes(params)
    records_b, oracles_b = synth_snakes(params)
    assert dump_polyjson(records_a) == dump_polyjson(records_b)
    assert dump_oracle(records_a, oracles_a) == dump_oracle(records_b, oracles_b)
    other, _ = synth_snakes(replace(params, seed=12))
    assert dump_polyjson(other) != dump_polyjson(records_a)

    line = json.loads(dump_oracle(records_a, oracles_a).splitlines()[0])
    assert line["image"] == "synth_00000"
    assert len(line["instances"]) == len(records_a[0].instances)


def test_empty_images():
    records, oracles = synth_snakes(SynthParams(seed=1, images=4, count=[0, 0]))
    assert [len(r.instances) for r in records] == [0, 0, 0, 0]
    assert oracles == [[], [], [], []]
    assert all(r.size == (512, 512) for r in records)


def test_polygons_are_simple_and_separated():
    p = SynthParams(seed=7, images=250, count=[2, 2])
    records, oracles = synth_snakes(p)
    polygons = [inst.polygon for r in records for inst in r.instances]
    assert len(polygons) == 500
    for poly in polygons:
        assert crossing_edges(poly.vertices) == []

    h, w = p.image_size
    r_lo, r_hi = p.radius_range
    for record, per_image in zip(records, oracles):
        for inst in record.instances:
            v = inst.polygon.vertices
            assert v.min() >= p.margin
            assert v[:, 0].max() <= w - p.margin and v[:, 1].max() <= h - p.margin
        for oracle in per_image:
            assert np.all((oracle.radii >= r_lo) & (oracle.radii <= r_hi))
            assert oracle_axis_length(oracle) >= p.min_aspect * oracle.radii.max() - p.axis_step
        for x, y in combinations(record.instances, 2):
            d = np.hypot(*(x.polygon.vertices[:, None] - y.polygon.vertices[None]).transpose(2, 0, 1))
            assert d.min() >= p.min_separation
            overlap = rasterize_polygon(x.polygon, h, w) & rasterize_polygon(y.polygon, h, w)
            assert overlap.count == 0


def test_bad_params():
    with pytest.raises(ValueError):
        synth_snakes(SynthParams(min_separation=3.0))
    with pytest.raises(ValueError):
        synth_snakes(SynthParams(count=[3, 1]))
    with pytest.raises(ValueError):
        synth_snakes(SynthParams(radius_range=[0.0, 4.0]))


def test_generation_failure():
    with pytest.raises(GenerationFailure):
        synth_snakes(SynthParams(images=1, count=[1, 1], image_size=[40, 40], max_attempts=20))
