from collections import deque

import numpy as np
import pytest
from scipy import ndimage

from diskchain.configs import PostprocParams, SynthParams
from diskchain.errors import EmptyAxis, OffComponent, UnknownCase
from diskchain.geometry import Disk, PixelMask, Point2, mask_iou, polyline_lengths, rasterize_polygon
from diskchain.labelgen import AnnotatedInstance, SnakeDescriptor, densify_snake, generate_labels
from diskchain.maps import GeometryMaps, binarize
from diskchain.postproc import (
    AxisPoint,
    Detection,
    DisjointSet,
    TclComponent,
    centralize,
    detect,
    filter_candidates,
    preset_params,
    reconstruct,
    segment_instances,
    stride_step,
    trace_axis,
)
from diskchain.synth import snake_polygon, synth_snakes

EIGHT = np.ones((3, 3), dtype=bool)


def band_maps(h, w, rows, cols, r):
    """Horizontal TCL band over rows x cols with constant radius and theta = 0."""
    tcl = np.zeros((h, w))
    tcl[rows, cols] = 1.0
    return GeometryMaps(tcl.copy(), tcl, tcl * r, tcl.copy(), np.zeros((h, w)))


def canonical(labels):
    """Relabel components 0, 1, ... by their first pixel in raster order."""
    flat = labels.ravel()
    fg = flat >= 0
    if not fg.any():
        return labels
    ids, first = np.unique(flat[fg], return_index=True)
    lut = np.full(ids.max() + 1, -1)
    lut[ids[np.argsort(first)]] = np.arange(len(ids))
    out = np.full(flat.shape, -1)
    out[fg] = lut[flat[fg]]
    return out.reshape(labels.shape)


def component_labels(bits):
    labels = np.full(bits.shape, -1)
    for comp in segment_instances(PixelMask(bits)):
        labels[comp.pixels[:, 0], comp.pixels[:, 1]] = comp.id
    return labels


def flood_fill(bits):
    h, w = bits.shape
    labels = np.full((h, w), -1)
    n = 0
    for i in range(h):
        for j in range(w):
            if not bits[i, j] or labels[i, j] >= 0:
                continue
            labels[i, j] = n
            queue = deque([(i, j)])
            while queue:
                a, b = queue.popleft()
                for da in (-1, 0, 1):
                    for db in (-1, 0, 1):
                        y, x = a + da, b + db
                        if 0 <= y < h and 0 <= x < w and bits[y, x] and labels[y, x] < 0:
                            labels[y, x] = n
                            queue.append((y, x))
            n += 1
    return labels


def test_disjoint_set():
    ds = DisjointSet(4)
    ds.union(0, 1)
    ds.union(2, 3)
    assert ds.find(1) == ds.find(0)
    assert ds.find(2) != ds.find(0)
    ds.union(1, 3)
    assert len({ds.find(k) for k in range(4)}) == 1
    assert ds.add() == 4
    assert ds.find(4) == 4


def test_segment_examples():
    bits = np.zeros((12, 20), dtype=bool)
    bits[2:4, 2:18] = True
    bits[7:9, 2:18] = True
    comps = segment_instances(PixelMask(bits))
    assert len(comps) == 2
    assert [len(c) for c in comps] == [32, 32]
    assert comps[0].pixels[0].tolist() == [2, 2]

    diagonal = np.eye(6, dtype=bool)
    assert len(segment_instances(PixelMask(diagonal))) == 1
    anti = np.fliplr(diagonal)
    assert len(segment_instances(PixelMask(anti | diagonal))) == 1
    assert segment_instances(PixelMask.empty(5, 5)) == []

    # a U shape joins late: two runs on top, merged by the bottom row
    u = np.zeros((5, 7), dtype=bool)
    u[0:4, 0] = u[0:4, 6] = True
    u[4, :] = True
    comps = segment_instances(PixelMask(u))
    assert len(comps) == 1 and len(comps[0]) == u.sum()


def test_segment_against_flood_fill():
    rng = np.random.default_rng(8)
    for k in range(50):
        bits = rng.uniform(size=(32, 32)) < rng.uniform(0.1, 0.9)
        assert np.array_equal(component_labels(bits), flood_fill(bits))


def test_segment_against_labeling():
    rng = np.random.default_rng(9)
    for k in range(1000):
        bits = rng.uniform(size=(64, 64)) < rng.uniform(0.1, 0.9)
        labels, _ = ndimage.label(bits, structure=EIGHT)
        assert np.array_equal(component_labels(bits), canonical(labels - 1))


def test_centralize():
    maps = band_maps(20, 100, slice(8, 12), slice(0, 100), 2.0)
    mask = PixelMask(maps.tcl >= 0.5)
    out = centralize(Point2(50.0, 9.0), maps, mask)
    assert out.x == pytest.approx(50.0)
    assert out.y == pytest.approx(10.0, abs=1 / 64)
    again = centralize(out, maps, mask)
    assert again.y == pytest.approx(out.y, abs=1 / 64)
    with pytest.raises(OffComponent):
        centralize(Point2(50.0, 2.0), maps, mask)


def test_stride_step():
    maps = band_maps(20, 100, slice(5, 15), slice(0, 60), 10.0)
    mask = PixelMask(maps.tcl >= 0.5)
    nxt = stride_step(Point2(30.0, 10.0), maps, mask, 1)
    assert nxt == (35.0, 10.0)
    assert stride_step(Point2(30.0, 10.0), maps, mask, -1) == (25.0, 10.0)

    # near the end the stride halves down to the 1 px floor
    assert stride_step(Point2(57.0, 10.0), maps, mask, 1) == (59.5, 10.0)
    assert stride_step(Point2(58.5, 10.0), maps, mask, 1) == (59.75, 10.0)
    assert stride_step(Point2(58.8, 10.0), maps, mask, 1) == pytest.approx((59.8, 10.0))
    assert stride_step(Point2(59.4, 10.0), maps, mask, 1) is None
    with pytest.raises(OffComponent):
        stride_step(Point2(70.0, 10.0), maps, mask, 1)


def test_trace_single_pixel():
    maps = band_maps(12, 12, [5], [7], 3.0)
    mask = PixelMask(maps.tcl >= 0.5)
    (comp,) = segment_instances(mask)
    axis = trace_axis(comp, maps, mask)
    assert len(axis) == 1
    (pt, r, theta) = axis[0]
    assert pt.x == pytest.approx(7.5, abs=0.01)
    assert pt.y == pytest.approx(5.5, abs=0.01)
    assert (r, theta) == (3.0, 0.0)


def test_trace_rectangle(rectangle_maps):
    mask = PixelMask(rectangle_maps.tcl >= 0.5)
    (comp,) = segment_instances(mask)
    axis = trace_axis(comp, rectangle_maps, mask)
    xs = np.array([p.point.x for p in axis])
    ys = np.array([p.point.y for p in axis])
    assert np.all(np.diff(xs) > 0) or np.all(np.diff(xs) < 0)
    assert np.allclose(ys, 10.0, atol=0.1)
    assert abs(xs.min() - 5.0) <= 5.5
    assert abs(xs.max() - 95.0) <= 5.5
    assert np.allclose([p.r for p in axis], 10.0)


def test_reconstruct(rectangle, rectangle_maps):
    with pytest.raises(EmptyAxis):
        reconstruct([], 10, 10)
    snake, region = reconstruct([AxisPoint(Point2(5.0, 5.0), -2.0, 0.0)], 10, 10)
    assert snake.radii().tolist() == [0.0]
    assert region.count == 0

    mask = PixelMask(rectangle_maps.tcl >= 0.5)
    (comp,) = segment_instances(mask)
    snake, region = reconstruct(trace_axis(comp, rectangle_maps, mask), 40, 120)
    assert mask_iou(region, rasterize_polygon(rectangle, 40, 120)) >= 0.9
    assert all(region.contains(*c) for c in snake.centers())


def test_detect_rectangle(rectangle_maps):
    (det,) = detect(rectangle_maps)
    assert det.score == pytest.approx(rectangle_maps.tr[det.region.bits].mean())
    assert abs(det.rect.width - 100) <= 2
    assert abs(det.rect.height - 20) <= 2
    assert det.rect.angle == pytest.approx(0.0, abs=1e-6) or det.rect.angle == pytest.approx(np.pi, abs=1e-6)
    assert det.tcl_count == 360
    assert det.boundary is not None

    out = det.to_dict()
    assert set(out) == {"boundary", "axis", "score", "rect"}
    back = Detection.from_dict(out, 40, 120)
    assert back.axis() == det.axis()
    assert back.rect == det.rect

    assert detect(GeometryMaps.zeros(30, 30)) == []
    with pytest.raises(ValueError):
        detect(rectangle_maps, PostprocParams(tcl_count_factor=-1.0))


def test_detect_synthetic():
    records, _ = synth_snakes(SynthParams(seed=5, images=1, count=[3, 3]))
    (record,) = records
    h, w = record.grid_size()
    maps, _, _ = generate_labels(record.instances, h, w)
    dets = detect(maps)
    assert len(dets) == 3
    for inst in record.instances:
        source = rasterize_polygon(inst.polygon, h, w)
        assert max(mask_iou(source, d.region) for d in dets) >= 0.8


def test_filter_candidates():
    h, w = 20, 20
    tr = np.zeros((h, w))
    tr[0, 0:9] = 1.0
    maps = GeometryMaps(tr, np.zeros((h, w)), np.zeros((h, w)), np.ones((h, w)), np.zeros((h, w)))
    region = PixelMask.from_pixels([0] * 10, range(10), h, w)

    def candidate(n_tcl, radius, region=region):
        comp = TclComponent(0, np.array([[0, k] for k in range(n_tcl)]))
        snake = SnakeDescriptor((Disk(Point2(5.0, 0.5), radius),))
        return Detection(snake, region, None, 1.0), comp

    params = PostprocParams()
    assert filter_candidates([candidate(3, 20.0)], maps, params) == []
    kept = filter_candidates([candidate(5, 20.0)], maps, params)
    assert len(kept) == 1

    sparse = PixelMask.from_pixels([0] * 4 + [5] * 6, list(range(4)) + list(range(6)), h, w)
    assert filter_candidates([candidate(5, 20.0, sparse)], maps, params) == []

    icdar = preset_params("icdar2015")
    assert icdar.icdar_filters and icdar.t_tcl == 0.9
    assert filter_candidates([candidate(5, 20.0)], maps, icdar) == []


def test_presets():
    assert preset_params("ctw1500").t_tcl == 0.5
    assert preset_params("totaltext", t_tr=0.3).t_tr == 0.3
    with pytest.raises(UnknownCase):
        preset_params("coco")


def maps_for_axis(axis, radius, h, w):
    poly = snake_polygon(axis, np.full(len(axis), radius), vertex_every=2)
    maps, _, (snake,) = generate_labels([AnnotatedInstance(poly)], h, w)
    return maps, snake


def trace_only(maps):
    mask = binarize(maps, 0.4, 0.6).tcl_mask
    (comp,) = segment_instances(mask)
    return trace_axis(comp, maps, mask), comp.mask(*maps.shape) & mask


def test_trace_arc_stays_on_band():
    a = np.linspace(0.3, 2.3, 121)
    axis = np.stack([100 + 60 * np.cos(a), 100 + 60 * np.sin(a)], axis=1)
    maps, _ = maps_for_axis(axis, 10.0, 180, 200)
    points, comp_mask = trace_only(maps)
    assert len(points) > 10
    assert all(comp_mask.contains(*p.point) for p in points)
    steps = np.hypot(*np.diff([p.point for p in points], axis=0).T)
    assert np.all(steps <= 5.0 + 1.0)


def test_trace_s_curve_length():
    t = np.arange(50.0, 351.0)
    axis = np.stack([t, 100 + 25 * np.sin(2 * np.pi * t / 200)], axis=1)
    maps, _ = maps_for_axis(axis, 8.0, 200, 400)
    points, _ = trace_only(maps)
    traced = polyline_lengths(np.array([p.point for p in points]))[-1]
    truth = polyline_lengths(axis)[-1]
    assert abs(traced / truth - 1) <= 0.1


def test_centralize_moves_towards_axis(small_corpus):
    records, _ = small_corpus
    rng = np.random.default_rng(6)
    before, after = [], []
    for record in records:
        h, w = record.grid_size()
        maps, _, snakes = generate_labels(record.instances, h, w)
        mask = PixelMask(maps.tcl >= 0.5)
        axis = np.concatenate([densify_snake(s, 0.25)[0] for s in snakes])
        coords = mask.coords()
        for k in rng.choice(len(coords), size=min(200, len(coords)), replace=False):
            row, col = coords[k]
            pt = Point2(col + rng.uniform(0.05, 0.95), row + rng.uniform(0.05, 0.95))
            if not mask.contains(*pt):
                continue
            out = centralize(pt, maps, mask)
            before.append(np.hypot(*(axis - pt).T).min())
            after.append(np.hypot(*(axis - out).T).min())
    before, after = np.array(before), np.array(after)
    assert len(before) > 100
    # band pixels quantize the axis to about half a pixel
    assert np.mean(after <= before + 0.5) >= 0.99
    far = before >= 1.0
    assert far.sum() >= 20
    assert np.mean(after[far] <= before[far]) >= 0.99
    assert after.mean() < before.mean()


def test_reconstruct_single_disk():
    _, region = reconstruct([AxisPoint(Point2(10.0, 10.0), 5.0, 0.0)], 32, 32)
    rows, cols = np.mgrid[0:32, 0:32]
    assert np.array_equal(region.bits, (cols + 0.5 - 10) ** 2 + (rows + 0.5 - 10) ** 2 <= 25)


def test_detections_stay_near_text_region(small_corpus):
    records, _ = small_corpus
    for record in records:
        h, w = record.grid_size()
        maps, _, _ = generate_labels(record.instances, h, w)
        tr = maps.tr >= 0.4
        for det in detect(maps):
            reach = int(np.ceil(det.snake.radii().max())) + 1
            yy, xx = np.mgrid[-reach : reach + 1, -reach : reach + 1]
            grown = ndimage.binary_dilation(tr, structure=xx**2 + yy**2 <= reach**2)
            assert not (det.region.bits & ~grown).any()
            assert all(det.region.contains(*c) for c in det.snake.centers())


def test_non_finite_geometry():
    h, w = 20, 60
    tr = np.zeros((h, w))
    tr[4:16, :] = 1.0
    tcl = np.zeros((h, w))
    tcl[8:12, 5:55] = 1.0
    nan = np.full((h, w), np.nan)

    no_radius = GeometryMaps(tr, tcl, nan, tcl.copy(), np.zeros((h, w)))
    assert no_radius.sample(30.5, 10.5) == (0.0, 1.0, 0.0)
    assert detect(no_radius) == []
    inf_radius = GeometryMaps(tr, tcl, np.full((h, w), np.inf), nan, nan)
    assert inf_radius.sample(30.5, 10.5) == (0.0, 1.0, 0.0)
    assert detect(inf_radius) == []

    # an unreadable orientation falls back to theta = 0
    no_theta = GeometryMaps(tr, tcl, tcl * 5.0, nan, np.zeros((h, w)))
    assert no_theta.sample(30.5, 10.5) == (5.0, 1.0, 0.0)
    (det,) = detect(no_theta)
    assert det.region.contains(30.5, 10.5)


def test_trace_does_not_depend_on_seed(small_corpus):
    records, _ = small_corpus
    rng = np.random.default_rng(21)
    checked = 0
    for record in records:
        h, w = record.grid_size()
        maps, _, _ = generate_labels(record.instances, h, w)
        mask = binarize(maps, 0.4, 0.6).tcl_mask
        for comp in segment_instances(mask):
            _, base = reconstruct(trace_axis(comp, maps, mask), h, w)
            for k in rng.choice(len(comp), size=min(5, len(comp)), replace=False):
                seed = tuple(int(v) for v in comp.pixels[k])
                _, region = reconstruct(trace_axis(comp, maps, mask, seed_pixel=seed), h, w)
                assert mask_iou(region, base) >= 0.9
                checked += 1
    assert checked >= 10

    comp = segment_instances(mask)[0]
    with pytest.raises(OffComponent):
        trace_axis(comp, maps, mask, seed_pixel=(-1, 0))
