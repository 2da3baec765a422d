from dataclasses import replace

import numpy as np
import pytest

from diskchain.constants import AXIS_COLOR, DETECTION_COLOR, GT_COLOR, TCL_COLOR, TR_COLOR
from diskchain.geometry import Disk, PixelMask, Point2, Polygon
from diskchain.labelgen import AnnotatedInstance, SnakeDescriptor
from diskchain.maps import GeometryMaps
from diskchain.rectify import RasterImage
from diskchain.render import (
    load_image,
    overlay_svg,
    render_overlay,
    render_score_maps,
    save_image,
    save_mask,
)

BOX = [[10, 10], [50, 10], [50, 30], [10, 30]]


def noise(h, w, c=3, seed=0):
    return RasterImage(np.random.default_rng(seed).integers(0, 256, size=(h, w, c), dtype=np.uint8))


def test_overlay_nothing_to_draw():
    img = noise(40, 60)
    assert render_overlay(img, [], []) == img


def test_overlay_strokes_only():
    img = noise(40, 60)
    out = render_overlay(img, [], [AnnotatedInstance(Polygon(np.array(BOX, dtype=np.float64)))])
    changed = np.any(out.samples != img.samples, axis=2)
    assert changed.any()
    assert np.all(out.samples[changed] == GT_COLOR)
    rows, cols = np.nonzero(changed)
    assert rows.min() >= 9 and rows.max() <= 31
    assert cols.min() >= 9 and cols.max() <= 51
    # the interior is untouched
    assert not changed[12:29, 12:49].any()
    assert render_overlay(img, [], []) == img


def test_overlay_detection_colours(make_detection):
    img = RasterImage(np.zeros((40, 60, 3), dtype=np.uint8))
    det = make_detection(BOX, 40, 60)
    axis = SnakeDescriptor((Disk(Point2(20.5, 20.5), 8.0), Disk(Point2(40.5, 20.5), 8.0)))
    out = render_overlay(img, [replace(det, snake=axis)], []).samples
    assert tuple(out[10, 20]) == DETECTION_COLOR
    assert tuple(out[20, 30]) == AXIS_COLOR
    assert not out[25, 11:50].any()


def test_overlay_grey():
    img = noise(30, 30, c=1)
    out = render_overlay(img, [], [AnnotatedInstance(Polygon(np.array([[2, 2], [20, 2], [20, 12]], dtype=np.float64)))])
    assert out.channels == 1
    changed = out.samples != img.samples
    assert np.all(out.samples[changed] == round(sum(GT_COLOR) / 3))


def test_score_maps():
    tr = np.array([[1.0, 1.0, 0.0, 0.5, 0.0, np.nan]])
    tcl = np.array([[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]])
    maps = GeometryMaps(tr, tcl, np.zeros((1, 6)), np.ones((1, 6)), np.zeros((1, 6)))
    out = render_score_maps(maps).samples
    assert out[0].tolist() == [[255, 255, 0], [255, 0, 0], [0, 0, 0], [128, 0, 0], list(TCL_COLOR), [0, 0, 0]]
    assert tuple(out[0, 1]) == TR_COLOR


def test_svg(make_detection):
    gt = AnnotatedInstance(Polygon(np.array(BOX, dtype=np.float64)))
    det = make_detection(BOX, 40, 60)
    svg = overlay_svg([det], [gt], 40, 60)
    assert svg.startswith("<svg ")
    assert 'width="60" height="40"' in svg
    assert svg.count("<polygon") == 2
    assert svg.count("<polyline") == 1
    assert "10.00,10.00 50.00,10.00" in svg
    assert svg.rstrip().endswith("</svg>")


@pytest.mark.parametrize("channels", [1, 3])
def test_png_roundtrip(tmp_path, channels):
    img = noise(17, 23, c=channels, seed=channels)
    path = tmp_path / "img.png"
    save_image(img, path)
    assert load_image(path) == img

    mask = PixelMask(np.eye(5, dtype=bool))
    save_mask(mask, tmp_path / "mask.png")
    assert np.array_equal(load_image(tmp_path / "mask.png").samples[:, :, 0], np.eye(5, dtype=np.uint8) * 255)

    with pytest.raises(FileNotFoundError):
        load_image(tmp_path / "missing.png")
