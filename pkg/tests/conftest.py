from pathlib import Path

import numpy as np
import pytest

from diskchain.configs import SynthParams
from diskchain.geometry import Disk, Point2, Polygon, rasterize_polygon
from diskchain.labelgen import AnnotatedInstance, SnakeDescriptor, extract_snake, render_label_maps
from diskchain.postproc import Detection
from diskchain.synth import synth_snakes

DATA_DIR = Path(__file__).parent / "test_data"


@pytest.fixture
def data_dir():
    return DATA_DIR


@pytest.fixture
def icdar_text():
    return (DATA_DIR / "icdar_gt.txt").read_text(encoding="utf-8")


@pytest.fixture
def polyjson_text():
    return (DATA_DIR / "polygons.jsonl").read_text(encoding="utf-8")


@pytest.fixture
def rectangle():
    """A 100 x 20 px horizontal text bar; edges 1 and 3 are the short ends."""
    return Polygon(np.array([[0.0, 0.0], [100.0, 0.0], [100.0, 20.0], [0.0, 20.0]]))


@pytest.fixture
def rectangle_snake(rectangle):
    return extract_snake(AnnotatedInstance(rectangle), n_samples=32)


@pytest.fixture
def rectangle_maps(rectangle, rectangle_snake):
    """Ground-truth maps of the bar on a 40 x 120 grid."""
    return render_label_maps([rectangle_snake], [rectangle], 40, 120)


@pytest.fixture(scope="session")
def small_corpus():
    records, oracles = synth_snakes(SynthParams(seed=3, images=4, count=[1, 3]))
    return records, oracles


@pytest.fixture
def make_detection():
    """Detection whose region is the filled polygon, with a one-disk axis."""

    def make(vertices, h, w, score=1.0):
        poly = Polygon(np.asarray(vertices, dtype=np.float64))
        cx, cy = poly.vertices.mean(axis=0)
        snake = SnakeDescriptor((Disk(Point2(cx, cy), 1.0, 0.0),))
        return Detection(snake, rasterize_polygon(poly, h, w), poly, score)

    return make
