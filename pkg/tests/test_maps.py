import math

import numpy as np
import pytest

from diskchain.constants import TSM_MAGIC
from diskchain.errors import (
    BadMagic,
    DimensionMismatch,
    DimensionOverflow,
    MapsFormatError,
    MapsIOError,
    ThresholdOutOfRange,
    UnsupportedChannels,
)
from diskchain.maps import GeometryMaps, binarize, decode_maps, encode_maps, load_maps, save_maps


def one_pixel(tr, tcl):
    return GeometryMaps(*(np.full((1, 1), v) for v in (tr, tcl, 3.0, 1.0, 0.0)))


def random_maps(seed, h=64, w=64):
    rng = np.random.default_rng(seed)
    stack = rng.uniform(-2, 2, size=(5, h, w)).astype(np.float32)
    return GeometryMaps.from_stack(stack.astype(np.float64))


def test_binarize():
    assert binarize(one_pixel(0.45, 0.7), 0.4, 0.6).tcl_mask.bits.tolist() == [[True]]
    assert binarize(one_pixel(0.35, 0.9), 0.4, 0.6).tcl_mask.bits.tolist() == [[False]]
    assert binarize(one_pixel(0.35, 0.9), 0.4, 0.6).tr_mask.bits.tolist() == [[False]]
    for bad in (0.0, 1.0, 1.5, -0.1):
        with pytest.raises(ThresholdOutOfRange):
            binarize(one_pixel(0.5, 0.5), bad, 0.5)
        with pytest.raises(ThresholdOutOfRange):
            binarize(one_pixel(0.5, 0.5), 0.5, bad)


def test_binarize_monotone():
    rng = np.random.default_rng(5)
    scores = rng.uniform(0, 1, size=(2, 32, 32))
    maps = GeometryMaps(scores[0], scores[1], np.zeros((32, 32)), np.ones((32, 32)), np.zeros((32, 32)))
    previous = None
    for t in np.linspace(0.05, 0.95, 19):
        b = binarize(maps, 0.3, t)
        assert b.tcl_mask.issubset(b.tr_mask)
        if previous is not None:
            assert b.tcl_mask.issubset(previous)
        previous = b.tcl_mask


def test_sample():
    maps = GeometryMaps(
        np.ones((2, 2)),
        np.ones((2, 2)),
        np.array([[4.0, 0.0], [0.0, 0.0]]),
        np.array([[3.0, 0.0], [1e-9, 0.0]]),
        np.array([[4.0, 0.0], [0.0, 1.0]]),
    )
    r, c, s = maps.sample(0.5, 0.9)
    assert (r, c, s) == (4.0, pytest.approx(0.6), pytest.approx(0.8))
    assert maps.sample(0.5, 1.5) == (0.0, 1.0, 0.0)
    assert maps.sample(1.5, 1.5) == (0.0, 0.0, 1.0)
    assert maps.sample(-0.5, 0.5) == (0.0, 1.0, 0.0)
    assert maps.sample(2.0, 0.5) == (0.0, 1.0, 0.0)


def test_maps_construction():
    with pytest.raises(DimensionMismatch):
        GeometryMaps(np.zeros((2, 2)), np.zeros((2, 3)), np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        GeometryMaps.zeros(0, 4)
    maps = GeometryMaps.zeros(3, 4)
    assert maps.shape == (3, 4)
    assert list(maps.channels()) == ["tr", "tcl", "r", "cos_t", "sin_t"]
    with pytest.raises(ValueError):
        maps.tr[0, 0] = 1.0


def test_tsm_roundtrip(tmp_path):
    maps = random_maps(0)
    path = tmp_path / "random.tsm"
    save_maps(maps, path)
    assert load_maps(path) == maps
    assert encode_maps(load_maps(path)) == path.read_bytes()

    data = encode_maps(maps)
    assert data == encode_maps(random_maps(0))
    assert data[:8] == TSM_MAGIC
    assert data[8:20] == (64).to_bytes(4, "little") + (64).to_bytes(4, "little") + (5).to_bytes(4, "little")
    assert len(data) == 20 + 5 * 64 * 64 * 4


def test_tsm_errors():
    data = encode_maps(random_maps(1, 4, 6))

    with pytest.raises(BadMagic):
        decode_maps(b"TSMAPS02" + data[8:])

    truncated = data[:-3]
    with pytest.raises(MapsIOError) as e:
        decode_maps(truncated)
    assert e.value.offset == len(truncated)
    with pytest.raises(MapsIOError) as e:
        decode_maps(data[:12])
    assert e.value.offset == 12
    with pytest.raises(MapsIOError):
        decode_maps(b"TSM")

    four = TSM_MAGIC + np.array([4, 6, 4], dtype="<u4").tobytes() + data[20:]
    with pytest.raises(UnsupportedChannels):
        decode_maps(four)

    huge = TSM_MAGIC + np.array([65536, 65537, 5], dtype="<u4").tobytes()
    with pytest.raises(DimensionOverflow):
        decode_maps(huge)

    with pytest.raises(MapsFormatError):
        decode_maps(TSM_MAGIC + np.array([0, 6, 5], dtype="<u4").tobytes())
    with pytest.raises(MapsFormatError):
        decode_maps(data + b"\x00")


def test_tsm_unit_circle_roundtrip(tmp_path):
    theta = np.linspace(0, math.pi, 24, endpoint=False).reshape(4, 6)
    maps = GeometryMaps(
        np.ones((4, 6)), np.ones((4, 6)), np.full((4, 6), 7.5), np.cos(theta), np.sin(theta)
    )
    loaded = decode_maps(encode_maps(maps))
    assert np.allclose(loaded.cos_t**2 + loaded.sin_t**2, 1.0, atol=1e-6)
    assert np.array_equal(loaded.r, maps.r)
