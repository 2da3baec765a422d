import numpy as np
import pytest

from diskchain.errors import DimensionMismatch
from diskchain.geometry import PixelMask
from diskchain.maps import GeometryMaps
from diskchain.objectives import (
    PredictionMaps,
    loss,
    loss_and_grad,
    ohem_select,
    smoothed_l1,
    smoothed_l1_grad,
)


def random_pair(seed, h=16, w=16):
    """Ground truth and a prediction whose residuals stay off every kink."""
    rng = np.random.default_rng(seed)
    tr = rng.uniform(size=(h, w)) < 0.3
    tcl = tr & (rng.uniform(size=(h, w)) < 0.5)
    theta = rng.uniform(0, np.pi, size=(h, w))
    r = np.where(tcl, rng.uniform(2, 10, size=(h, w)), 0.0)
    gt = GeometryMaps(
        tr.astype(float), tcl.astype(float), r, np.where(tcl, np.cos(theta), 0.0), np.where(tcl, np.sin(theta), 0.0)
    )

    # distinct negative losses, so hard negative mining is stable under tiny perturbations
    z0 = rng.normal(size=(h, w))
    gap = -2.0 + 0.05 * rng.permutation(h * w).reshape(h, w)
    tr_logits = np.stack([z0, np.where(tr, rng.normal(size=(h, w)), z0 + gap)], axis=-1)
    pred = PredictionMaps(
        tr_logits,
        rng.normal(size=(h, w, 2)),
        np.where(tcl, r * (1 + rng.uniform(-0.5, 0.5, size=(h, w))), rng.uniform(0, 10, size=(h, w))),
        gt.cos_t + rng.uniform(-0.5, 0.5, size=(h, w)),
        gt.sin_t + rng.uniform(-0.5, 0.5, size=(h, w)),
    )
    ignore = PixelMask(rng.uniform(size=(h, w)) < 0.1)
    return pred, gt, ignore


def test_smoothed_l1():
    assert smoothed_l1(0.0) == 0.0
    assert smoothed_l1(0.5) == 0.125
    assert smoothed_l1(-2.0) == 1.5
    assert smoothed_l1(1.0) == 0.5
    assert smoothed_l1(1 - 1e-12) == pytest.approx(0.5)
    assert smoothed_l1_grad(1 - 1e-12) == pytest.approx(smoothed_l1_grad(1.0))

    x = np.random.default_rng(0).normal(scale=3, size=1_000_000)
    closed = np.where(np.abs(x) < 1, x * x / 2, np.abs(x) - 0.5)
    assert np.allclose(smoothed_l1(x), closed)
    assert np.all(smoothed_l1(x) >= 0)


def test_perfect_prediction():
    pred, gt, _ = random_pair(1)
    labels_tr = (gt.tr >= 0.5).astype(float)
    labels_tcl = (gt.tcl >= 0.5).astype(float)
    perfect = pred.replace(
        tr_logits=np.stack([10 * (1 - labels_tr), 10 * labels_tr], axis=-1),
        tcl_logits=np.stack([10 * (1 - labels_tcl), 10 * labels_tcl], axis=-1),
        r=gt.r,
        cos_t=gt.cos_t,
        sin_t=gt.sin_t,
    )
    out = loss(perfect, gt)
    assert out.l_tr <= 1e-4 and out.l_tcl <= 1e-4
    assert out.l_r == out.l_sin == out.l_cos == 0.0

    # regression terms only look at the centre line
    off_line = perfect.replace(r=np.where(gt.tcl >= 0.5, gt.r, 99.0), cos_t=np.where(gt.tcl >= 0.5, gt.cos_t, -5.0))
    assert loss(off_line, gt).l_r == 0.0
    assert loss(off_line, gt).l_cos == 0.0


def test_ohem():
    ce = np.zeros((11, 10))
    positives = np.zeros((11, 10), dtype=bool)
    positives[10] = True
    negatives = ~positives
    ce[:10] = 2.0
    sel = ohem_select(ce, positives, negatives)
    assert np.count_nonzero(sel & negatives) == 30
    assert np.all(sel[10])
    # ties go to the lowest raster index
    assert np.flatnonzero((sel & negatives).ravel()).tolist() == list(range(30))

    h, w = 11, 10
    gt_tr = positives.astype(float)
    gt = GeometryMaps(gt_tr, np.zeros((h, w)), np.zeros((h, w)), np.zeros((h, w)), np.zeros((h, w)))
    logits = np.zeros((h, w, 2))
    logits[..., 1] = np.where(positives, 1.0, 0.5)
    pred = PredictionMaps.zeros(h, w).replace(tr_logits=logits)
    ce_pos = np.log1p(np.exp(-1.0))
    ce_neg = np.log1p(np.exp(0.5))
    assert loss(pred, gt).l_tr == pytest.approx((10 * ce_pos + 30 * ce_neg) / 40)

    no_pos = GeometryMaps.zeros(h, w)
    assert loss(pred, no_pos).l_tr == 0.0


def test_gradient_matches_finite_differences():
    eps = 1e-4
    for seed in range(20):
        pred, gt, ignore = random_pair(seed)
        _, grads = loss_and_grad(pred, gt, ignore)
        for name, arr in pred.arrays().items():
            numeric = np.zeros_like(arr)
            for idx in np.ndindex(arr.shape):
                plus, minus = arr.copy(), arr.copy()
                plus[idx] += eps
                minus[idx] -= eps
                hi = loss(pred.replace(**{name: plus}), gt, ignore).total
                lo = loss(pred.replace(**{name: minus}), gt, ignore).total
                numeric[idx] = (hi - lo) / (2 * eps)
            np.testing.assert_allclose(numeric, getattr(grads, name), rtol=1e-4, atol=1e-8, err_msg=name)


def test_weights_and_invariance():
    pred, gt, ignore = random_pair(21)
    base = loss(pred, gt, ignore)
    assert base.total == pytest.approx(base.l_tr + base.l_tcl + base.l_r + base.l_sin + base.l_cos)
    assert loss(pred, gt, ignore, weights=(3, 3, 3, 3, 3)).total == pytest.approx(3 * base.total, rel=1e-12)
    only_tr = loss(pred, gt, ignore, weights=(1, 0, 0, 0, 0))
    assert only_tr.total == pytest.approx(base.l_tr)

    perm = np.random.default_rng(4).permutation(16 * 16)

    def shuffle(a):
        flat = a.reshape(256, *a.shape[2:])
        return flat[perm].reshape(a.shape)

    shuffled_pred = PredictionMaps(**{k: shuffle(v) for k, v in pred.arrays().items()})
    shuffled_gt = GeometryMaps(*(shuffle(v) for v in gt.channels().values()))
    shuffled_ignore = PixelMask(shuffle(ignore.bits))
    assert loss(shuffled_pred, shuffled_gt, shuffled_ignore).total == pytest.approx(base.total, rel=1e-12)

    assert base.to_dict()["total"] == base.total


def test_shape_checks():
    pred, gt, _ = random_pair(0)
    with pytest.raises(DimensionMismatch):
        loss(pred, GeometryMaps.zeros(8, 8))
    with pytest.raises(DimensionMismatch):
        loss(pred, gt, PixelMask.empty(8, 8))
    with pytest.raises(DimensionMismatch):
        PredictionMaps(np.zeros((4, 4)), np.zeros((4, 4, 2)), np.zeros((4, 4)), np.zeros((4, 4)), np.zeros((4, 4)))
    with pytest.raises(ValueError):
        loss(pred, gt, weights=(1, 1))
