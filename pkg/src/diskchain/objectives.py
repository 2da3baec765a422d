"""
Training objectives over predicted and ground-truth maps.

The classification terms are softmax cross-entropies: TR over positives plus
the hardest negatives (at most three negatives per positive), TCL over the
ground-truth text region. The regression terms are smoothed-L1 penalties on
the relative radius error and on the cos / sin errors, averaged over the
ground-truth TCL. Every term is a mean, and `loss_and_grad` also returns the
exact gradient of the weighted total.
"""
import logging
from dataclasses import dataclass, fields
from typing import Optional, Sequence, Union

import numpy as np

from diskchain.errors import DimensionMismatch
from diskchain.geometry import PixelMask
from diskchain.maps import GeometryMaps

logger = logging.getLogger(__name__)

OHEM_RATIO = 3
R_EPS = 1e-6
DEFAULT_WEIGHTS = (1.0, 1.0, 1.0, 1.0, 1.0)


def smoothed_l1(x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """
    0.5 * x**2 where |x| < 1, |x| - 0.5 elsewhere.

    >>> smoothed_l1(0.5)
    0.125
    >>> smoothed_l1(2.0)
    1.5
    """
    a = np.abs(x)
    out = np.where(a < 1, 0.5 * np.square(x), a - 0.5)
    return float(out) if np.ndim(out) == 0 else out


def smoothed_l1_grad(x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    out = np.where(np.abs(x) < 1, x, np.sign(x))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class PredictionMaps:
    """Raw network output: two-class logits for TR and TCL plus geometry."""

    tr_logits: np.ndarray  # (h, w, 2), index 1 is the text class
    tcl_logits: np.ndarray  # (h, w, 2)
    r: np.ndarray
    cos_t: np.ndarray
    sin_t: np.ndarray

    def __post_init__(self):
        shape = None
        for f in fields(self):
            arr = np.array(getattr(self, f.name), dtype=np.float64)
            plane = arr.shape[:2]
            expected_ndim = 3 if f.name.endswith("logits") else 2
            if arr.ndim != expected_ndim or (expected_ndim == 3 and arr.shape[2] != 2):
                raise DimensionMismatch(f"{f.name} has shape {arr.shape}")
            if shape is None:
                shape = plane
            elif plane != shape:
                raise DimensionMismatch(f"{f.name} covers {plane}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{f.name} contains non-finite values")
            object.__setattr__(self, f.name, arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.r.shape  # type: ignore

    @classmethod
    def zeros(cls, h: int, w: int) -> "PredictionMaps":
        return cls(np.zeros((h, w, 2)), np.zeros((h, w, 2)), np.zeros((h, w)), np.zeros((h, w)), np.zeros((h, w)))

    def arrays(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def replace(self, **arrays) -> "PredictionMaps":
        return PredictionMaps(**{**self.arrays(), **arrays})


@dataclass(frozen=True)
class LossBreakdown:
    l_tr: float
    l_tcl: float
    l_r: float
    l_sin: float
    l_cos: float
    total: float

    def to_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _softmax_ce(logits: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel cross-entropy and its gradient w.r.t. the two logits."""
    m = logits.max(axis=-1, keepdims=True)
    e = np.exp(logits - m)
    z = e.sum(axis=-1, keepdims=True)
    probs = e / z
    lse = (m + np.log(z))[..., 0]
    picked = np.take_along_axis(logits, labels[..., None].astype(np.int64), axis=-1)[..., 0]
    onehot = np.stack([labels == 0, labels == 1], axis=-1).astype(np.float64)
    return lse - picked, probs - onehot


def ohem_select(ce: np.ndarray, positives: np.ndarray, negatives: np.ndarray) -> np.ndarray:
    """
    Pixels entering the TR loss: all positives and the hardest negatives.

    At most `3 * #positives` negatives are kept, highest loss first, ties to
    the lower raster index.
    """
    flat_ce = ce.ravel()
    neg_idx = np.flatnonzero(negatives.ravel())
    k = min(OHEM_RATIO * int(np.count_nonzero(positives)), len(neg_idx))
    order = np.lexsort((neg_idx, -flat_ce[neg_idx]))
    selected = positives.ravel().copy()
    selected[neg_idx[order[:k]]] = True
    return selected.reshape(ce.shape)


def loss_and_grad(
    pred: PredictionMaps,
    gt: GeometryMaps,
    ignore: Optional[PixelMask] = None,
    weights: Sequence[float] = DEFAULT_WEIGHTS,
) -> tuple[LossBreakdown, PredictionMaps]:
    """
    Loss terms and the gradient of their weighted total.

    Args:
        pred: Predicted logits and geometry.
        gt: Ground-truth maps; TR and TCL are read as labels at 0.5.
        ignore: Don't-care pixels, excluded from every term.
        weights: Weights of (l_tr, l_tcl, l_r, l_sin, l_cos).

    Returns:
        tuple[LossBreakdown, PredictionMaps]: The loss terms and the gradient
        of `total` w.r.t. every prediction entry.
    """
    if pred.shape != gt.shape:
        raise DimensionMismatch(f"Prediction {pred.shape} vs ground truth {gt.shape}")
    if ignore is not None and ignore.shape != gt.shape:
        raise DimensionMismatch(f"Ignore mask {ignore.shape} vs ground truth {gt.shape}")
    if len(weights) != 5:
        raise ValueError(f"Expected 5 loss weights, got {len(weights)}")
    w_tr, w_tcl, w_r, w_sin, w_cos = (float(x) for x in weights)
    care = ~ignore.bits if ignore is not None else np.ones(gt.shape, dtype=bool)
    gt_tr = gt.tr >= 0.5
    gt_tcl = (gt.tcl >= 0.5) & gt_tr

    # text region, with hard negative mining
    ce_tr, dce_tr = _softmax_ce(pred.tr_logits, gt_tr)
    sel = ohem_select(ce_tr, gt_tr & care, ~gt_tr & care)
    n_sel = np.count_nonzero(sel)
    l_tr = float(ce_tr[sel].sum() / n_sel) if n_sel else 0.0
    g_tr = np.where(sel[..., None], dce_tr / max(n_sel, 1), 0.0) * w_tr

    # centre line, inside the text region only
    ce_tcl, dce_tcl = _softmax_ce(pred.tcl_logits, gt_tcl)
    inside = gt_tr & care
    n_in = np.count_nonzero(inside)
    l_tcl = float(ce_tcl[inside].sum() / n_in) if n_in else 0.0
    g_tcl = np.where(inside[..., None], dce_tcl / max(n_in, 1), 0.0) * w_tcl

    # geometry, on the centre line only
    on_tcl = gt_tcl & care
    n_tcl = np.count_nonzero(on_tcl)
    on_r = on_tcl & (gt.r >= R_EPS)
    n_r = np.count_nonzero(on_r)
    safe_r = np.where(on_r, gt.r, 1.0)

    res_r = (pred.r - gt.r) / safe_r
    res_cos = pred.cos_t - gt.cos_t
    res_sin = pred.sin_t - gt.sin_t
    l_r = float(smoothed_l1(res_r[on_r]).sum() / n_r) if n_r else 0.0
    l_cos = float(smoothed_l1(res_cos[on_tcl]).sum() / n_tcl) if n_tcl else 0.0
    l_sin = float(smoothed_l1(res_sin[on_tcl]).sum() / n_tcl) if n_tcl else 0.0
    g_r = np.where(on_r, smoothed_l1_grad(res_r) / safe_r / max(n_r, 1), 0.0) * w_r
    g_cos = np.where(on_tcl, smoothed_l1_grad(res_cos) / max(n_tcl, 1), 0.0) * w_cos
    g_sin = np.where(on_tcl, smoothed_l1_grad(res_sin) / max(n_tcl, 1), 0.0) * w_sin

    total = w_tr * l_tr + w_tcl * l_tcl + w_r * l_r + w_sin * l_sin + w_cos * l_cos
    breakdown = LossBreakdown(l_tr, l_tcl, l_r, l_sin, l_cos, total)
    grads = PredictionMaps(g_tr, g_tcl, g_r, g_cos, g_sin)
    return breakdown, grads


def loss(
    pred: PredictionMaps,
    gt: GeometryMaps,
    ignore: Optional[PixelMask] = None,
    weights: Sequence[float] = DEFAULT_WEIGHTS,
) -> LossBreakdown:
    return loss_and_grad(pred, gt, ignore, weights)[0]
