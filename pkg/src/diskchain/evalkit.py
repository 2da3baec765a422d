import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from diskchain.errors import DegeneratePolygon, ThresholdOutOfRange
from diskchain.geometry import PixelMask, mask_iou, rasterize_polygon
from diskchain.labelgen import AnnotatedInstance
from diskchain.postproc import Detection

logger = logging.getLogger(__name__)


@dataclass
class ScoreReport:
    precision: float
    recall: float
    f_measure: float
    tp: int
    fp: int
    fn: int
    per_image: list["ScoreReport"] = field(default_factory=list)
    image: Optional[str] = None

    def to_dict(self) -> dict:
        out = {
            "precision": self.precision,
            "recall": self.recall,
            "f_measure": self.f_measure,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
        }
        if self.image is not None:
            return {"image": self.image, **out}
        out["per_image"] = [r.to_dict() for r in self.per_image]
        return out


def prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """
    Precision, recall and F-measure from match counts.

    With no detections precision is 1 if there is also no ground truth and 0
    otherwise; with no ground truth recall is 1.

    >>> prf(1, 0, 1)
    (1.0, 0.5, 0.6666666666666666)
    >>> prf(0, 0, 2)
    (0.0, 0.0, 0.0)
    """
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        precision = 1.0 if tp + fn == 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 1.0
    f = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f


def _gt_mask(inst: AnnotatedInstance, h: int, w: int) -> PixelMask:
    try:
        return rasterize_polygon(inst.polygon, h, w)
    except DegeneratePolygon:
        logger.warning("Zero-area ground-truth polygon scored as an empty mask")
        return PixelMask.empty(h, w)


def _det_mask(det: Detection, h: int, w: int) -> PixelMask:
    if det.region.shape == (h, w):
        return det.region
    if det.boundary is None:
        return PixelMask.empty(h, w)
    return rasterize_polygon(det.boundary, h, w)


def match_and_score(
    dets: Sequence[Detection],
    gts: Sequence[AnnotatedInstance],
    h: int,
    w: int,
    iou_thr: float = 0.5,
    ignore_iou: float = 0.5,
    image: Optional[str] = None,
) -> ScoreReport:
    """
    Score one image by one-to-one IoU matching.

    Detections whose best ignore-region IoU reaches `ignore_iou` and is at
    least their best IoU with any cared-for GT are neutral. The remaining
    pairs with IoU >= `iou_thr` are matched greedily by descending IoU, ties
    to the lower GT index and then the lower detection index.

    Args:
        dets: Detections of the image.
        gts: Ground-truth instances, ignore flags included.
        h: Image height used for rasterization.
        w: Image width used for rasterization.
        iou_thr: Match threshold in (0, 1].
        ignore_iou: Overlap that makes a detection neutral.
        image: Image id recorded in the report.

    Returns:
        ScoreReport: Counts and ratios for this image.
    """
    if not 0.0 < iou_thr <= 1.0:
        raise ThresholdOutOfRange(f"iou_thr must be in (0, 1], got {iou_thr}")
    care = [g for g in gts if not g.ignore]
    ignored = [g for g in gts if g.ignore]
    det_masks = [_det_mask(d, h, w) for d in dets]
    care_masks = [_gt_mask(g, h, w) for g in care]
    ignore_masks = [_gt_mask(g, h, w) for g in ignored]

    iou = np.array([[mask_iou(g, d) for d in det_masks] for g in care_masks]).reshape(
        len(care_masks), len(det_masks)
    )
    neutral = np.zeros(len(dets), dtype=bool)
    if ignore_masks:
        ign = np.array([[mask_iou(g, d) for d in det_masks] for g in ignore_masks])
        best_ignore = ign.max(axis=0)
        best_care = iou.max(axis=0) if len(care_masks) else np.zeros(len(dets))
        neutral = (best_ignore >= ignore_iou) & (best_ignore >= best_care)

    gi, di = np.nonzero((iou >= iou_thr) & ~neutral[None, :])
    order = np.lexsort((di, gi, -iou[gi, di]))
    gt_used, det_used = set(), set()
    for k in order:
        g, d = int(gi[k]), int(di[k])
        if g not in gt_used and d not in det_used:
            gt_used.add(g)
            det_used.add(d)

    tp = len(gt_used)
    fp = int(np.count_nonzero(~neutral)) - tp
    fn = len(care) - tp
    return ScoreReport(*prf(tp, fp, fn), tp, fp, fn, image=image)


def aggregate(reports: Sequence[ScoreReport]) -> ScoreReport:
    """Pool the counts of several images into one report."""
    tp = sum(r.tp for r in reports)
    fp = sum(r.fp for r in reports)
    fn = sum(r.fn for r in reports)
    return ScoreReport(*prf(tp, fp, fn), tp, fp, fn, per_image=list(reports))
