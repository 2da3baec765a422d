"""
Round trip: annotations -> label maps -> detections, scored against the
source polygons. With ground-truth maps standing in for a trained network,
this measures how faithfully the representation and the post-processor
recover each instance.
"""
import json
import logging
import pathlib
from typing import Optional, Sequence

import numpy as np

from diskchain.annotations import AnnotationRecord, parse_polyjson
from diskchain.configs import LabelConfig, PostprocParams, RoundTripConfig, SynthParams
from diskchain.geometry import mask_iou, rasterize_polygon
from diskchain.labelgen import generate_labels
from diskchain.postproc import detect
from diskchain.synth import synth_snakes
from diskchain.utils import pool_map

logger = logging.getLogger(__name__)


def match_instances(
    record: AnnotationRecord,
    labels: LabelConfig,
    postproc: PostprocParams,
) -> dict:
    """
    Round-trip one image.

    Each cared-for source polygon is paired one-to-one with a detection by
    descending mask IoU; unpaired polygons score 0.
    """
    h, w = record.grid_size()
    maps, _, _ = generate_labels(record.instances, h, w, labels)
    dets = detect(maps, postproc)
    sources = [rasterize_polygon(inst.polygon, h, w) for inst in record.instances if not inst.ignore]
    iou = np.array([[mask_iou(s, d.region) for d in dets] for s in sources]).reshape(len(sources), len(dets))

    best = np.zeros(len(sources))
    gi, di = np.nonzero(iou > 0)
    used_g, used_d = set(), set()
    for k in np.lexsort((di, gi, -iou[gi, di])):
        g, d = int(gi[k]), int(di[k])
        if g not in used_g and d not in used_d:
            used_g.add(g)
            used_d.add(d)
            best[g] = iou[g, d]
    return {
        "image": record.image_id,
        "instances": len(sources),
        "detections": len(dets),
        "count_match": len(sources) == len(dets),
        "ious": [float(v) for v in best],
    }


class RoundTrip:
    """
    Run the round trip over a corpus and summarize it.

    Args:
        config: Round-trip settings; `ann` names an annotation file to read,
            otherwise the corpus is generated from `config.synth`.
        records: Records to use instead of reading or generating them.
    """

    def __init__(self, config: RoundTripConfig, records: Optional[Sequence[AnnotationRecord]] = None) -> None:
        self.config = config
        # groups left unset (MISSING) fall back to their defaults
        self.labels = config.labels if isinstance(config.labels, LabelConfig) else LabelConfig()
        self.postproc = config.postproc if isinstance(config.postproc, PostprocParams) else PostprocParams()
        self.synth = config.synth if isinstance(config.synth, SynthParams) else SynthParams()
        self.records = list(records) if records is not None else None

    def load_records(self) -> list[AnnotationRecord]:
        if self.records is not None:
            return self.records
        if self.config.ann:
            return parse_polyjson(pathlib.Path(self.config.ann).read_text(encoding="utf-8"))
        return synth_snakes(self.synth)[0]

    def run(self) -> dict:
        records = self.load_records()
        per_image = pool_map(
            match_instances,
            records,
            processes=self.config.processes,
            labels=self.labels,
            postproc=self.postproc,
        )
        ious = np.array([v for img in per_image for v in img["ious"]])
        report = {
            "images": len(per_image),
            "instances": int(len(ious)),
            "count_match_rate": float(np.mean([img["count_match"] for img in per_image])) if per_image else 1.0,
            "iou_pass_rate": float(np.mean(ious >= self.config.iou_pass)) if len(ious) else 1.0,
            "mean_iou": float(ious.mean()) if len(ious) else 1.0,
            "min_iou": float(ious.min()) if len(ious) else 1.0,
            "per_image": per_image,
        }
        logger.info(
            f"Round trip over {report['images']} images: count match {report['count_match_rate']:.3f}, "
            f"IoU >= {self.config.iou_pass} for {report['iou_pass_rate']:.3f} of instances"
        )
        if self.config.report:
            pathlib.Path(self.config.report).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
        return report
