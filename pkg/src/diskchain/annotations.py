"""
Annotation and detection interchange.

The canonical annotation format is JSON lines, one image per line:
``{"image": str, "size": [h, w], "instances": [{"polygon": [[x, y], ...],
"ignore": bool}]}``. ICDAR 2015 style text files are read through
`parse_icdar`. Parsers reject malformed input with a ParseError naming the
line and, for JSON, the path of the offending value.
"""
import json
import logging
import math
from dataclasses import dataclass
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from diskchain.constants import IGNORE_TRANSCRIPTION
from diskchain.errors import ParseError
from diskchain.geometry import Polygon
from diskchain.labelgen import AnnotatedInstance

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnnotationRecord:
    image_id: str
    instances: tuple[AnnotatedInstance, ...] = ()
    size: Optional[tuple[int, int]] = None  # (h, w)

    def __post_init__(self):
        if not self.image_id:
            raise ValueError("image_id must be non-empty")
        object.__setattr__(self, "instances", tuple(self.instances))

    def grid_size(self) -> tuple[int, int]:
        """Declared size, or the smallest grid covering every vertex."""
        if self.size is not None:
            return self.size
        if not self.instances:
            return 1, 1
        pts = np.concatenate([inst.polygon.vertices for inst in self.instances])
        return max(1, math.ceil(pts[:, 1].max())), max(1, math.ceil(pts[:, 0].max()))


def parse_icdar(text: str, image_id: str = "image") -> list[AnnotationRecord]:
    """
    Parse an ICDAR 2015 ground-truth file (one image).

    Each line is ``x1,y1,...,x4,y4,transcription``; the transcription may
    contain commas and "###" marks a don't-care region.

    >>> rec = parse_icdar("0,0,10,0,10,10,0,10,###")[0]
    >>> rec.instances[0].ignore
    True
    """
    text = text.lstrip("\ufeff")
    instances = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",", 8)
        if len(parts) < 9:
            raise ParseError(f"expected 8 coordinates and a transcription, got {len(parts)} fields", line=lineno)
        try:
            coords = [float(p) for p in parts[:8]]
        except ValueError as e:
            raise ParseError(f"bad coordinate: {e}", line=lineno) from None
        if not all(math.isfinite(c) for c in coords):
            raise ParseError("non-finite coordinate", line=lineno)
        transcription = parts[8]
        instances.append(
            AnnotatedInstance(
                Polygon(np.array(coords).reshape(4, 2)),
                ignore=transcription == IGNORE_TRANSCRIPTION,
                text=transcription,
            )
        )
    return [AnnotationRecord(image_id, tuple(instances))]


def _expect(cond: bool, message: str, lineno: int, path: str) -> None:
    if not cond:
        raise ParseError(message, line=lineno, path=path)


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _parse_polygon(raw: Any, lineno: int, path: str) -> Polygon:
    _expect(isinstance(raw, list), "polygon must be a list", lineno, path)
    _expect(len(raw) >= 3, f"polygon needs >= 3 vertices, got {len(raw)}", lineno, path)
    for k, pt in enumerate(raw):
        _expect(
            isinstance(pt, list) and len(pt) == 2 and all(_is_number(c) for c in pt),
            "vertex must be [x, y] with finite numbers",
            lineno,
            f"{path}[{k}]",
        )
    return Polygon(np.array(raw, dtype=np.float64))


def _parse_record(obj: Any, lineno: int) -> AnnotationRecord:
    _expect(isinstance(obj, dict), "record must be an object", lineno, "$")
    image = obj.get("image")
    _expect(isinstance(image, str) and image != "", "image must be a non-empty string", lineno, "$.image")
    size = obj.get("size")
    if size is not None:
        _expect(
            isinstance(size, list)
            and len(size) == 2
            and all(isinstance(v, int) and not isinstance(v, bool) and v > 0 for v in size),
            "size must be [h, w] with positive integers",
            lineno,
            "$.size",
        )
        size = (size[0], size[1])
    raw_instances = obj.get("instances", [])
    _expect(isinstance(raw_instances, list), "instances must be a list", lineno, "$.instances")
    instances = []
    for k, inst in enumerate(raw_instances):
        path = f"$.instances[{k}]"
        _expect(isinstance(inst, dict), "instance must be an object", lineno, path)
        _expect("polygon" in inst, "missing polygon", lineno, f"{path}.polygon")
        polygon = _parse_polygon(inst["polygon"], lineno, f"{path}.polygon")
        ignore = inst.get("ignore", False)
        _expect(isinstance(ignore, bool), "ignore must be a boolean", lineno, f"{path}.ignore")
        text = inst.get("text")
        _expect(text is None or isinstance(text, str), "text must be a string", lineno, f"{path}.text")
        instances.append(AnnotatedInstance(polygon, ignore, text))
    return AnnotationRecord(image, tuple(instances), size)


def parse_polyjson(text: str) -> list[AnnotationRecord]:
    """Parse canonical JSON-lines annotations; blank lines are skipped."""
    records = []
    seen: set[str] = set()
    for lineno, line in enumerate(text.lstrip("\ufeff").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg} at column {e.colno}", line=lineno, path="$") from None
        record = _parse_record(obj, lineno)
        if record.image_id in seen:
            logger.warning(f"line {lineno}: duplicate image id {record.image_id!r}, kept as a separate record")
        seen.add(record.image_id)
        records.append(record)
    return records


def record_to_dict(record: AnnotationRecord) -> dict:
    out: dict[str, Any] = {"image": record.image_id}
    if record.size is not None:
        out["size"] = [int(record.size[0]), int(record.size[1])]
    instances = []
    for inst in record.instances:
        entry: dict[str, Any] = {"polygon": inst.polygon.to_list(), "ignore": bool(inst.ignore)}
        if inst.text is not None:
            entry["text"] = inst.text
        instances.append(entry)
    out["instances"] = instances
    return out


def dump_polyjson(records: Iterable[AnnotationRecord]) -> str:
    return "".join(json.dumps(record_to_dict(r)) + "\n" for r in records)


@dataclass(frozen=True)
class DetectionRecord:
    """One line of a detections file; detections stay in their JSON form."""

    image_id: str
    size: tuple[int, int]
    detections: tuple[dict, ...]


def dump_detections(image_id: str, size: Sequence[int], detections: Iterable[Any]) -> str:
    """One JSON line holding an image's detections (Detection objects or dicts)."""
    dets = [d if isinstance(d, dict) else d.to_dict() for d in detections]
    return json.dumps({"image": image_id, "size": [int(size[0]), int(size[1])], "detections": dets}) + "\n"


def parse_detections(text: str) -> list[DetectionRecord]:
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg} at column {e.colno}", line=lineno, path="$") from None
        _expect(isinstance(obj, dict), "record must be an object", lineno, "$")
        image = obj.get("image")
        _expect(isinstance(image, str) and image != "", "image must be a non-empty string", lineno, "$.image")
        size = obj.get("size")
        _expect(
            isinstance(size, list) and len(size) == 2 and all(isinstance(v, int) and v > 0 for v in size),
            "size must be [h, w] with positive integers",
            lineno,
            "$.size",
        )
        dets = obj.get("detections")
        _expect(isinstance(dets, list), "detections must be a list", lineno, "$.detections")
        for k, det in enumerate(dets):
            path = f"$.detections[{k}]"
            _expect(isinstance(det, dict), "detection must be an object", lineno, path)
            _expect(_is_number(det.get("score")), "score must be a number", lineno, f"{path}.score")
            axis = det.get("axis")
            _expect(
                isinstance(axis, list)
                and len(axis) > 0
                and all(isinstance(a, list) and len(a) == 4 and all(_is_number(v) for v in a) for a in axis),
                "axis must be a list of [x, y, r, theta]",
                lineno,
                f"{path}.axis",
            )
            boundary = det.get("boundary")
            _expect(isinstance(boundary, list), "boundary must be a list", lineno, f"{path}.boundary")
            if boundary:
                _parse_polygon(boundary, lineno, f"{path}.boundary")
        records.append(DetectionRecord(image, (size[0], size[1]), tuple(dets)))
    return records
