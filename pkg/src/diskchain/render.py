"""PNG input/output and visualizations: overlays, score maps and SVG."""
import logging
import pathlib
from typing import Sequence, Union

import cv2
import numpy as np

from diskchain.constants import AXIS_COLOR, DETECTION_COLOR, GT_COLOR, TCL_COLOR, TR_COLOR
from diskchain.geometry import PixelMask
from diskchain.labelgen import AnnotatedInstance
from diskchain.maps import GeometryMaps
from diskchain.postproc import Detection
from diskchain.rectify import RasterImage

logger = logging.getLogger(__name__)


def load_image(path: Union[str, pathlib.Path]) -> RasterImage:
    """Read an 8-bit image as RGB (or single-channel grey); alpha is dropped."""
    path = pathlib.Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"No image at {path}")
    arr = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise OSError(f"Could not decode image {path}")
    if arr.dtype != np.uint8:
        arr = (arr >> 8).astype(np.uint8) if arr.dtype == np.uint16 else arr.astype(np.uint8)
    if arr.ndim == 2:
        return RasterImage(arr)
    code = cv2.COLOR_BGRA2RGB if arr.shape[2] == 4 else cv2.COLOR_BGR2RGB
    return RasterImage(cv2.cvtColor(arr, code))


def save_image(img: RasterImage, path: Union[str, pathlib.Path]) -> None:
    arr = img.samples
    arr = arr[:, :, 0] if img.channels == 1 else cv2.cvtColor(arr, cv2.COLOR_RGB2BGR)
    if not cv2.imwrite(str(path), arr):
        raise OSError(f"Could not write image {path}")


def save_mask(mask: PixelMask, path: Union[str, pathlib.Path]) -> None:
    save_image(RasterImage(mask.bits.astype(np.uint8) * 255), path)


def _color(rgb: tuple[int, int, int], channels: int) -> tuple[int, ...]:
    return tuple(rgb) if channels == 3 else (int(round(sum(rgb) / 3)),)


def _pixels(points: np.ndarray) -> np.ndarray:
    """Continuous coordinates to the integer pixel that contains them."""
    return np.floor(points).astype(np.int32).reshape(-1, 1, 2)


def render_overlay(
    img: RasterImage,
    dets: Sequence[Detection],
    gts: Sequence[AnnotatedInstance],
) -> RasterImage:
    """
    Stroke ground truth in green, detection boundaries in yellow and their
    axes in red, one pixel wide, on a copy of the image.
    """
    canvas = np.ascontiguousarray(img.samples[:, :, 0] if img.channels == 1 else img.samples).copy()
    for gt in gts:
        cv2.polylines(canvas, [_pixels(gt.polygon.vertices)], True, _color(GT_COLOR, img.channels), 1, cv2.LINE_8)
    for det in dets:
        if det.boundary is not None:
            cv2.polylines(
                canvas, [_pixels(det.boundary.vertices)], True, _color(DETECTION_COLOR, img.channels), 1, cv2.LINE_8
            )
    for det in dets:
        cv2.polylines(canvas, [_pixels(det.snake.centers())], False, _color(AXIS_COLOR, img.channels), 1, cv2.LINE_8)
    return RasterImage(canvas)


def render_score_maps(maps: GeometryMaps) -> RasterImage:
    """TR scores drawn in `TR_COLOR` and TCL in `TCL_COLOR` on black, the brighter per channel."""
    tr = np.clip(np.nan_to_num(maps.tr), 0, 1)[:, :, None] * np.array(TR_COLOR)
    tcl = np.clip(np.nan_to_num(maps.tcl), 0, 1)[:, :, None] * np.array(TCL_COLOR)
    return RasterImage(np.rint(np.maximum(tr, tcl)).astype(np.uint8))


def _svg_points(points: np.ndarray) -> str:
    return " ".join(f"{x:.2f},{y:.2f}" for x, y in points)


def overlay_svg(dets: Sequence[Detection], gts: Sequence[AnnotatedInstance], h: int, w: int) -> str:
    """The primitives of `render_overlay` as an SVG document."""

    def hex_color(rgb):
        return "#{:02x}{:02x}{:02x}".format(*rgb)

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">'
    ]
    for gt in gts:
        lines.append(
            f'  <polygon points="{_svg_points(gt.polygon.vertices)}" fill="none" stroke="{hex_color(GT_COLOR)}"/>'
        )
    for det in dets:
        if det.boundary is not None:
            lines.append(
                f'  <polygon points="{_svg_points(det.boundary.vertices)}" fill="none" '
                f'stroke="{hex_color(DETECTION_COLOR)}"/>'
            )
        lines.append(
            f'  <polyline points="{_svg_points(det.snake.centers())}" fill="none" stroke="{hex_color(AXIS_COLOR)}"/>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
