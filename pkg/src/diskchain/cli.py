"""
The `diskchain` command line.

Subcommands: synth, gen-labels, reconstruct, roundtrip, eval, render,
rectify and bench. Exit codes: 0 success, 1 usage error, 2 malformed input,
3 internal invariant violation.
"""
import argparse
import json
import logging
import pathlib
import sys
from dataclasses import replace
from typing import Optional, Sequence

from diskchain.annotations import (
    AnnotationRecord,
    dump_detections,
    dump_polyjson,
    parse_detections,
    parse_polyjson,
)
from diskchain.benchmarks.benchmark_geometry import MIN_REPS, format_table, run_bench, write_reports
from diskchain.configs import LabelConfig, PostprocParams, RoundTripConfig
from diskchain.constants import DATASET_PRESETS, IGNORE_SUFFIX, TSM_SUFFIX
from diskchain.errors import ExitCode, exit_code_for
from diskchain.evalkit import aggregate, match_and_score
from diskchain.labelgen import generate_labels
from diskchain.maps import load_maps, save_maps
from diskchain.postproc import Detection, detect, preset_params
from diskchain.rectify import rectify_instance
from diskchain.render import (
    load_image,
    overlay_svg,
    render_overlay,
    render_score_maps,
    save_image,
    save_mask,
)
from diskchain.roundtrip import RoundTrip
from diskchain.synth import dump_oracle, synth_snakes
from diskchain.utils import load_settings, pool_map

logger = logging.getLogger(__name__)


class ArgumentParser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; report them as usage errors instead."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(ExitCode.USAGE.value, f"{self.prog}: error: {message}\n")


def _read_text(path: str) -> str:
    return pathlib.Path(path).read_text(encoding="utf-8")


def _write_text(path: str, text: str) -> None:
    pathlib.Path(path).write_text(text, encoding="utf-8")


def _label_image(record: AnnotationRecord, out_dir: pathlib.Path, labels: LabelConfig) -> str:
    h, w = record.grid_size()
    maps, ignore, _ = generate_labels(record.instances, h, w, labels)
    save_maps(maps, out_dir / f"{record.image_id}{TSM_SUFFIX}")
    if ignore.any():
        save_mask(ignore, out_dir / f"{record.image_id}{IGNORE_SUFFIX}")
    return record.image_id


def _detect_file(path: pathlib.Path, params: PostprocParams) -> str:
    maps = load_maps(path)
    dets = detect(maps, params)
    return dump_detections(path.name[: -len(TSM_SUFFIX)], maps.shape, dets)


def cmd_synth(args, settings) -> None:
    params = settings["synth"]
    if args.seed is not None:
        params = replace(params, seed=args.seed)
    if args.images is not None:
        params = replace(params, images=args.images)
    records, oracles = synth_snakes(params, progress=True)
    _write_text(args.out, dump_polyjson(records))
    if args.oracle:
        _write_text(args.oracle, dump_oracle(records, oracles))


def cmd_gen_labels(args, settings) -> None:
    records = parse_polyjson(_read_text(args.ann))
    out_dir = pathlib.Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    done = pool_map(
        _label_image, records, processes=args.processes, desc="labels", out_dir=out_dir, labels=settings["labels"]
    )
    logger.info(f"Wrote labels for {len(done)} images to {out_dir}")


def postproc_params(args, settings) -> PostprocParams:
    """Config file values, then the preset, then explicit flags."""
    params = settings["postproc"]
    if args.preset is not None:
        params = preset_params(args.preset)
    overrides = {"t_tr": args.t_tr, "t_tcl": args.t_tcl}
    if args.icdar_filters:
        overrides["icdar_filters"] = True
    return replace(params, **{k: v for k, v in overrides.items() if v is not None})


def cmd_reconstruct(args, settings) -> None:
    maps_dir = pathlib.Path(args.maps)
    if not maps_dir.is_dir():
        raise FileNotFoundError(f"No maps directory at {maps_dir}")
    files = sorted(maps_dir.glob(f"*{TSM_SUFFIX}"))
    params = postproc_params(args, settings)
    lines = pool_map(_detect_file, files, processes=args.processes, desc="reconstruct", params=params)
    _write_text(args.out, "".join(lines))
    logger.info(f"Reconstructed {len(files)} images into {args.out}")


def cmd_roundtrip(args, settings) -> None:
    synth = settings["synth"]
    if args.seed is not None:
        synth = replace(synth, seed=args.seed)
    if args.images is not None:
        synth = replace(synth, images=args.images)
    config = RoundTripConfig(
        labels=settings["labels"],
        postproc=postproc_params(args, settings),
        synth=synth,
        processes=args.processes,
        ann=args.ann,
        report=args.report,
    )
    RoundTrip(config).run()


def _detections_by_image(path: str) -> dict[str, list[Detection]]:
    out: dict[str, list[Detection]] = {}
    for rec in parse_detections(_read_text(path)):
        h, w = rec.size
        out.setdefault(rec.image_id, []).extend(Detection.from_dict(d, h, w) for d in rec.detections)
    return out


def cmd_eval(args, settings) -> None:
    iou = args.iou if args.iou is not None else settings["eval"].iou
    gts = parse_polyjson(_read_text(args.gt))
    dets = _detections_by_image(args.det)
    reports = []
    for rec in gts:
        h, w = rec.grid_size()
        reports.append(
            match_and_score(dets.pop(rec.image_id, []), rec.instances, h, w, iou, settings["eval"].ignore_iou, rec.image_id)
        )
    for image_id, extra in dets.items():
        logger.warning(f"Detections for {image_id!r} have no ground truth; all count as false positives")
        h, w = extra[0].region.shape if extra else (1, 1)
        reports.append(match_and_score(extra, [], h, w, iou, settings["eval"].ignore_iou, image_id))
    report = aggregate(reports)
    _write_text(args.report, json.dumps(report.to_dict(), indent=2) + "\n")
    logger.info(f"P={report.precision:.4f} R={report.recall:.4f} F={report.f_measure:.4f}")


def _image_id(args) -> str:
    return args.image_id or pathlib.Path(args.image).stem


def cmd_render(args, settings) -> None:
    if args.maps:
        save_image(render_score_maps(load_maps(args.maps)), args.out)
        return
    if not args.image:
        raise FileNotFoundError("render needs --image or --maps")
    img = load_image(args.image)
    image_id = _image_id(args)
    dets = _detections_by_image(args.det).get(image_id, []) if args.det else []
    gts = []
    if args.gt:
        gts = [inst for rec in parse_polyjson(_read_text(args.gt)) if rec.image_id == image_id for inst in rec.instances]
    save_image(render_overlay(img, dets, gts), args.out)
    if args.svg:
        _write_text(args.svg, overlay_svg(dets, gts, img.height, img.width))


def cmd_rectify(args, settings) -> None:
    img = load_image(args.image)
    image_id = _image_id(args)
    out_dir = pathlib.Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dets = _detections_by_image(args.det).get(image_id, [])
    for k, det in enumerate(dets):
        if len(det.snake) < 2:
            logger.warning(f"Detection {k} of {image_id} has a single disk, not rectified")
            continue
        save_image(rectify_instance(img, det.snake), out_dir / f"{image_id}_{k:03d}.png")
    logger.info(f"Rectified {len(dets)} detections of {image_id}")


def cmd_bench(args, settings) -> None:
    reports = run_bench(args.suite, args.reps, args.parallel, args.processes)
    print(format_table(reports))
    write_reports(reports, args.out)


def _reps(value: str) -> int:
    reps = int(value)
    if reps < MIN_REPS:
        raise argparse.ArgumentTypeError(f"reps must be >= {MIN_REPS}, got {reps}")
    return reps


def _add_threshold_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=sorted(DATASET_PRESETS), default=None, help="Dataset threshold preset.")
    p.add_argument("--t-tr", dest="t_tr", type=float, default=None, help="TR threshold (default 0.4).")
    p.add_argument("--t-tcl", dest="t_tcl", type=float, default=None, help="TCL threshold (default 0.6).")
    p.add_argument("--icdar-filters", action="store_true", help="Drop small boxes as for ICDAR 2015.")


def build_parser() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="YAML file overriding labels/postproc/synth/eval settings.")
    common.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--processes", type=int, default=1, help="Worker processes for batch commands.")

    parser = ArgumentParser(prog="diskchain", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    p = sub.add_parser("synth", parents=[common], help="Generate a synthetic annotation corpus.")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--images", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--oracle", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gen-labels", parents=[common], help="Write TSM1 label maps per image.")
    p.add_argument("--ann", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.set_defaults(func=cmd_gen_labels)

    p = sub.add_parser("reconstruct", parents=[common], help="Detect instances in TSM1 maps.")
    p.add_argument("--maps", required=True)
    p.add_argument("--out", required=True)
    _add_threshold_flags(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("roundtrip", parents=[common], help="Labels then detection, scored per instance.")
    p.add_argument("--ann", default=None, help="Annotations; a synthetic corpus is generated when omitted.")
    p.add_argument("--report", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--images", type=int, default=None)
    _add_threshold_flags(p)
    p.set_defaults(func=cmd_roundtrip)

    p = sub.add_parser("eval", parents=[common], help="Precision / recall / F-measure of detections.")
    p.add_argument("--det", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--iou", type=float, default=None)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render", parents=[common], help="Draw detections and ground truth, or score maps.")
    p.add_argument("--image", default=None)
    p.add_argument("--image-id", dest="image_id", default=None, help="Record id (default: image file stem).")
    p.add_argument("--det", default=None)
    p.add_argument("--gt", default=None)
    p.add_argument("--maps", default=None, help="Render a TSM1 file's TR/TCL scores instead.")
    p.add_argument("--svg", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("rectify", parents=[common], help="Unwarp every detection into a strip image.")
    p.add_argument("--image", required=True)
    p.add_argument("--image-id", dest="image_id", default=None)
    p.add_argument("--det", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.set_defaults(func=cmd_rectify)

    p = sub.add_parser("bench", parents=[common], help="Time the pixel-grid hot paths.")
    p.add_argument("--suite", default="all")
    p.add_argument("--reps", type=_reps, default=MIN_REPS)
    p.add_argument("--parallel", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        settings = load_settings(args.config)
        args.func(args, settings)
    except Exception as e:
        code = exit_code_for(e)
        logger.error(f"{args.command} failed: {e}")
        logger.debug("Traceback", exc_info=True)
        return code.value
    return ExitCode.OK.value


if __name__ == "__main__":
    sys.exit(main())
