"""
Micro-benchmarks of the pixel-grid hot paths.

Each case builds seeded inputs, runs once untimed as a warm-up and reference,
then times `reps` runs and reports the median. Every timed run must reproduce
the reference checksum, so a benchmark never measures a broken code path.
"""
import json
import logging
import pathlib
import time
from dataclasses import asdict, dataclass
from typing import Any, Callable, Optional

import hydra
import numpy as np
from omegaconf import OmegaConf

from diskchain.configs import BenchConfig, SynthParams
from diskchain.errors import InvariantViolation, UnknownCase
from diskchain.geometry import PixelMask, disks_union_bits, rasterize_polygon
from diskchain.labelgen import generate_labels
from diskchain.maps import GeometryMaps
from diskchain.postproc import detect, segment_instances
from diskchain.synth import synth_snakes
from diskchain.utils import checksum, pool_map

logger = logging.getLogger(__name__)

MIN_REPS = 5


@dataclass
class BenchReport:
    case: str
    pixels: int
    instances: int
    median_s: float
    throughput_px_s: float
    reps: int
    checksum: str


@dataclass
class BenchCase:
    setup: Callable[[], list[Any]]
    run: Callable[[Any], Any]
    digest: Callable[[list[Any]], str]
    pixels: Callable[[list[Any]], int]
    instances: Callable[[list[Any]], int]


def _rasterize_inputs() -> list[Any]:
    records, _ = synth_snakes(SynthParams(seed=7, images=8, count=[4, 4]))
    return [inst.polygon for r in records for inst in r.instances]


def _rasterize(poly) -> np.ndarray:
    return rasterize_polygon(poly, 512, 512).bits


def _segment_inputs() -> list[Any]:
    rng = np.random.default_rng(1024)
    n = 400
    centers = rng.uniform(0, 1024, size=(n, 2))
    radii = rng.uniform(2, 24, size=n)
    return [disks_union_bits(centers, radii, 1024, 1024)]


def _segment(bits: np.ndarray) -> np.ndarray:
    labels = np.full(bits.shape, -1, dtype=np.int64)
    for comp in segment_instances(PixelMask(bits)):
        labels[comp.pixels[:, 0], comp.pixels[:, 1]] = comp.id
    return labels


def _trace_inputs() -> list[Any]:
    records, _ = synth_snakes(SynthParams(seed=512, images=4, count=[3, 3]))
    return [generate_labels(r.instances, 512, 512)[0] for r in records]


def _trace(maps: GeometryMaps) -> np.ndarray:
    dets = detect(maps)
    axes = [np.asarray(d.axis()) for d in dets]
    return np.concatenate(axes) if axes else np.zeros((0, 4))


CASES: dict[str, BenchCase] = {
    "rasterize-512": BenchCase(
        setup=_rasterize_inputs,
        run=_rasterize,
        digest=lambda results: checksum(*results),
        pixels=lambda items: 512 * 512 * len(items),
        instances=len,
    ),
    "segment-1024": BenchCase(
        setup=_segment_inputs,
        run=_segment,
        digest=lambda results: checksum(*results),
        pixels=lambda items: 1024 * 1024 * len(items),
        instances=len,
    ),
    "trace-512": BenchCase(
        setup=_trace_inputs,
        run=_trace,
        digest=lambda results: checksum(*results),
        pixels=lambda items: 512 * 512 * len(items),
        instances=lambda items: 3 * len(items),
    ),
}


def resolve_suite(suite: str) -> list[str]:
    if suite == "all":
        return list(CASES)
    names = [s.strip() for s in suite.split(",") if s.strip()]
    for name in names:
        if name not in CASES:
            raise UnknownCase(f"Unknown benchmark case {name!r}, expected 'all' or one of {sorted(CASES)}")
    return names


def run_case(name: str, reps: int, parallel: bool = False, processes: int = 4) -> BenchReport:
    case = CASES[name]
    items = case.setup()
    procs = processes if parallel else 1
    reference = case.digest(pool_map(case.run, items, processes=procs))
    times = []
    for _ in range(reps):
        start = time.perf_counter()
        results = pool_map(case.run, items, processes=procs)
        times.append(time.perf_counter() - start)
        if case.digest(results) != reference:
            raise InvariantViolation(f"{name}: result checksum changed between runs")
    median = float(np.median(times))
    pixels = case.pixels(items)
    return BenchReport(
        case=name,
        pixels=pixels,
        instances=case.instances(items),
        median_s=median,
        throughput_px_s=pixels / median if median > 0 else float("inf"),
        reps=reps,
        checksum=reference,
    )


def run_bench(
    suite: str = "all", reps: int = MIN_REPS, parallel: bool = False, processes: int = 4
) -> list[BenchReport]:
    """
    Run a suite of benchmark cases.

    Args:
        suite: "all", a case name, or comma-separated case names.
        reps: Timed repetitions per case, at least 5.
        parallel: Spread each case's inputs over `processes` workers.
        processes: Worker count for the parallel variant.

    Returns:
        list[BenchReport]: One report per case, in suite order.
    """
    if reps < MIN_REPS:
        raise ValueError(f"reps must be >= {MIN_REPS}, got {reps}")
    names = resolve_suite(suite)
    reports = []
    for name in names:
        logger.info(f"Benchmarking {name}")
        reports.append(run_case(name, reps, parallel, processes))
    return reports


def format_table(reports: list[BenchReport]) -> str:
    header = f"{'case':<16}{'pixels':>12}{'inst':>6}{'median ms':>12}{'Mpx/s':>10}"
    rows = [
        f"{r.case:<16}{r.pixels:>12}{r.instances:>6}{r.median_s * 1e3:>12.2f}{r.throughput_px_s / 1e6:>10.1f}"
        for r in reports
    ]
    return "\n".join([header, *rows])


def write_reports(reports: list[BenchReport], out: Optional[str]) -> None:
    if out:
        pathlib.Path(out).write_text(json.dumps([asdict(r) for r in reports], indent=2) + "\n", encoding="utf-8")


@hydra.main(config_name="benchconfig", version_base="1.2")
def main(config):
    print(OmegaConf.to_yaml(config))
    config: BenchConfig = OmegaConf.to_object(config)
    reports = run_bench(config.suite, config.reps, config.parallel, config.processes)
    print(format_table(reports))
    write_reports(reports, config.out)


if __name__ == "__main__":
    main()
