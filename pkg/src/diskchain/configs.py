from dataclasses import dataclass, field
from typing import Any, List, Optional

from hydra.core.config_store import ConfigStore
from omegaconf import MISSING


@dataclass
class BaseConfig:
    pass


@dataclass
class LabelConfig(BaseConfig):
    n_samples: int = 32
    # 1 sample per `px_per_sample` px of sideline, clamped to [min, max]
    adaptive_samples: bool = False
    px_per_sample: float = 2.0
    min_samples: int = 8
    max_samples: int = 128
    tcl_expand: float = 0.2  # TCL half-width as a fraction of r
    end_shrink: float = 0.5  # axis trim at each end as a fraction of r_end
    theta_window: int = 5  # axis disks used to fit each orientation
    densify_step: float = 0.5  # px between interpolated axis disks


@dataclass
class PostprocParams(BaseConfig):
    t_tr: float = 0.4
    t_tcl: float = 0.6
    min_side_px: float = 10.0
    min_area_px: float = 300.0
    tcl_count_factor: float = 0.2
    tr_overlap_min: float = 0.5
    icdar_filters: bool = False
    max_halvings: int = 6
    min_stride: float = 1.0  # px
    preset: Optional[str] = None


@dataclass
class SynthParams(BaseConfig):
    seed: int = 42
    images: int = 100
    count: List[int] = field(default_factory=lambda: [1, 4])  # instances per image
    image_size: List[int] = field(default_factory=lambda: [512, 512])  # h, w
    radius_range: List[float] = field(default_factory=lambda: [6.0, 24.0])
    curvature_range: List[float] = field(default_factory=lambda: [-0.006, 0.006])
    length_range: List[float] = field(default_factory=lambda: [160.0, 320.0])
    min_separation: float = 8.0
    # axis length is at least min_aspect times the largest radius
    min_aspect: float = 8.0
    radius_wobble: float = 0.15
    axis_step: float = 2.0
    vertex_step: float = 4.0
    margin: float = 2.0
    max_attempts: int = 1000


@dataclass
class EvalConfig(BaseConfig):
    iou: float = 0.5
    ignore_iou: float = 0.5


@dataclass
class BenchConfig(BaseConfig):
    hydra: Any = field(
        default_factory=lambda: {
            "run": {"dir": "logs/benchmarks/geometry/${now:%Y-%m-%d-%H-%M-%S}"}
        }
    )
    suite: str = "all"
    reps: int = 5
    parallel: bool = False
    processes: int = 4
    out: Optional[str] = None


defaults_roundtrip = [
    {"labels": "default"},
    {"postproc": "totaltext"},
    {"synth": "default"},
    "_self_",
]


@dataclass
class RoundTripConfig(BaseConfig):
    hydra: Any = field(
        default_factory=lambda: {
            "run": {"dir": "logs/roundtrip/${hydra.job.override_dirname}"}
        }
    )
    defaults: List[Any] = field(default_factory=lambda: defaults_roundtrip)
    labels: Any = MISSING
    postproc: Any = MISSING
    synth: Any = MISSING
    # Instance counts as a pass when its IoU with the source polygon reaches this.
    iou_pass: float = 0.85
    processes: int = 1
    # Read annotations from here instead of generating them.
    ann: Optional[str] = None
    report: Optional[str] = "roundtrip.json"


def register_configstore() -> ConfigStore:
    """Register configs with Hydra's ConfigStore."""
    cs = ConfigStore.instance()
    cs.store(group="labels", name="default", node=LabelConfig)
    cs.store(group="labels", name="adaptive", node=LabelConfig(adaptive_samples=True))
    cs.store(group="postproc", name="totaltext", node=PostprocParams)
    cs.store(
        group="postproc",
        name="ctw1500",
        node=PostprocParams(t_tcl=0.5, preset="ctw1500"),
    )
    cs.store(
        group="postproc",
        name="icdar2015",
        node=PostprocParams(t_tcl=0.9, icdar_filters=True, preset="icdar2015"),
    )
    cs.store(group="synth", name="default", node=SynthParams)
    cs.store(group="eval", name="default", node=EvalConfig)
    cs.store(name="roundtripconfig", node=RoundTripConfig)
    cs.store(name="benchconfig", node=BenchConfig)
    return cs


CONFIGSTORE = register_configstore()
