# TSM1 container
TSM_MAGIC = b"TSMAPS01"
TSM_CHANNELS = 5
TSM_MAX_PIXELS = 2**31
TSM_SUFFIX = ".tsm"
IGNORE_SUFFIX = ".ignore.png"

# Channel order on disk and in GeometryMaps.channels()
CHANNEL_NAMES = ("tr", "tcl", "r", "cos_t", "sin_t")

# Per-benchmark thresholds (t_tr, t_tcl) and post-processing switches.
DATASET_PRESETS: dict[str, dict] = {
    "totaltext": {"t_tr": 0.4, "t_tcl": 0.6, "icdar_filters": False},
    "ctw1500": {"t_tr": 0.4, "t_tcl": 0.5, "icdar_filters": False},
    "msra_td500": {"t_tr": 0.4, "t_tcl": 0.6, "icdar_filters": False},
    "icdar2015": {"t_tr": 0.4, "t_tcl": 0.9, "icdar_filters": True},
}

# ICDAR "don't care" transcription
IGNORE_TRANSCRIPTION = "###"

# Overlay and score-map colours, RGB
DETECTION_COLOR = (255, 255, 0)
GT_COLOR = (0, 255, 0)
AXIS_COLOR = (255, 0, 0)
TR_COLOR = (255, 0, 0)
TCL_COLOR = (255, 255, 0)
