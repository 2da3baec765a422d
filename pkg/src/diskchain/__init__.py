from importlib.metadata import version as importlib_version

from diskchain.labelgen import SnakeDescriptor, extract_snake, render_label_maps
from diskchain.maps import GeometryMaps, load_maps, save_maps
from diskchain.postproc import Detection, detect
from diskchain.roundtrip import RoundTrip

__version__ = importlib_version("diskchain")

__all__ = [
    "Detection",
    "GeometryMaps",
    "RoundTrip",
    "SnakeDescriptor",
    "detect",
    "extract_snake",
    "load_maps",
    "render_label_maps",
    "save_maps",
]
