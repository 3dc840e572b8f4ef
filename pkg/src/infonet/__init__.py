"""Information maps for target localization and networks that approximate them."""
from ._kernels import BACKEND_NAME
from .grid import GridSpec, point_belief, uniform_belief
from .histfilter import entropy, update
from .infomap import fisher_map, mi_map, mutual_info_at, normalize_map
from .sensors import BearingSensor, FovSensor, build_table, make_sensor
from .spectral import SpectralBasis, decompose, reconstruct

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME", "BearingSensor", "FovSensor", "GridSpec", "SpectralBasis", "build_table",
    "decompose", "entropy", "fisher_map", "make_sensor", "mi_map", "mutual_info_at",
    "normalize_map", "point_belief", "reconstruct", "uniform_belief", "update",
]
