"""Bergman kernels and Green functions on quotients of the disc by free Fuchsian groups."""

__version__ = "0.1.0"

from .hyperbolic import DISC, HALFPLANE, ModelPoint, MoebiusMap, hyp_distance  # noqa: E402
from .groups import GroupSpec, TowerSpec, Word, enumerate_ball  # noqa: E402
from .kernels import SeriesOptions, green_series, quotient_kernel_series  # noqa: E402
from .tower import run_tower_report  # noqa: E402

__all__ = [
    "DISC", "HALFPLANE", "ModelPoint", "MoebiusMap", "hyp_distance",
    "GroupSpec", "TowerSpec", "Word", "enumerate_ball",
    "SeriesOptions", "green_series", "quotient_kernel_series", "run_tower_report",
]
