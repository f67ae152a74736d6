"""
Python-GMT: Computational Geometric Measure Theory Toolkit

Empirical constructions and checks around harmonic measure on rough domains:
Whitney decompositions, dyadic cubes on point clouds, porous-cube refinement,
inner and outer sawtooth domains, bilateral beta numbers and walk-on-spheres
harmonic measure estimates.

Example:
    >>> from python_gmt import gallery_domain, harmonic_measure, arc_indicator
    >>> disk = gallery_domain("ball")
    >>> harmonic_measure(disk, [0.0, 0.0], arc_indicator(0.0, 1.0472)).value
"""

__version__ = "0.1.0"
__license__ = "MIT"

from .config import PipelineConfig, PorosityConfig, SawtoothParams, WoSParams
from .core import ImplicitDomain, PointCloud, DiscreteMeasure, gallery_domain, sample_boundary
from .exceptions import GMTError, GMTInputError, GMTConstructionError, GMTRefinementError
from .harmonic import arc_indicator, ball_indicator, harmonic_measure
from .pipeline import run_pipeline

__all__ = [
    "PipelineConfig",
    "PorosityConfig",
    "SawtoothParams",
    "WoSParams",
    "ImplicitDomain",
    "PointCloud",
    "DiscreteMeasure",
    "gallery_domain",
    "sample_boundary",
    "GMTError",
    "GMTInputError",
    "GMTConstructionError",
    "GMTRefinementError",
    "arc_indicator",
    "ball_indicator",
    "harmonic_measure",
    "run_pipeline",
]
