"""Ditching impact loads: strip-method simulation, spatio-temporal load
datasets and time-marching surrogate models."""

__version__ = "0.1.0"

from .errors import (ChecksumError, ConfigError, DitchkitError, FormatError,
                     GeometryError, IncompleteGridError, MagicError,
                     NumericError, RolloutError, StepError, TruncatedError,
                     VersionError)
from .geometry import (AeroConfig, CrossSection, HullMesh, Scenario,
                       build_arc_section, build_circular_section,
                       build_fuselage_mesh, build_prism_mesh)
from .rng import Rng

__all__ = [
    "__version__", "Rng",
    "AeroConfig", "CrossSection", "HullMesh", "Scenario",
    "build_arc_section", "build_circular_section", "build_fuselage_mesh",
    "build_prism_mesh",
    "DitchkitError", "ConfigError", "GeometryError", "NumericError",
    "StepError", "RolloutError", "FormatError", "MagicError",
    "VersionError", "TruncatedError", "ChecksumError",
    "IncompleteGridError",
]
