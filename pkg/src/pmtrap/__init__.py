"""pmtrap: simulator and analysis toolkit for rod-shaped quantum emitters
optically trapped at the focus of a deep parabolic mirror.

Subsystems: dipole aperture optics (mirror_optics), Rayleigh trap mechanics
and gas damping (trap_mechanics), axial Langevin motion and rod alignment
(langevin), Monte Carlo pulsed photon emission (photon_emitter), the
measurement pipeline (analysis), dataset formats (io_formats), configuration
(config) and the command-line entry points (cli).
"""

__version__ = "0.1.0"

from . import constants  # noqa: F401
from .errors import (  # noqa: F401
    ConfigError,
    FitError,
    InsufficientDataError,
    InvalidGeometryError,
    MissingArtifactError,
    NoPeakError,
    PmtrapError,
    UndefinedResultError,
)
