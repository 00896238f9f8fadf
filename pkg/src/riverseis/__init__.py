"""Forward modeling of river-induced seismic ground motion.

The package simulates grain-scale sediment transport over a rough
inclined bed, converts particle-bed collisions and turbulent water flow
into equivalent vertical forces on the bed, propagates those forces to a
receiver through a surface-wave medium response, and analyzes the
resulting synthetic seismograms.
"""
from .errors import (
    ContractViolationError,
    InvalidConfigError,
    NumericalDegeneracyError,
    RiverSeisError,
)

__version__ = "0.1.0"

__all__ = [
    "RiverSeisError",
    "InvalidConfigError",
    "ContractViolationError",
    "NumericalDegeneracyError",
    "__version__",
]
