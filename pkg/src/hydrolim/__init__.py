"""Spectral lab for the thin-strip hydrostatic limit of Navier-Stokes."""

from .discretization import GridSpec, SpectralField
from .gevrey import GevreyParams

__all__ = ["GridSpec", "SpectralField", "GevreyParams"]
__version__ = "0.1.0"
