"""Viscous contact wave simulator and decay-rate diagnostics for 1-D
compressible Navier-Stokes in Lagrangian coordinates."""

from contactwave.core import EndStates, Field, GasModel, Grid1D, make_grid

__all__ = ["EndStates", "Field", "GasModel", "Grid1D", "make_grid"]
__version__ = "0.1.0"
