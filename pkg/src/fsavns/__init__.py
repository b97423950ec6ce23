"""FSAV-BDF2 pseudo-spectral solver for the forced 2D Navier-Stokes equations."""

__version__ = "0.1.0"
