"""Spectral toolkit for steady incompressible Hall-MHD in homogeneous Besov spaces."""
__version__ = "0.1.0"
