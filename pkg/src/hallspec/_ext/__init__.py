"""Compiled kernels (Cython). Import through :mod:`hallspec.kernels`."""
