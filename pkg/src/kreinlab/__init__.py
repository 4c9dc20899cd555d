"""Numerical laboratory for Krein systems, their spectral transforms and scattering."""

__version__ = "0.1.0"
