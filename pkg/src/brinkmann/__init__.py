"""Lorentzian metrics with a null parallel field: Brinkmann certificates,
geodesic completeness scans and quotient dynamics."""

__version__ = "0.1.0"
