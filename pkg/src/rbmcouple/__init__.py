"""Coupled reflected Brownian motions in planar domains."""

__version__ = "0.1.0"
