"""Numerical laboratory for a fifth-order Boussinesq system with boundary feedback."""

__version__ = "0.1.0"
