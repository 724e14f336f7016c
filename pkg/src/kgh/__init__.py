"""Pseudospectral Klein-Gordon-Hartree simulator and diagnostics."""

__version__ = "0.1.0"
