"""Boundary-driven spin chains - collision model, Lindblad limit and thermodynamic bookkeeping."""

__version__ = "0.1.0"
