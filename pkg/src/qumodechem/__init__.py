"""Qubit-qumode emulation, gate synthesis and VQE for small molecules."""

__version__ = "0.1.0"
