"""Macroscopic entanglement witnesses for collective intensity measurements."""

__version__ = "0.1.0"
