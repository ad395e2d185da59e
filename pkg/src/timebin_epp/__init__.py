"""Deterministic polarization-entanglement purification via time-bin entanglement."""

__version__ = "0.1.0"
