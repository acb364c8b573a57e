"""Deterministic VANET traffic-incident dissemination simulator."""

__version__ = "0.1.0"
