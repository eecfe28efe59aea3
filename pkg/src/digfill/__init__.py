"""Reconstruct missing bucket dig locations from excavator GPS telemetry."""

__version__ = "0.1.0"
