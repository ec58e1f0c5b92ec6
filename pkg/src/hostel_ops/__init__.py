"""Hostel operations engine: room allocation, complaint triage, anomaly
detection, complaint forecasting and signed gate passes."""

__version__ = "0.1.0"
