"""Spatio-temporal EV charging demand and PV complementarity simulator."""

__version__ = "0.1.0"
