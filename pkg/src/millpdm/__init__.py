"""Predictive-maintenance toolkit for AI4I-format milling-machine data."""

__version__ = "0.1.0"
