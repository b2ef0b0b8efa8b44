"""Synthetic near-infrared glucose sensing: simulator, models and benchmark."""

__version__ = "0.1.0"
