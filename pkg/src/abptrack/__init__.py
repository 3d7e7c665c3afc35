"""Auxiliary-beam-pair angle tracking for wideband mmWave links."""

__version__ = "0.1.0"
