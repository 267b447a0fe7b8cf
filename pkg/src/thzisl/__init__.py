"""Hardware-limited sensing and communication bounds for THz inter-satellite MIMO links."""

__version__ = "0.1.0"
