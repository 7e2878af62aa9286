"""Uncertainty quantification of terrain path loss with adaptive polynomial chaos."""
__version__ = "0.1.0"
