"""Encrypted semantic image communication simulator with super-resolution enhancement."""

__version__ = "0.1.0"
