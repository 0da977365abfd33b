"""Decentralized intersection management simulator."""

__version__ = "0.1.0"
