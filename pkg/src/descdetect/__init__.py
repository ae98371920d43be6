"""Pixel-free video manipulation detection from multimedia stream descriptors."""

__version__ = "0.1.0"
