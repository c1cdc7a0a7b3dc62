"""Cost-optimal design and dispatch of tenant-electricity multi-energy systems."""

__version__ = "0.1.0"
