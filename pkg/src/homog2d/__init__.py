"""Numerical experiments on compressible flow around a small hole in a 2D box."""

from __future__ import annotations

__version__ = "0.1.0"
