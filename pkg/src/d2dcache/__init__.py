"""Delay-optimal caching placement for D2D networks with mobility."""

__version__ = "0.1.0"
