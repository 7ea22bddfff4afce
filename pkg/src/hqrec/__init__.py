"""Treatment-time prediction forests and hospital queuing recommendation."""

__version__ = "0.1.0"
