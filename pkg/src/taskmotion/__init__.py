"""Task and motion planning on runtime-expanding AND/OR graph networks."""

__version__ = "0.1.0"
