"""Spectral laboratory for long-range percolation graphs on Z^d."""
__version__ = "0.1.0"
