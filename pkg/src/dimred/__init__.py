"""Desk-scale laboratory for quasi-one-dimensional condensate dynamics."""

__version__ = "0.1.0"
