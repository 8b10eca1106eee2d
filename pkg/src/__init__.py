"""Peaks Solver - certified stopping indices for peaks computation problems."""

__version__ = "0.1.0"
__author__ = "Peaks Solver"
__license__ = "GPL-3.0"
