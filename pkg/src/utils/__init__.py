"""Utility functions for Peaks Solver."""

from .file_utils import FileUtils
from .report import Report
from .expr import Expression, constant, evaluate, parse, to_text

__all__ = ["FileUtils", "Report", "Expression", "constant", "evaluate", "parse", "to_text"]
