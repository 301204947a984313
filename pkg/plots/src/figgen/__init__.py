"""Batch figure generation for sum-rate sweep CSVs."""

__version__ = "0.1.0"

from .figures import FigureSpec, render
from .records import SchemaError, read_rows

__all__ = ["FigureSpec", "SchemaError", "read_rows", "render"]
