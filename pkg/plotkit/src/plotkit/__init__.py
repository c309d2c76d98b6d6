"""Offline figure generation for simulator run directories."""

from .figures import FIGURE_KINDS, CompareResult, FigureRequest, compare, render
from .io import RunData, RunDirError, load_run

__version__ = "0.1.0"

__all__ = [
    "FIGURE_KINDS",
    "CompareResult",
    "FigureRequest",
    "RunData",
    "RunDirError",
    "compare",
    "load_run",
    "render",
]
