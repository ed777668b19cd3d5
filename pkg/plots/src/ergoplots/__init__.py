"""Deterministic figure and table rendering for run-directory CSVs."""

from .figures import FIG2_OFFSETS, KINDS, FigureSpec, fig4_series, render
from .io import SchemaError

__all__ = [
    "FIG2_OFFSETS",
    "KINDS",
    "FigureSpec",
    "SchemaError",
    "fig4_series",
    "render",
]
