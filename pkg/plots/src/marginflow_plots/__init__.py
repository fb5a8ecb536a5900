"""Figures for marginflow run artifacts. Consumes trajectory.csv and
summary.json only; no in-process coupling to the simulator."""

__version__ = "0.1.0"

from .figures import FigureSpec, SchemaError, render

__all__ = ["FigureSpec", "SchemaError", "render", "__version__"]
