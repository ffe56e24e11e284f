"""Figure rendering for fogbandit CSV run bundles."""

from .render import FIGURE_KINDS, FigureSpec, RenderError, RenderResult, render

__all__ = ["FIGURE_KINDS", "FigureSpec", "RenderError", "RenderResult", "render"]

__version__ = "0.1.0"
