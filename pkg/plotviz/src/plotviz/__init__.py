"""Figure rendering for the experiment CSV schema."""
from .figures import (
    BOUND_LABEL,
    BOUND_POLICY,
    FIGURES,
    REQUIRED_COLUMNS,
    FigureSpec,
    RenderReport,
    Series,
    render,
)

__all__ = [
    "BOUND_LABEL",
    "BOUND_POLICY",
    "FIGURES",
    "REQUIRED_COLUMNS",
    "FigureSpec",
    "RenderReport",
    "Series",
    "render",
]
