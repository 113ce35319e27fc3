"""Two-dimensional bootstrap percolation: simulation, exact oracles and analytic bounds."""

__version__ = "0.1.0"

from .lattice import Configuration, Deficiency, Rectangle, deficiency, rect_metrics, sample_configuration
from .dynamics import (FROBOSE, MODIFIED, STANDARD, UpdateRule, closure, crosses_left_right,
                       find_spanned_rectangle_at_scale, internally_spans, percolates, spans_with_helper, step)

__all__ = [
    "Configuration", "Deficiency", "Rectangle", "deficiency", "rect_metrics", "sample_configuration",
    "FROBOSE", "MODIFIED", "STANDARD", "UpdateRule", "closure", "crosses_left_right",
    "find_spanned_rectangle_at_scale", "internally_spans", "percolates", "spans_with_helper", "step",
]
