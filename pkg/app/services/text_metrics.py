# app/services/text_metrics.py
from typing import Iterable

import numpy as np

from app.core.errors import EmptyInventoryError
from app.models.page import TextMetrics, TextSpan


def compute_text_metrics(spans: Iterable[TextSpan], spacing_multiplier: float = 1.5) -> TextMetrics:
    """Average character width and median line height over a document's spans."""
    spans = list(spans)
    if not spans:
        raise EmptyInventoryError("no text inventory")
    total_width = float(sum(s.bbox.width for s in spans))
    total_chars = sum(len(s.text) for s in spans)
    heights = [s.bbox.height for s in spans if s.bbox.height > 0]
    if total_chars == 0 or total_width <= 0 or not heights:
        raise EmptyInventoryError("no text inventory")
    avg = total_width / total_chars
    return TextMetrics(
        avg_char_width_pt=avg,
        median_line_height_pt=float(np.median(heights)),
        est_spacing_pt=spacing_multiplier * avg,
        spacing_multiplier=spacing_multiplier,
    )
