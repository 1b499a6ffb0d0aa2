"""Pure pooling and window-assembly helpers, independent of any model."""
from __future__ import annotations

import numpy as np


class AlignmentError(ValueError):
    """The mention surface cannot be located among the sentence sub-words."""


def max_pool(rows: np.ndarray) -> np.ndarray:
    """Elementwise max over sub-word vectors (rows)."""
    rows = np.asarray(rows)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise AlignmentError("max pooling needs at least one sub-word vector")
    return rows.max(axis=0)


def span_token_indices(offsets, start: int, end: int) -> list[int]:
    """Token positions whose character span overlaps [start, end); special
    tokens carry the (0, 0) span and never match."""
    hit = []
    for i, (a, b) in enumerate(offsets):
        if a == b:  # special or empty
            continue
        if a < end and b > start:
            hit.append(i)
    return hit


def build_window(token_lists: list[list[int]], center: int, budget: int) -> list[int]:
    """Flat token window around the center sentence within a sub-word budget.

    The center sentence goes in whole (truncated to the budget if it alone
    exceeds it); neighbours join alternately left/right while they fit
    entirely; the first sentence that does not fit is truncated on the side
    adjacent to the window and assembly stops.
    """
    if not (0 <= center < len(token_lists)):
        raise IndexError(f"center {center} out of range for {len(token_lists)} sentences")
    if budget < 1:
        return []
    segments = {center: token_lists[center][:budget]}
    used = len(segments[center])
    left, right = center - 1, center + 1
    take_left = True
    while used < budget and (left >= 0 or right < len(token_lists)):
        if take_left and left < 0:
            take_left = False
        if not take_left and right >= len(token_lists):
            take_left = True
        idx = left if take_left else right
        toks = token_lists[idx]
        room = budget - used
        if len(toks) > room:
            # truncate the outermost sentence on the side facing the window
            segments[idx] = toks[-room:] if take_left else toks[:room]
            used = budget
            break
        segments[idx] = toks
        used += len(toks)
        if take_left:
            left -= 1
        else:
            right += 1
        take_left = not take_left
    out: list[int] = []
    for i in sorted(segments):
        out.extend(segments[i])
    return out
