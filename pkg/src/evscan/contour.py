"""Contour-event selection.

Three providers yield an order-preserving subsequence of the raw stream:
ground-truth labels from the simulator, externally supplied per-event
probabilities (EVP1 files), or a self-contained density heuristic for
streams that ship with neither.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .geometry import EventStream
from . import io as evio

__all__ = [
    "ContourProvider",
    "filter_gt",
    "filter_probabilities",
    "filter_density",
    "apply_provider",
]

DENSITY_WINDOW = 10_000
DENSITY_RADIUS = 3
DENSITY_QUANTILE = 0.5


@dataclass(frozen=True)
class ContourProvider:
    """Which contour source to use.  Exactly one variant is active."""

    variant: str = "gt-labels"  # gt-labels | probability-file | density-heuristic
    threshold: float = 0.5
    path: str | None = None  # label or probability file, depending on variant
    window: int = DENSITY_WINDOW
    radius: int = DENSITY_RADIUS
    quantile: float = DENSITY_QUANTILE

    def __post_init__(self):
        if self.variant not in ("gt-labels", "probability-file", "density-heuristic"):
            raise InputError(f"unknown contour provider {self.variant!r}")
        if not (0.0 <= self.threshold <= 1.0):
            raise InputError("probability threshold must lie in [0, 1]")


def filter_gt(events: EventStream, labels: np.ndarray) -> EventStream:
    labels = np.asarray(labels).astype(bool)
    if len(labels) != len(events):
        raise InputError(f"label count {len(labels)} != event count {len(events)}")
    return events.select(labels)


def filter_probabilities(events: EventStream, probs, threshold: float = 0.5) -> EventStream:
    """Keep events whose probability meets the threshold.

    `probs` may be an array or a path to an EVP1 file.
    """
    if isinstance(probs, (str, bytes)) or hasattr(probs, "__fspath__"):
        probs = evio.load_probabilities(probs)
    probs = np.asarray(probs, dtype=np.float64)
    if len(probs) != len(events):
        raise InputError(f"probability count {len(probs)} != event count {len(events)}")
    if probs.size and (probs.min() < 0.0 or probs.max() > 1.0):
        raise InputError("probabilities must lie in [0, 1]")
    return events.select(probs >= threshold)


def filter_density(
    events: EventStream,
    window: int = DENSITY_WINDOW,
    radius: int = DENSITY_RADIUS,
    quantile: float = DENSITY_QUANTILE,
) -> EventStream:
    """Keep events in locally dense pixel neighborhoods.

    The stream is processed in consecutive windows of `window` events; within
    a window, an event survives when the number of window events inside its
    (2r+1)^2 Chebyshev neighborhood reaches the given count quantile.  On an
    untextured subject, contour events dominate the local density.
    """
    if window <= 0:
        raise InputError("window must be positive")
    if not (0.0 <= quantile <= 1.0):
        raise InputError("quantile must lie in [0, 1]")
    n = len(events)
    keep = np.zeros(n, dtype=bool)
    for start in range(0, n, window):
        stop = min(start + window, n)
        counts = _box_counts(
            events.x[start:stop], events.y[start:stop], events.width, events.height, radius
        )
        thresh = np.quantile(counts, quantile) if counts.size else 0.0
        keep[start:stop] = counts >= thresh
    return events.select(keep)


def _box_counts(x, y, width, height, radius) -> np.ndarray:
    """Per-event count of window events within the Chebyshev-radius box."""
    hist = np.zeros((height, width), dtype=np.int64)
    np.add.at(hist, (y.astype(np.int64), x.astype(np.int64)), 1)
    integral = np.zeros((height + 1, width + 1), dtype=np.int64)
    integral[1:, 1:] = hist.cumsum(axis=0).cumsum(axis=1)
    y0 = np.clip(y.astype(np.int64) - radius, 0, height)
    y1 = np.clip(y.astype(np.int64) + radius + 1, 0, height)
    x0 = np.clip(x.astype(np.int64) - radius, 0, width)
    x1 = np.clip(x.astype(np.int64) + radius + 1, 0, width)
    return integral[y1, x1] - integral[y0, x1] - integral[y1, x0] + integral[y0, x0]


def apply_provider(events: EventStream, provider: ContourProvider, labels=None) -> EventStream:
    if provider.variant == "gt-labels":
        if labels is None:
            if provider.path is None:
                raise InputError("gt-labels provider needs labels or a label file path")
            labels = evio.load_labels(provider.path)
        return filter_gt(events, labels)
    if provider.variant == "probability-file":
        if provider.path is None:
            raise InputError("probability-file provider needs a file path")
        return filter_probabilities(events, provider.path, provider.threshold)
    return filter_density(events, provider.window, provider.radius, provider.quantile)
