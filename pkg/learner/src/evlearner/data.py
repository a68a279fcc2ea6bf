"""Training records from simulator datasets: event windows plus aligned
ground-truth labels, read through the primary pipeline's file formats."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from evscan import io as evio

from .volumes import build_event_volume, event_bin_indices

__all__ = ["WindowRecord", "load_windows", "window_stream"]


@dataclass
class WindowRecord:
    volume: np.ndarray  # (t_bins, H, W)
    bins: tuple[np.ndarray, np.ndarray, np.ndarray]  # per-event (t, y, x) bin
    labels: np.ndarray | None  # aligned bool, None at inference time
    start: int  # index of the window's first event in the stream
    count: int


def window_stream(events, window_events: int, t_bins: int, labels=None):
    """Consecutive windows of the stream (the last one may be short)."""
    n = len(events)
    for start in range(0, n, window_events):
        stop = min(start + window_events, n)
        t = events.t[start:stop]
        x = events.x[start:stop]
        y = events.y[start:stop]
        p = events.p[start:stop]
        volume = build_event_volume(t, x, y, p, events.width, events.height, t_bins)
        bins = event_bin_indices(t, x, y, events.width, events.height, t_bins)
        lab = labels[start:stop] if labels is not None else None
        yield WindowRecord(volume, bins, lab, start, stop - start)


def load_windows(dataset_dir, window_events: int = 10_000, t_bins: int = 10, max_windows: int | None = None):
    """All (or the first max_windows) training windows of one dataset dir."""
    dataset_dir = Path(dataset_dir)
    events = evio.load_events(dataset_dir / "events.evc")
    labels = evio.load_labels(dataset_dir / "labels.evl")
    if len(labels) != len(events):
        raise ValueError(f"{dataset_dir}: labels/events length mismatch")
    out = []
    for rec in window_stream(events, window_events, t_bins, labels):
        out.append(rec)
        if max_windows is not None and len(out) >= max_windows:
            break
    return out, (events.width, events.height)
