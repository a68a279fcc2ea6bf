"""Inference: per-event contour probabilities, order-aligned with the
stream, exported in the EVP1 format the primary pipeline consumes."""

from __future__ import annotations

import numpy as np
import torch
from evscan import io as evio

from .data import window_stream
from .train import load_weights, readout

__all__ = ["infer_events", "infer"]


@torch.no_grad()
def infer_events(events, model, t_bins: int, window_events: int) -> np.ndarray:
    probs = np.empty(len(events), dtype=np.float64)
    for rec in window_stream(events, window_events, t_bins):
        logits = model(torch.from_numpy(rec.volume).float()[None])[0]
        p = torch.sigmoid(readout(logits, rec.bins)).numpy()
        probs[rec.start: rec.start + rec.count] = p
    return probs


def infer(events_path, weights_path, out_path) -> np.ndarray:
    """events file + weights archive -> EVP1 probability file."""
    events = evio.load_events(events_path)
    model, sensor, cfg = load_weights(weights_path)
    if (events.width, events.height) != sensor:
        raise ValueError(
            f"sensor size mismatch: events are {events.width}x{events.height}, "
            f"weights were trained for {sensor[0]}x{sensor[1]}"
        )
    probs = infer_events(events, model, cfg["t_bins"], cfg["window_events"])
    evio.save_probabilities(out_path, probs)
    return probs
