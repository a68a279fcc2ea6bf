"""Event-volume construction.

A window of events becomes a dense (t-bins, y-bins, x-bins) tensor: each
event deposits its polarity through a trilinear kernel onto the eight
surrounding bins, so the total mass of the volume equals the window's
polarity sum exactly (partition of unity).  Timestamps are normalized to
the window extent.
"""

from __future__ import annotations

import numpy as np

__all__ = ["build_event_volume", "event_bin_indices"]


def _axis_coords(values: np.ndarray, n_native: int, n_bins: int) -> np.ndarray:
    if n_bins == n_native:
        return values.astype(np.float64)
    return values.astype(np.float64) * (n_bins - 1) / max(n_native - 1, 1)


def _time_coords(t: np.ndarray, t_bins: int) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    extent = t[-1] - t[0] if len(t) else 0.0
    if extent <= 0:
        return np.zeros(len(t))
    return (t - t[0]) / extent * (t_bins - 1)


def build_event_volume(
    t: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    p: np.ndarray,
    width: int,
    height: int,
    t_bins: int = 10,
    x_bins: int | None = None,
    y_bins: int | None = None,
) -> np.ndarray:
    """(t_bins, y_bins, x_bins) float64 polarity volume for one event window."""
    if len(t) == 0:
        raise ValueError("event window is empty")
    x_bins = x_bins or width
    y_bins = y_bins or height
    cx = _axis_coords(np.asarray(x), width, x_bins)
    cy = _axis_coords(np.asarray(y), height, y_bins)
    ct = _time_coords(t, t_bins)
    vol = np.zeros(t_bins * y_bins * x_bins, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)

    x0 = np.floor(cx).astype(np.int64)
    y0 = np.floor(cy).astype(np.int64)
    t0 = np.floor(ct).astype(np.int64)
    fx = cx - x0
    fy = cy - y0
    ft = ct - t0
    for dt in (0, 1):
        wt = np.where(dt == 0, 1.0 - ft, ft)
        tb = np.clip(t0 + dt, 0, t_bins - 1)
        for dy in (0, 1):
            wy = np.where(dy == 0, 1.0 - fy, fy)
            yb = np.clip(y0 + dy, 0, y_bins - 1)
            for dx in (0, 1):
                wx = np.where(dx == 0, 1.0 - fx, fx)
                xb = np.clip(x0 + dx, 0, x_bins - 1)
                w = p * wt * wy * wx
                keep = w != 0.0
                np.add.at(vol, (tb * y_bins + yb) * x_bins + xb, w)
                del keep
    return vol.reshape(t_bins, y_bins, x_bins)


def event_bin_indices(
    t: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    width: int,
    height: int,
    t_bins: int = 10,
    x_bins: int | None = None,
    y_bins: int | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nearest (t, y, x) bin of each event, for per-event probability readout."""
    x_bins = x_bins or width
    y_bins = y_bins or height
    tb = np.clip(np.rint(_time_coords(t, t_bins)), 0, t_bins - 1).astype(np.int64)
    yb = np.clip(np.rint(_axis_coords(np.asarray(y), height, y_bins)), 0, y_bins - 1).astype(np.int64)
    xb = np.clip(np.rint(_axis_coords(np.asarray(x), width, x_bins)), 0, x_bins - 1).astype(np.int64)
    return tb, yb, xb
