"""Evaluation metrics: pelvis-aligned mean per-joint position error and
surface Chamfer Distance, reported in millimeters.

The Chamfer Distance follows the mean-of-squared-distances definition in
both directions; because it is quadratic its natural unit is mm^2, and an
RMS distance in plain mm is reported alongside for interpretability.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .errors import InputError
from .geometry import TriMesh
from .surface import sample_surface

__all__ = [
    "mpjpe",
    "pel_align",
    "pel_mpjpe",
    "chamfer_distance_points",
    "chamfer_distance",
    "rms_from_cd",
    "aggregate",
]

M_TO_MM = 1000.0


def mpjpe(est: np.ndarray, gt: np.ndarray) -> float:
    """Mean 3D Euclidean joint error in millimeters."""
    est = np.asarray(est, dtype=np.float64).reshape(-1, 3)
    gt = np.asarray(gt, dtype=np.float64).reshape(-1, 3)
    if est.shape != gt.shape:
        raise InputError(f"joint count mismatch: {est.shape[0]} vs {gt.shape[0]}")
    return float(np.linalg.norm(est - gt, axis=1).mean() * M_TO_MM)


def pel_align(joints: np.ndarray, pelvis_index: int = 0) -> np.ndarray:
    """Translate so the pelvis joint sits at the origin."""
    joints = np.asarray(joints, dtype=np.float64).reshape(-1, 3)
    if not (0 <= pelvis_index < len(joints)):
        raise InputError(f"pelvis index {pelvis_index} out of range")
    return joints - joints[pelvis_index]


def pel_mpjpe(est: np.ndarray, gt: np.ndarray, pelvis_index: int = 0) -> float:
    return mpjpe(pel_align(est, pelvis_index), pel_align(gt, pelvis_index))


def chamfer_distance_points(X: np.ndarray, Y: np.ndarray) -> float:
    """Mean-of-squared nearest-neighbor distance, both directions (m^2)."""
    X = np.asarray(X, dtype=np.float64).reshape(-1, 3)
    Y = np.asarray(Y, dtype=np.float64).reshape(-1, 3)
    if len(X) == 0 or len(Y) == 0:
        raise InputError("chamfer distance needs two non-empty point clouds")
    d_xy, _ = cKDTree(Y).query(X, k=1)
    d_yx, _ = cKDTree(X).query(Y, k=1)
    return float(np.mean(d_xy**2) + np.mean(d_yx**2))


def chamfer_distance(gt_mesh: TriMesh, est_mesh: TriMesh, n: int = 1_000_000, seed: int = 0) -> float:
    """Surface Chamfer Distance on n area-uniform samples per mesh, in mm^2.

    Both meshes are sampled with the same seed, so identical meshes yield
    exactly zero.
    """
    if gt_mesh.is_empty or est_mesh.is_empty:
        raise InputError("chamfer distance needs two non-empty meshes")
    X = sample_surface(gt_mesh, n, seed)
    Y = sample_surface(est_mesh, n, seed)
    return chamfer_distance_points(X, Y) * M_TO_MM**2


def rms_from_cd(cd_mm2: float) -> float:
    """RMS point-to-surface distance (mm) implied by a two-sided CD."""
    return float(np.sqrt(max(cd_mm2, 0.0) / 2.0))


def aggregate(per_sequence: list[dict]) -> dict:
    """Mean metrics over a sequence group (e.g. the illumination sweep)."""
    if not per_sequence:
        raise InputError("nothing to aggregate")
    keys = [k for k, v in per_sequence[0].items() if isinstance(v, (int, float))]
    out = {k: float(np.mean([s[k] for s in per_sequence])) for k in keys}
    out["per_sequence"] = per_sequence
    out["n_sequences"] = len(per_sequence)
    return out
