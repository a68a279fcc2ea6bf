"""Iso-surface extraction and surface point sampling.

Marching cubes runs on the occupancy volume (padded with an empty shell so
surfaces close at the grid boundary); on binary grids the level-0.5
crossing puts vertices at cell-edge midpoints, which is deliberate: the
occupancy is not a signed distance, and midpoints avoid fake smoothing.
Faces are oriented so closed solids have positive signed volume.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage
from skimage import measure

from .errors import InputError
from .geometry import TriMesh, VoxelGrid

__all__ = ["marching_cubes", "largest_component", "sample_surface"]


def largest_component(grid: VoxelGrid, connectivity: int = 3, seed_point=None) -> VoxelGrid:
    """Keep one 26-connected occupied component (debris filter).

    With a seed point (world coordinates), the component containing the
    occupied voxel nearest the seed survives; otherwise the largest by
    voxel count does.  Carves leave unsweepable speckle far from the
    subject, so the known capture-volume center makes a robust seed.
    """
    vol = grid.as_volume() > 0.5
    structure = ndimage.generate_binary_structure(3, connectivity)
    labels, n = ndimage.label(vol, structure=structure)
    if n <= 1:
        return grid
    if seed_point is not None and vol.any():
        occ_idx = np.argwhere(vol)  # (n, 3) in (z, y, x)
        world = grid.origin[None, :] + (occ_idx[:, ::-1] + 0.5) * grid.pitch
        nearest = occ_idx[np.argmin(((world - np.asarray(seed_point)) ** 2).sum(axis=1))]
        keep = labels[tuple(nearest)]
    else:
        counts = np.bincount(labels.ravel())
        counts[0] = 0
        keep = counts.argmax()
    return grid.like((labels == keep).astype(np.float32).ravel())


def marching_cubes(
    grid: VoxelGrid, iso: float = 0.5, keep_largest: bool = True, seed_point=None
) -> TriMesh:
    """Triangle mesh of the iso-surface, vertices in world coordinates.

    An empty iso-surface yields an empty mesh, not an error.
    """
    nx, ny, nz = grid.dims
    if min(grid.dims) < 2:
        raise InputError("grid must have at least 2 cells per axis")
    if keep_largest:
        grid = largest_component(grid, seed_point=seed_point)
    vol = grid.as_volume()  # (nz, ny, nx)
    if vol.max() <= iso or vol.min() > iso:
        return TriMesh.empty()
    padded = np.pad(vol.astype(np.float32), 1, mode="constant", constant_values=0.0)
    verts, faces, _, _ = measure.marching_cubes(padded, level=iso)
    # padded array coords (z, y, x) -> cell-center world coordinates
    verts = verts[:, ::-1] - 1.0
    verts = grid.origin[None, :] + (verts + 0.5) * grid.pitch
    mesh = TriMesh(verts, faces.astype(np.int64))
    if mesh.signed_volume() < 0:
        mesh = TriMesh(mesh.vertices, mesh.faces[:, ::-1])
    return mesh


def sample_surface(mesh: TriMesh, n: int, seed: int = 0) -> np.ndarray:
    """n area-uniform surface points: faces chosen proportionally to area,
    positions by uniform barycentric coordinates.  Deterministic per seed."""
    if mesh.is_empty:
        raise InputError("cannot sample an empty mesh")
    if n <= 0:
        raise InputError("sample count must be positive")
    points, _, _ = sample_surface_detail(mesh, n, np.random.default_rng(seed))
    return points


def sample_surface_detail(
    mesh: TriMesh, n: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """As sample_surface, also returning (face indices, barycentric uv).

    The fitter reuses the (face, uv) draw across iterations so the loss
    stays smooth between refreshes.
    """
    areas = mesh.face_areas()
    total = areas.sum()
    if total <= 0:
        raise InputError("mesh has zero surface area")
    face_idx = rng.choice(len(areas), size=n, p=areas / total)
    uv = rng.random((n, 2))
    flip = uv.sum(axis=1) > 1.0
    uv[flip] = 1.0 - uv[flip]
    points = barycentric_points(mesh, face_idx, uv)
    return points, face_idx, uv


def barycentric_points(mesh: TriMesh, face_idx: np.ndarray, uv: np.ndarray) -> np.ndarray:
    tri = mesh.vertices[mesh.faces[face_idx]]
    u = uv[:, 0:1]
    v = uv[:, 1:2]
    return tri[:, 0] + u * (tri[:, 1] - tri[:, 0]) + v * (tri[:, 2] - tri[:, 0])
