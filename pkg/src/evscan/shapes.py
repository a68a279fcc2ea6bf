"""Parametric mesh builders used for subjects and test fixtures."""

from __future__ import annotations

import numpy as np

from .errors import InputError
from .geometry import TriMesh

__all__ = ["make_icosphere", "make_uv_sphere", "make_capsule", "make_spiked_sphere", "make_box"]


def make_icosphere(radius: float = 1.0, center=(0.0, 0.0, 0.0), subdivisions: int = 3) -> TriMesh:
    """Geodesic sphere by repeated subdivision of an icosahedron."""
    if radius <= 0:
        raise InputError("radius must be positive")
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    for _ in range(subdivisions):
        verts, faces = _subdivide_unit(verts, faces)
    verts = verts * radius + np.asarray(center, dtype=np.float64)
    return TriMesh(verts, faces)


def _subdivide_unit(verts: np.ndarray, faces: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    cache: dict[tuple[int, int], int] = {}
    verts = list(verts)

    def midpoint(a: int, b: int) -> int:
        key = (a, b) if a < b else (b, a)
        if key in cache:
            return cache[key]
        m = verts[a] + verts[b]
        m = m / np.linalg.norm(m)
        verts.append(m)
        cache[key] = len(verts) - 1
        return cache[key]

    new_faces = []
    for a, b, c in faces:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
    return np.array(verts), np.array(new_faces, dtype=np.int64)


def make_uv_sphere(radius: float, center=(0.0, 0.0, 0.0), n_lat: int = 12, n_lon: int = 16) -> TriMesh:
    """Latitude/longitude sphere; rings are horizontal (constant y)."""
    center = np.asarray(center, dtype=np.float64)
    verts = [center + np.array([0.0, radius, 0.0])]
    for i in range(1, n_lat):
        theta = np.pi * i / n_lat
        y = radius * np.cos(theta)
        r = radius * np.sin(theta)
        for j in range(n_lon):
            phi = 2 * np.pi * j / n_lon
            verts.append(center + np.array([r * np.cos(phi), y, r * np.sin(phi)]))
    verts.append(center + np.array([0.0, -radius, 0.0]))
    verts = np.array(verts)
    faces = []
    top, bottom = 0, len(verts) - 1
    ring = lambda i, j: 1 + (i - 1) * n_lon + (j % n_lon)
    for j in range(n_lon):
        faces.append([top, ring(1, j + 1), ring(1, j)])
        faces.append([bottom, ring(n_lat - 1, j), ring(n_lat - 1, j + 1)])
    for i in range(1, n_lat - 1):
        for j in range(n_lon):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j), ring(i + 1, j + 1)
            faces += [[a, b, d], [a, d, c]]
    return TriMesh(verts, np.array(faces, dtype=np.int64))


def make_capsule(
    p0,
    p1,
    radius: float,
    n_seg: int = 16,
    rings_per_meter: float | None = 60.0,
    cap_rings: int = 4,
    stations=None,
) -> TriMesh:
    """Closed capsule from p0 to p1: cylinder body plus hemispherical caps.

    Rings are perpendicular to the axis, so ring centroids lie exactly on
    the p0-p1 segment (used for exact joint regression in the toy body).
    `stations` optionally pins the axial body-ring fractions (must include
    0 and 1).
    """
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    axis = p1 - p0
    length = np.linalg.norm(axis)
    if length < 1e-12:
        raise InputError("capsule endpoints coincide")
    if radius <= 0:
        raise InputError("capsule radius must be positive")
    z = axis / length
    a = np.array([0.0, 1.0, 0.0])
    if abs(np.dot(a, z)) > 0.9:
        a = np.array([1.0, 0.0, 0.0])
    e1 = np.cross(a, z)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(z, e1)

    if stations is not None:
        ring_s = np.asarray(sorted(stations), dtype=np.float64)
        if ring_s[0] != 0.0 or ring_s[-1] != 1.0:
            raise InputError("capsule stations must span [0, 1]")
    else:
        n_body = max(2, int(np.ceil(length * rings_per_meter)) + 1)
        ring_s = np.linspace(0.0, 1.0, n_body)  # axial stations of the body rings

    verts = [p0 - radius * z]  # bottom pole
    rows: list[list[int]] = []

    def add_ring(center, r):
        base = len(verts)
        for j in range(n_seg):
            ang = 2 * np.pi * j / n_seg
            verts.append(center + r * (np.cos(ang) * e1 + np.sin(ang) * e2))
        rows.append(list(range(base, base + n_seg)))

    for i in range(1, cap_rings + 1):  # lower hemisphere below p0
        theta = (np.pi / 2) * i / (cap_rings + 1)
        add_ring(p0 - radius * np.cos(theta) * z, radius * np.sin(theta))
    for s in ring_s:
        add_ring(p0 + s * length * z, radius)
    for i in range(cap_rings, 0, -1):  # upper hemisphere above p1
        theta = (np.pi / 2) * i / (cap_rings + 1)
        add_ring(p1 + radius * np.cos(theta) * z, radius * np.sin(theta))
    verts.append(p1 + radius * z)  # top pole

    faces = []
    for j in range(n_seg):
        faces.append([0, rows[0][j], rows[0][(j + 1) % n_seg]])
    for r0, r1 in zip(rows[:-1], rows[1:]):
        for j in range(n_seg):
            a0, a1 = r0[j], r0[(j + 1) % n_seg]
            b0, b1 = r1[j], r1[(j + 1) % n_seg]
            faces += [[a0, b1, a1], [a0, b0, b1]]
    top = len(verts) - 1
    for j in range(n_seg):
        faces.append([top, rows[-1][(j + 1) % n_seg], rows[-1][j]])
    mesh = TriMesh(np.array(verts), np.array(faces, dtype=np.int64))
    if mesh.signed_volume() < 0:
        mesh = TriMesh(mesh.vertices, mesh.faces[:, ::-1])
    return mesh


def make_spiked_sphere(
    radius: float = 0.22,
    spike_radius: float = 0.02,
    spike_length: float = 0.25,
    center=(0.0, 0.0, 0.0),
    subdivisions: int = 3,
) -> TriMesh:
    """Sphere with six thin capsule protrusions along +-x, +-y, +-z.

    The protrusions are the high-frequency detail that distance-attenuated
    carving is meant to preserve.
    """
    center = np.asarray(center, dtype=np.float64)
    parts = [make_icosphere(radius, center, subdivisions)]
    for axis in np.vstack([np.eye(3), -np.eye(3)]):
        p0 = center + 0.5 * radius * axis
        p1 = center + (radius + spike_length) * axis
        parts.append(make_capsule(p0, p1, spike_radius, n_seg=10, rings_per_meter=40.0))
    return merge_meshes(parts)


def make_box(center, half_extents) -> TriMesh:
    center = np.asarray(center, dtype=np.float64)
    h = np.asarray(half_extents, dtype=np.float64)
    corners = np.array(
        [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=np.float64
    )
    verts = center + corners * h
    faces = np.array(
        [
            [0, 1, 3], [0, 3, 2],  # -x
            [4, 6, 7], [4, 7, 5],  # +x
            [0, 4, 5], [0, 5, 1],  # -y
            [2, 3, 7], [2, 7, 6],  # +y
            [0, 2, 6], [0, 6, 4],  # -z
            [1, 5, 7], [1, 7, 3],  # +z
        ],
        dtype=np.int64,
    )
    mesh = TriMesh(verts, faces)
    if mesh.signed_volume() < 0:
        mesh = TriMesh(verts, faces[:, ::-1])
    return mesh


def merge_meshes(meshes: list[TriMesh]) -> TriMesh:
    verts = []
    faces = []
    offset = 0
    for m in meshes:
        verts.append(m.vertices)
        faces.append(m.faces + offset)
        offset += len(m.vertices)
    return TriMesh(np.vstack(verts), np.vstack(faces))
