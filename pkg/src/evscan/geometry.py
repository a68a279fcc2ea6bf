"""Shared geometric vocabulary: events, pinhole cameras, poses, rays, meshes,
voxel grids, and camera trajectories.

Conventions (used consistently by the simulator and the carver):
  camera frame   x right, y down, z forward (pinhole looking along +z)
  pose           X_C = R (X_W + T);  the camera center in world coords is -T
  back-projection world ray  X_W(s) = s * R^T K^-1 [x, y, 1]^T - T,  s >= 0
  pixels         integer event coordinates back-project through the exact
                 lattice point (x, y), not the half-pixel center
All lengths are meters; metric reports convert to millimeters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from .errors import DomainError, BehindCameraError, InputError

__all__ = [
    "Event",
    "EventStream",
    "CameraIntrinsics",
    "CameraPose",
    "Ray",
    "TriMesh",
    "VoxelGrid",
    "Trajectory",
    "pixel_to_ray",
    "project_point",
    "world_to_voxel",
    "look_at_rotation",
    "make_orbit",
]


@dataclass(frozen=True)
class Event:
    """One asynchronous brightness-change record."""

    x: int
    y: int
    t: float
    p: int

    def __post_init__(self):
        if self.p not in (-1, 1):
            raise InputError(f"polarity must be +1 or -1, got {self.p}")
        if self.x < 0 or self.y < 0 or self.t < 0:
            raise InputError("event coordinates and time must be non-negative")


@dataclass
class EventStream:
    """Column-wise event storage, sorted by non-decreasing time.

    Arrays share a common length: t float64 seconds, x/y uint16 pixels,
    p int8 polarity in {+1, -1}.  width/height carry the sensor size.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        self.t = np.ascontiguousarray(self.t, dtype=np.float64)
        self.x = np.ascontiguousarray(self.x, dtype=np.uint16)
        self.y = np.ascontiguousarray(self.y, dtype=np.uint16)
        self.p = np.ascontiguousarray(self.p, dtype=np.int8)
        n = len(self.t)
        if not (len(self.x) == len(self.y) == len(self.p) == n):
            raise InputError("event component arrays must share one length")
        if n:
            if np.any(np.diff(self.t) < 0):
                raise InputError("event stream must be sorted by time")
            if self.x.max(initial=0) >= self.width or self.y.max(initial=0) >= self.height:
                raise InputError("event coordinates exceed sensor bounds")
            if not np.all(np.abs(self.p) == 1):
                raise InputError("polarities must be +1 or -1")

    def __len__(self) -> int:
        return len(self.t)

    def select(self, mask_or_index: np.ndarray) -> "EventStream":
        """Order-preserving subsequence; events are never modified."""
        return EventStream(
            self.t[mask_or_index],
            self.x[mask_or_index],
            self.y[mask_or_index],
            self.p[mask_or_index],
            self.width,
            self.height,
        )

    def __getitem__(self, i: int) -> Event:
        return Event(int(self.x[i]), int(self.y[i]), float(self.t[i]), int(self.p[i]))


@dataclass(frozen=True)
class CameraIntrinsics:
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise InputError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise InputError("principal point must lie inside the sensor")

    @property
    def K(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def scaled(self, factor: float) -> "CameraIntrinsics":
        """Same field of view at factor-scaled resolution."""
        return CameraIntrinsics(
            int(round(self.width * factor)),
            int(round(self.height * factor)),
            self.fx * factor,
            self.fy * factor,
            self.cx * factor,
            self.cy * factor,
        )


@dataclass(frozen=True)
class CameraPose:
    """Pose in the X_C = R (X_W + T) convention; camera center is -T."""

    R: np.ndarray
    T: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        R = np.asarray(self.R, dtype=np.float64)
        T = np.asarray(self.T, dtype=np.float64).reshape(3)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "T", T)
        if R.shape != (3, 3):
            raise InputError("R must be 3x3")
        if np.abs(R @ R.T - np.eye(3)).max() > 1e-9 or abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise InputError("R must be orthonormal with det +1")

    @property
    def center(self) -> np.ndarray:
        return -self.T


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64).reshape(3)
        d = np.asarray(self.direction, dtype=np.float64).reshape(3)
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise InputError("ray direction must be unit length")


@dataclass
class TriMesh:
    """Triangle mesh; construction drops zero-area faces and checks indices."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if len(self.faces):
            if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
                raise InputError("face indices out of range")
            areas = self.face_areas()
            keep = areas > 0.0
            if not keep.all():
                self.faces = self.faces[keep]

    def __len__(self) -> int:
        return len(self.faces)

    @property
    def is_empty(self) -> bool:
        return len(self.faces) == 0

    def triangles(self) -> np.ndarray:
        """(F, 3, 3) corner coordinates."""
        return self.vertices[self.faces]

    def face_areas(self) -> np.ndarray:
        tri = self.vertices[self.faces]
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)

    def area(self) -> float:
        return float(self.face_areas().sum())

    def signed_volume(self) -> float:
        """Positive for consistently outward-oriented closed surfaces."""
        tri = self.vertices[self.faces]
        return float(np.einsum("ij,ij->i", tri[:, 0], np.cross(tri[:, 1], tri[:, 2])).sum() / 6.0)

    def transformed(self, R: np.ndarray | None = None, t: np.ndarray | None = None) -> "TriMesh":
        v = self.vertices
        if R is not None:
            v = v @ np.asarray(R).T
        if t is not None:
            v = v + np.asarray(t).reshape(1, 3)
        return TriMesh(v, self.faces.copy())

    @staticmethod
    def empty() -> "TriMesh":
        return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))


@dataclass
class VoxelGrid:
    """Axis-aligned cubic lattice.  Cells are stored x-fastest:
    linear index = ix + nx * (iy + ny * iz).  Cell (ix,iy,iz) covers the
    half-open box origin + [i, i+1) * pitch per axis.
    """

    origin: np.ndarray
    pitch: float
    dims: tuple[int, int, int]
    cells: np.ndarray = field(default=None)

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        self.dims = tuple(int(d) for d in self.dims)
        if self.pitch <= 0:
            raise InputError("pitch must be positive")
        if any(d <= 0 for d in self.dims):
            raise InputError("dims must be positive")
        n = self.dims[0] * self.dims[1] * self.dims[2]
        if self.cells is None:
            self.cells = np.zeros(n, dtype=np.float64)
        else:
            self.cells = np.ascontiguousarray(self.cells).reshape(n)

    @property
    def n_cells(self) -> int:
        return self.dims[0] * self.dims[1] * self.dims[2]

    def linear_index(self, ix, iy, iz):
        nx, ny, _ = self.dims
        return ix + nx * (iy + ny * iz)

    def unravel(self, idx):
        nx, ny, _ = self.dims
        ix = idx % nx
        iy = (idx // nx) % ny
        iz = idx // (nx * ny)
        return ix, iy, iz

    def as_volume(self) -> np.ndarray:
        """(nz, ny, nx) view consistent with the linear layout."""
        nx, ny, nz = self.dims
        return self.cells.reshape(nz, ny, nx)

    def voxel_center(self, ix, iy, iz) -> np.ndarray:
        return self.origin + (np.array([ix, iy, iz], dtype=np.float64) + 0.5) * self.pitch

    def centers(self) -> np.ndarray:
        """(n_cells, 3) voxel centers in linear-index order."""
        nx, ny, nz = self.dims
        ix = np.arange(nx)
        iy = np.arange(ny)
        iz = np.arange(nz)
        gx, gy, gz = np.meshgrid(ix, iy, iz, indexing="ij")
        idx = np.stack(
            [gx.transpose(2, 1, 0).ravel(), gy.transpose(2, 1, 0).ravel(), gz.transpose(2, 1, 0).ravel()],
            axis=1,
        )
        return self.origin + (idx + 0.5) * self.pitch

    def max_corner(self) -> np.ndarray:
        return self.origin + np.array(self.dims, dtype=np.float64) * self.pitch

    def like(self, cells: np.ndarray) -> "VoxelGrid":
        return VoxelGrid(self.origin.copy(), self.pitch, self.dims, cells)

    @staticmethod
    def cube(center, edge: float, n: int) -> "VoxelGrid":
        center = np.asarray(center, dtype=np.float64)
        pitch = edge / n
        origin = center - edge / 2.0
        return VoxelGrid(origin, pitch, (n, n, n))


def pixel_to_ray(cam: CameraIntrinsics, pose: CameraPose, px) -> Ray:
    """Back-project a pixel to its world-space ray (origin at the camera center)."""
    px = np.asarray(px, dtype=np.float64)
    x, y = float(px[0]), float(px[1])
    if not (0 <= x < cam.width and 0 <= y < cam.height):
        raise DomainError(f"pixel ({x}, {y}) outside sensor bounds")
    d_cam = np.array([(x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0])
    d_world = pose.R.T @ d_cam
    d_world /= np.linalg.norm(d_world)
    return Ray(-pose.T, d_world)


def pixel_rays(cam: CameraIntrinsics, pose: CameraPose, px: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized pixel_to_ray: (N,2) pixels -> (origin (3,), unit directions (N,3))."""
    px = np.asarray(px, dtype=np.float64).reshape(-1, 2)
    d_cam = np.empty((len(px), 3))
    d_cam[:, 0] = (px[:, 0] - cam.cx) / cam.fx
    d_cam[:, 1] = (px[:, 1] - cam.cy) / cam.fy
    d_cam[:, 2] = 1.0
    d_world = d_cam @ pose.R
    d_world /= np.linalg.norm(d_world, axis=1, keepdims=True)
    return -pose.T, d_world


def project_point(cam: CameraIntrinsics, pose: CameraPose, X_W) -> tuple[np.ndarray, float]:
    """Pinhole projection, the inverse of pixel_to_ray up to the ray scale.

    Returns ((x, y), depth) with depth the camera-space z of the point.
    """
    X_W = np.asarray(X_W, dtype=np.float64).reshape(3)
    X_C = pose.R @ (X_W + pose.T)
    z = X_C[2]
    if z <= 0:
        raise BehindCameraError(f"point has camera-space depth {z:.6g}")
    px = np.array([cam.fx * X_C[0] / z + cam.cx, cam.fy * X_C[1] / z + cam.cy])
    return px, float(z)


def world_to_voxel(grid: VoxelGrid, X_W) -> tuple[int, int, int] | None:
    """Voxel index containing a world point, or None when outside the grid.

    Cells are half-open, so the max corner itself maps outside.
    """
    X_W = np.asarray(X_W, dtype=np.float64).reshape(3)
    idx = np.floor((X_W - grid.origin) / grid.pitch).astype(np.int64)
    if np.any(idx < 0) or np.any(idx >= np.array(grid.dims)):
        return None
    return int(idx[0]), int(idx[1]), int(idx[2])


def look_at_rotation(center: np.ndarray, target: np.ndarray, up=(0.0, 1.0, 0.0)) -> np.ndarray:
    """World-from-camera rotation for a camera at `center` looking at `target`.

    Columns are the camera axes in world coordinates (x right, y down,
    z forward); `up` fixes the roll.
    """
    center = np.asarray(center, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    up = np.asarray(up, dtype=np.float64)
    z = target - center
    nz = np.linalg.norm(z)
    if nz == 0:
        raise InputError("look-at target coincides with the camera center")
    z = z / nz
    y = -up + np.dot(up, z) * z  # camera y points world-down, orthogonal to z
    ny = np.linalg.norm(y)
    if ny < 1e-12:
        raise InputError("up direction parallel to the viewing direction")
    y = y / ny
    x = np.cross(y, z)
    return np.stack([x, y, z], axis=1)


@dataclass
class Trajectory:
    """Camera path as timestamped keyframes (center + world-from-camera quaternion).

    Pose queries interpolate linearly in position and spherically in
    orientation between the bracketing keyframes.
    """

    times: np.ndarray
    centers: np.ndarray
    quats: np.ndarray  # (N, 4) scalar-last xyzw, world-from-camera

    def __post_init__(self):
        self.times = np.ascontiguousarray(self.times, dtype=np.float64)
        self.centers = np.ascontiguousarray(self.centers, dtype=np.float64).reshape(-1, 3)
        self.quats = np.ascontiguousarray(self.quats, dtype=np.float64).reshape(-1, 4)
        if not (len(self.times) == len(self.centers) == len(self.quats)):
            raise InputError("trajectory arrays must share one length")
        if len(self.times) < 2:
            raise InputError("trajectory needs at least two keyframes")
        if np.any(np.diff(self.times) <= 0):
            raise InputError("trajectory times must be strictly increasing")
        norms = np.linalg.norm(self.quats, axis=1)
        if np.abs(norms - 1.0).max() > 1e-6:
            raise InputError("trajectory quaternions must be unit")
        self.quats = self.quats / norms[:, None]
        self._rotations = Rotation.from_quat(self.quats)
        self._slerp = Slerp(self.times, self._rotations)

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    def centers_at(self, t: np.ndarray) -> np.ndarray:
        t = np.clip(np.asarray(t, dtype=np.float64), self.t_start, self.t_end)
        cx = np.interp(t, self.times, self.centers[:, 0])
        cy = np.interp(t, self.times, self.centers[:, 1])
        cz = np.interp(t, self.times, self.centers[:, 2])
        return np.stack([cx, cy, cz], axis=-1)

    def rotations_at(self, t: np.ndarray) -> Rotation:
        t = np.clip(np.asarray(t, dtype=np.float64), self.t_start, self.t_end)
        return self._slerp(t)

    def pose_at(self, t: float) -> CameraPose:
        c = self.centers_at(np.array([t]))[0]
        R_wc = self.rotations_at(np.array([t])).as_matrix()[0]
        return CameraPose(R=R_wc.T, T=-c, t=float(t))

    def keyframe_rate(self) -> float:
        return (len(self.times) - 1) / self.duration

    def time_scaled(self, speed_mult: float) -> "Trajectory":
        """Same path traversed speed_mult times faster."""
        if speed_mult <= 0:
            raise InputError("speed multiplier must be positive")
        t0 = self.times[0]
        return Trajectory(t0 + (self.times - t0) / speed_mult, self.centers.copy(), self.quats.copy())


def make_orbit(
    center=(0.0, 0.0, 0.0),
    radius: float = 1.0,
    loops: float = 2.0,
    duration: float = 17.27,
    n_keyframes: int | None = None,
    elev_amplitude: float = 0.25,
    elev_cycles: int = 3,
    t_start: float = 0.0,
    up=(0.0, 1.0, 0.0),
    jitter: float = 0.0,
    jitter_seed: int = 0,
) -> Trajectory:
    """Circular orbit around (and looking at) `center`, optionally with a
    vertical sinusoidal oscillation of the camera height and a smooth
    periodic positional wobble (handheld-style jitter).

    The oscillation matters: grazing rays from a single-height circle can
    never cross the column directly above or below the subject, so some
    height diversity is required for the carver to clear those regions.
    The jitter matters for near-symmetric subjects: a perfectly smooth
    orbit freezes parts of the silhouette to sub-pixel shimmer, starving
    those edges of events.  Both perturbations use whole numbers of cycles
    so the path stays closed.
    """
    if loops <= 0:
        raise InputError("orbit must have a positive number of loops")
    if radius <= 0 or duration <= 0:
        raise InputError("radius and duration must be positive")
    if n_keyframes is None:
        n_keyframes = max(64, int(np.ceil(180 * loops)))  # ~2 degrees per keyframe
    center = np.asarray(center, dtype=np.float64)
    up = np.asarray(up, dtype=np.float64)
    u = np.linspace(0.0, 1.0, n_keyframes)
    phi = 2.0 * np.pi * loops * u
    elev = elev_amplitude * np.sin(2.0 * np.pi * elev_cycles * u)
    # orthonormal frame around `up`
    a = np.array([1.0, 0.0, 0.0])
    if abs(np.dot(a, up)) > 0.9:
        a = np.array([0.0, 0.0, 1.0])
    e1 = np.cross(up, a)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(up, e1)
    centers = (
        center[None, :]
        + radius * (np.cos(phi)[:, None] * e1[None, :] + np.sin(phi)[:, None] * e2[None, :])
        + elev[:, None] * up[None, :]
    )
    if jitter > 0:
        rng = np.random.default_rng(jitter_seed)
        wobble = np.zeros((n_keyframes, 3))
        freqs = rng.integers(7, 24, size=(3, 4))  # whole cycles: closed path
        phases = rng.uniform(0, 2 * np.pi, size=(3, 4))
        for axis in range(3):
            for f, ph in zip(freqs[axis], phases[axis]):
                wobble[:, axis] += np.sin(2 * np.pi * f * u + ph)
        wobble *= jitter / 2.0  # 4 unit sines: keep |wobble| ~ jitter
        centers = centers + wobble
    quats = np.empty((n_keyframes, 4))
    for i in range(n_keyframes):
        R_wc = look_at_rotation(centers[i], center, up)
        quats[i] = Rotation.from_matrix(R_wc).as_quat()
    # re-sign for slerp continuity
    for i in range(1, n_keyframes):
        if np.dot(quats[i], quats[i - 1]) < 0:
            quats[i] = -quats[i]
    return Trajectory(t_start + duration * u, centers, quats)
