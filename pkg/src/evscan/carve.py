"""Attenuated-ray voxel carving.

Every contour event back-projects to a world ray from the camera center at
its timestamp.  Rays are marched through the grid (Amanatides-Woo stepping)
and each visited voxel accumulates an influence weight that may decay with
the distance d from the camera to the voxel entry point:

    none     w = r0
    linear   w = max(r0 - d, 0)
    inverse  w = r0 / (d + 1)

Contour rays graze the subject, so over a full orbit exterior voxels soak
up weight while interior voxels stay near zero; occupancy keeps the
low-weight voxels (inside an optional bounding region).  The distance decay
counteracts pixel-quantization error, which grows linearly with distance
and otherwise lets far-away rays eat into thin structures.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from .errors import DomainError, InputError
from .geometry import CameraIntrinsics, EventStream, Ray, Trajectory, VoxelGrid

__all__ = [
    "AttenuationMode",
    "CarveConfig",
    "attenuate",
    "traverse_ray",
    "accumulate",
    "prune",
    "default_prune_threshold",
    "visibility_mask",
    "event_hull_mask",
    "silhouette_snapshots",
    "occupied_fraction",
]

ATTEN_NONE, ATTEN_LINEAR, ATTEN_INVERSE = 0, 1, 2
_ATTEN_CODES = {"none": ATTEN_NONE, "linear": ATTEN_LINEAR, "inverse": ATTEN_INVERSE}


@dataclass(frozen=True)
class AttenuationMode:
    variant: str = "inverse"
    r0: float = 1.0

    def __post_init__(self):
        if self.variant not in _ATTEN_CODES:
            raise InputError(f"unknown attenuation variant {self.variant!r}")
        if self.r0 <= 0:
            raise InputError("base influence r0 must be positive")

    @property
    def code(self) -> int:
        return _ATTEN_CODES[self.variant]


@dataclass
class CarveConfig:
    grid_origin: np.ndarray = field(default_factory=lambda: np.array([-1.0, -1.0, -1.0]))
    grid_pitch: float = 2.0 / 256
    grid_dims: tuple[int, int, int] = (256, 256, 256)
    attenuation: AttenuationMode = field(default_factory=AttenuationMode)
    prune_threshold: float | None = None  # None = relative default
    prune_rel_coeff: float = 0.05  # tau = coeff * median positive weight
    pose_tolerance: float = 1e-3  # seconds
    region_min: np.ndarray | None = None  # optional AABB restriction
    region_max: np.ndarray | None = None
    min_visible_frac: float = 0.5  # visibility-mask vote threshold
    use_event_hull: bool = True  # bound the region by the contour-pixel hull
    insufficient_rays_bound: float = 0.3  # occupied fraction that trips the warning

    def __post_init__(self):
        self.grid_origin = np.asarray(self.grid_origin, dtype=np.float64).reshape(3)
        if self.prune_threshold is not None and self.prune_threshold <= 0:
            raise InputError("prune threshold must be positive")
        if self.grid_pitch <= 0:
            raise InputError("grid pitch must be positive")

    def make_grid(self) -> VoxelGrid:
        return VoxelGrid(self.grid_origin.copy(), self.grid_pitch, self.grid_dims)


def attenuate(mode: AttenuationMode, d) -> np.ndarray | float:
    """Ray influence at camera distance d (meters)."""
    d_arr = np.asarray(d, dtype=np.float64)
    if np.any(d_arr < 0):
        raise DomainError("distance must be non-negative")
    if mode.variant == "none":
        out = np.full_like(d_arr, mode.r0)
    elif mode.variant == "linear":
        out = np.maximum(mode.r0 - d_arr, 0.0)
    else:
        out = mode.r0 / (d_arr + 1.0)
    return float(out) if np.isscalar(d) else out


@njit(cache=True, inline="always")
def _atten_value(code: int, r0: float, d: float) -> float:
    if code == 0:
        return r0
    if code == 1:
        w = r0 - d
        return w if w > 0.0 else 0.0
    return r0 / (d + 1.0)


@njit(cache=True)
def _traverse_one(ox, oy, oz, dx, dy, dz, gx, gy, gz, pitch, nx, ny, nz, t_max,
                  out_idx, out_dist):
    """Amanatides-Woo march; returns the number of voxels visited.

    Entry distances are measured from the ray origin; the first voxel's
    entry is the grid-boundary hit when the origin lies outside.
    """
    # clip to the grid AABB
    t0 = 0.0
    t1 = t_max
    o = (ox, oy, oz)
    d = (dx, dy, dz)
    gmin = (gx, gy, gz)
    for k in range(3):
        lo = gmin[k]
        hi = gmin[k] + pitch * (nx if k == 0 else (ny if k == 1 else nz))
        if d[k] == 0.0:
            if o[k] < lo or o[k] >= hi:
                return 0
        else:
            ta = (lo - o[k]) / d[k]
            tb = (hi - o[k]) / d[k]
            if ta > tb:
                ta, tb = tb, ta
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
    if t0 > t1:
        return 0

    eps = 1e-12
    px = ox + t0 * dx
    py = oy + t0 * dy
    pz = oz + t0 * dz
    ix = int(np.floor((px - gx) / pitch))
    iy = int(np.floor((py - gy) / pitch))
    iz = int(np.floor((pz - gz) / pitch))
    if ix < 0:
        ix = 0
    if iy < 0:
        iy = 0
    if iz < 0:
        iz = 0
    if ix > nx - 1:
        ix = nx - 1
    if iy > ny - 1:
        iy = ny - 1
    if iz > nz - 1:
        iz = nz - 1

    step_x = 1 if dx > 0 else (-1 if dx < 0 else 0)
    step_y = 1 if dy > 0 else (-1 if dy < 0 else 0)
    step_z = 1 if dz > 0 else (-1 if dz < 0 else 0)

    big = 1e300
    if dx != 0.0:
        nxt = gx + (ix + (1 if step_x > 0 else 0)) * pitch
        tmax_x = (nxt - ox) / dx
        tdel_x = pitch / abs(dx)
    else:
        tmax_x = big
        tdel_x = big
    if dy != 0.0:
        nxt = gy + (iy + (1 if step_y > 0 else 0)) * pitch
        tmax_y = (nxt - oy) / dy
        tdel_y = pitch / abs(dy)
    else:
        tmax_y = big
        tdel_y = big
    if dz != 0.0:
        nxt = gz + (iz + (1 if step_z > 0 else 0)) * pitch
        tmax_z = (nxt - oz) / dz
        tdel_z = pitch / abs(dz)
    else:
        tmax_z = big
        tdel_z = big

    count = 0
    t_entry = t0
    while True:
        if t_entry > t1 + eps:
            break
        out_idx[count] = ix + nx * (iy + ny * iz)
        out_dist[count] = t_entry
        count += 1
        # advance across the nearest boundary
        if tmax_x <= tmax_y and tmax_x <= tmax_z:
            t_entry = tmax_x
            tmax_x += tdel_x
            ix += step_x
            if ix < 0 or ix >= nx:
                break
        elif tmax_y <= tmax_z:
            t_entry = tmax_y
            tmax_y += tdel_y
            iy += step_y
            if iy < 0 or iy >= ny:
                break
        else:
            t_entry = tmax_z
            tmax_z += tdel_z
            iz += step_z
            if iz < 0 or iz >= nz:
                break
        if t_entry > t1 + eps:
            break
    return count


@njit(cache=True)
def _accumulate_kernel(cells, origins, dirs, gx, gy, gz, pitch, nx, ny, nz,
                       atten_code, r0, t_max):
    max_steps = nx + ny + nz + 3
    out_idx = np.empty(max_steps, dtype=np.int64)
    out_dist = np.empty(max_steps, dtype=np.float64)
    for i in range(len(origins)):
        n = _traverse_one(
            origins[i, 0], origins[i, 1], origins[i, 2],
            dirs[i, 0], dirs[i, 1], dirs[i, 2],
            gx, gy, gz, pitch, nx, ny, nz, t_max, out_idx, out_dist,
        )
        for j in range(n):
            cells[out_idx[j]] += _atten_value(atten_code, r0, out_dist[j])


def traverse_ray(grid: VoxelGrid, ray: Ray, t_max: float) -> tuple[np.ndarray, np.ndarray]:
    """Voxels whose interior the segment [0, t_max] crosses, in increasing
    distance order, with per-voxel entry distances."""
    nx, ny, nz = grid.dims
    max_steps = nx + ny + nz + 3
    out_idx = np.empty(max_steps, dtype=np.int64)
    out_dist = np.empty(max_steps, dtype=np.float64)
    n = _traverse_one(
        ray.origin[0], ray.origin[1], ray.origin[2],
        ray.direction[0], ray.direction[1], ray.direction[2],
        grid.origin[0], grid.origin[1], grid.origin[2],
        grid.pitch, nx, ny, nz, float(t_max), out_idx, out_dist,
    )
    return out_idx[:n].copy(), out_dist[:n].copy()


def accumulate(
    events: EventStream,
    trajectory: Trajectory,
    cam: CameraIntrinsics,
    cfg: CarveConfig,
) -> tuple[VoxelGrid, int]:
    """Carve the contour stream into a weight grid.

    Returns (weights, n_skipped).  Events outside the trajectory time range
    (beyond the pose tolerance) are skipped; more than 1% skipped is an
    error.
    """
    grid = cfg.make_grid()
    n = len(events)
    if n == 0:
        return grid, 0

    in_range = (events.t >= trajectory.t_start - cfg.pose_tolerance) & (
        events.t <= trajectory.t_end + cfg.pose_tolerance
    )
    n_skipped = int(n - in_range.sum())
    if n_skipped > 0.01 * n:
        raise InputError(
            f"{n_skipped} of {n} events fall outside the trajectory time range"
        )
    ev = events.select(in_range)

    centers = trajectory.centers_at(ev.t)
    rot = trajectory.rotations_at(ev.t)
    d_cam = np.empty((len(ev), 3))
    d_cam[:, 0] = (ev.x.astype(np.float64) - cam.cx) / cam.fx
    d_cam[:, 1] = (ev.y.astype(np.float64) - cam.cy) / cam.fy
    d_cam[:, 2] = 1.0
    dirs = rot.apply(d_cam)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)

    # far enough to cross the whole grid from any camera position
    span = float(np.linalg.norm(grid.max_corner() - grid.origin))
    t_max = span + float(np.abs(centers - grid.origin).max() + np.abs(centers - grid.max_corner()).max())

    nx, ny, nz = grid.dims
    _accumulate_kernel(
        grid.cells,
        np.ascontiguousarray(centers),
        np.ascontiguousarray(dirs),
        grid.origin[0], grid.origin[1], grid.origin[2],
        grid.pitch, nx, ny, nz,
        cfg.attenuation.code, cfg.attenuation.r0, t_max,
    )
    return grid, n_skipped


def default_prune_threshold(weights: VoxelGrid, rel_coeff: float = 0.05) -> float:
    """Scale-free threshold: a fraction of the median positive voxel weight."""
    positive = weights.cells[weights.cells > 0]
    if positive.size == 0:
        return rel_coeff
    return float(rel_coeff * np.median(positive))


def prune(weights: VoxelGrid, tau: float, region_mask: np.ndarray | None = None) -> VoxelGrid:
    """Occupancy grid: 1 where weight <= tau (inside the bounding region).

    Contour rays sweep the exterior over an orbit, so high-weight voxels
    are carved away and the low-weight core remains.
    """
    if tau <= 0:
        raise InputError("prune threshold must be positive")
    occ = (weights.cells <= tau).astype(np.float32)
    if region_mask is not None:
        region_mask = np.asarray(region_mask).reshape(occ.shape)
        occ *= region_mask.astype(np.float32)
    return weights.like(occ)




@njit(cache=True, parallel=True)
def _project_votes(gx, gy, gz, pitch, nx, ny, nz, rot_cw, cam_centers, masks, fx, fy, cx, cy):
    """Per-voxel counts of (a) poses whose frustum contains the voxel center
    and (b) poses whose mask image covers its projection."""
    n_vox = nx * ny * nz
    n_poses = len(cam_centers)
    height, width = masks.shape[1], masks.shape[2]
    vis = np.zeros(n_vox, dtype=np.int16)
    hit = np.zeros(n_vox, dtype=np.int16)
    for idx in prange(n_vox):
        ix = idx % nx
        iy = (idx // nx) % ny
        iz = idx // (nx * ny)
        wx = gx + (ix + 0.5) * pitch
        wy = gy + (iy + 0.5) * pitch
        wz = gz + (iz + 0.5) * pitch
        for p in range(n_poses):
            dx = wx - cam_centers[p, 0]
            dy = wy - cam_centers[p, 1]
            dz = wz - cam_centers[p, 2]
            zc = rot_cw[p, 2, 0] * dx + rot_cw[p, 2, 1] * dy + rot_cw[p, 2, 2] * dz
            if zc <= 0.0:
                continue
            xc = rot_cw[p, 0, 0] * dx + rot_cw[p, 0, 1] * dy + rot_cw[p, 0, 2] * dz
            yc = rot_cw[p, 1, 0] * dx + rot_cw[p, 1, 1] * dy + rot_cw[p, 1, 2] * dz
            u = fx * xc / zc + cx
            v = fy * yc / zc + cy
            if u < 0.0 or u >= width or v < 0.0 or v >= height:
                continue
            vis[idx] += 1
            iu = int(u + 0.5)
            iv = int(v + 0.5)
            if iu >= width:
                iu = width - 1
            if iv >= height:
                iv = height - 1
            if masks[p, iv, iu]:
                hit[idx] += 1
    return vis, hit


def _pose_arrays(trajectory: Trajectory, times: np.ndarray):
    cam_centers = trajectory.centers_at(times)
    rots = trajectory.rotations_at(times).as_matrix()
    rot_cw = np.ascontiguousarray(np.transpose(rots, (0, 2, 1)))
    return np.ascontiguousarray(cam_centers), rot_cw


def visibility_mask(
    grid: VoxelGrid,
    trajectory: Trajectory,
    cam: CameraIntrinsics,
    n_poses: int = 64,
    min_visible_frac: float = 0.5,
    region_min=None,
    region_max=None,
) -> np.ndarray:
    """Bounding-region mask: voxel centers that project inside the image in
    at least `min_visible_frac` of sampled poses, optionally intersected
    with an axis-aligned box.  Voxels no camera looks at cannot be carved
    and must not survive as occupancy."""
    times = np.linspace(trajectory.t_start, trajectory.t_end, n_poses)
    cam_centers, rot_cw = _pose_arrays(trajectory, times)
    masks = np.zeros((n_poses, cam.height, cam.width), dtype=np.bool_)  # unused here
    nx, ny, nz = grid.dims
    vis, _ = _project_votes(
        grid.origin[0], grid.origin[1], grid.origin[2], grid.pitch, nx, ny, nz,
        rot_cw, cam_centers, masks, cam.fx, cam.fy, cam.cx, cam.cy,
    )
    mask = vis >= np.ceil(min_visible_frac * n_poses)
    if region_min is not None and region_max is not None:
        centers = grid.centers()
        lo = np.asarray(region_min, dtype=np.float64)
        hi = np.asarray(region_max, dtype=np.float64)
        mask &= np.all((centers >= lo) & (centers <= hi), axis=1)
    return mask


def silhouette_snapshots(
    events: EventStream,
    cam: CameraIntrinsics,
    t_edges: np.ndarray,
    margin_px: int = 2,
    min_amplitude: int = 2,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-slice silhouette masks integrated from the raw event stream.

    The scene is two-valued, so the per-pixel cumulative polarity count
    reconstructs its brightness up to the running minimum: a pixel is
    foreground at time t when its count sits in the upper half of its own
    excursion range.  Pixels that never fire (the always-covered core)
    are recovered by hole filling.  Returns (masks, usable) where usable
    flags slices whose mask does not touch the frame border (a clipped
    subject cannot be hole-filled).
    """
    from scipy.ndimage import binary_dilation, binary_fill_holes

    n_slices = len(t_edges) - 1
    shape = (cam.height, cam.width)
    m = np.zeros(shape, dtype=np.int64)
    m_min = np.zeros(shape, dtype=np.int64)
    m_max = np.zeros(shape, dtype=np.int64)
    snaps = np.zeros((n_slices,) + shape, dtype=np.int64)
    # two half-slices per slice so snapshots land on slice midpoints
    half_edges = np.interp(np.arange(2 * n_slices + 1) / 2.0, np.arange(n_slices + 1), t_edges)
    idx = np.searchsorted(events.t, half_edges)
    for h in range(2 * n_slices):
        lo, hi = idx[h], idx[h + 1]
        if hi > lo:
            np.add.at(m, (events.y[lo:hi].astype(np.int64), events.x[lo:hi].astype(np.int64)),
                      events.p[lo:hi].astype(np.int64))
            np.minimum(m_min, m, out=m_min)
            np.maximum(m_max, m, out=m_max)
        if h % 2 == 0:
            snaps[h // 2] = m
    amp = m_max - m_min
    active = amp >= min_amplitude
    usable = np.zeros(n_slices, dtype=bool)
    masks = np.zeros((n_slices,) + shape, dtype=bool)
    from scipy.ndimage import binary_erosion

    for i in range(n_slices):
        fg = active & (snaps[i] - m_min >= 0.5 * amp)
        # close small boundary gaps before filling, then take back the bias
        mask = binary_erosion(binary_fill_holes(binary_dilation(fg, iterations=3)), iterations=2)
        if (
            mask[:2, :].any() or mask[-2:, :].any()
            or mask[:, :2].any() or mask[:, -2:].any()
        ):
            continue  # subject clipped by the frame: interior not closed
        if margin_px > 0:
            mask = binary_dilation(mask, iterations=margin_px)
        masks[i] = mask
        usable[i] = mask.any()
    return masks, usable


def event_hull_mask(
    grid: VoxelGrid,
    events: EventStream,
    trajectory: Trajectory,
    cam: CameraIntrinsics,
    n_slices: int = 32,
    margin_px: int = 2,
    min_inside_frac: float = 0.85,
    min_slice_events: int = 50,
    method: str = "integrate",
) -> np.ndarray:
    """Bounding region derived from the events themselves.

    Grazing rays only sweep space right around the silhouette boundary;
    voxels that project outside every silhouette are never swept and would
    otherwise survive pruning as junk.  The silhouette is not stored, but
    it is recoverable: "integrate" reconstructs per-slice silhouette masks
    from cumulative event polarities, "convex" falls back to the convex
    hull of each slice's active pixels.  A voxel stays in the region when
    it projects inside the mask in at least min_inside_frac of the usable
    slices.
    """
    from scipy.ndimage import binary_dilation
    from scipy.spatial import ConvexHull, QhullError
    from skimage.draw import polygon

    if method not in ("integrate", "convex"):
        raise InputError(f"unknown region method {method!r}")
    edges = np.linspace(trajectory.t_start, trajectory.t_end, n_slices + 1)
    masks = []
    mids = []
    if method == "integrate":
        all_masks, usable = silhouette_snapshots(events, cam, edges, margin_px)
        for i in range(n_slices):
            if usable[i]:
                masks.append(all_masks[i])
                mids.append(0.5 * (edges[i] + edges[i + 1]))
    else:
        for i in range(n_slices):
            sel = (events.t >= edges[i]) & (events.t < edges[i + 1])
            if i == n_slices - 1:
                sel |= events.t == edges[-1]
            if sel.sum() < min_slice_events:
                continue
            px = np.stack([events.x[sel], events.y[sel]], axis=1).astype(np.float64)
            uniq = np.unique(px, axis=0)
            try:
                hull = ConvexHull(uniq)
            except QhullError:
                continue
            poly = uniq[hull.vertices]
            mask = np.zeros((cam.height, cam.width), dtype=bool)
            rr, cc = polygon(poly[:, 1], poly[:, 0], shape=mask.shape)
            mask[rr, cc] = True
            if margin_px > 0:
                mask = binary_dilation(mask, iterations=margin_px)
            masks.append(mask)
            mids.append(0.5 * (edges[i] + edges[i + 1]))
    if not masks:
        return np.ones(grid.n_cells, dtype=np.bool_)
    cam_centers, rot_cw = _pose_arrays(trajectory, np.array(mids))
    nx, ny, nz = grid.dims
    _, hit = _project_votes(
        grid.origin[0], grid.origin[1], grid.origin[2], grid.pitch, nx, ny, nz,
        rot_cw, cam_centers, np.ascontiguousarray(np.stack(masks)),
        cam.fx, cam.fy, cam.cx, cam.cy,
    )
    return hit >= np.ceil(min_inside_frac * len(masks))


def occupied_fraction(occupancy: VoxelGrid, region_mask: np.ndarray | None = None) -> float:
    """Fraction of the (masked) region left occupied; high values signal
    insufficient rays for the chosen grid resolution."""
    occ = occupancy.cells > 0.5
    if region_mask is None:
        return float(occ.mean())
    region_mask = np.asarray(region_mask).reshape(occ.shape).astype(bool)
    denom = region_mask.sum()
    if denom == 0:
        return 0.0
    return float((occ & region_mask).sum() / denom)
