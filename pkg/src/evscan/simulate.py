"""Synthetic event-camera data generator.

A flat-shaded scene (foreground mesh against a uniform background) is
rendered from a moving pinhole camera at a fixed sampling rate.  Each pixel
keeps a reference log-intensity level; whenever the rendered level drifts
from the reference by at least the contrast sensitivity C, the pixel emits
floor(|dL| / C) events of matching polarity, timestamped by linear
interpolation inside the sample interval, and the reference advances by the
emitted multiple of C.

Because the scene is flat-shaded, brightness edges coincide with the
silhouette, and the ground-truth contour label of an event is derived from
the depth image at its sample: a pixel is contour-adjacent when some
8-neighbor differs by at least the edge threshold (finite/background
transitions always count).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .geometry import CameraIntrinsics, CameraPose, EventStream, Trajectory, TriMesh
from .render import MeshBVH, render_coverage_bvh, render_depth_bvh

__all__ = [
    "Scene",
    "SimConfig",
    "SimResult",
    "render_depth",
    "render_log_intensity",
    "depth_contour_mask",
    "simulate_events",
    "render_frames",
]

DEPTH_EDGE_THRESHOLD = 0.05  # meters; silhouette-vs-background always triggers


@dataclass
class Scene:
    """Static mesh with two-valued log intensity (foreground / background)."""

    mesh: TriMesh
    log_intensity_fg: float = 0.4
    log_intensity_bg: float = -0.7

    def __post_init__(self):
        if abs(self.log_intensity_fg - self.log_intensity_bg) <= 0.0:
            raise InputError("scene must have nonzero foreground/background contrast")
        self._bvh = None

    @property
    def bvh(self) -> MeshBVH:
        if self._bvh is None:
            self._bvh = MeshBVH(self.mesh)
        return self._bvh


@dataclass
class SimConfig:
    contrast_C: float = 0.2
    sample_rate: float = 10000.0
    seed: int = 0
    illumination_scale: float = 1.0
    noise_rate: float = 0.0  # spurious events per pixel per second, uniform
    depth_every: int = 0  # store every Nth sample's depth; 0 = ~30 fps
    edge_threshold: float = DEPTH_EDGE_THRESHOLD
    antialias: int = 1  # pixel-area supersampling (1 = point sampling)

    def __post_init__(self):
        if self.contrast_C <= 0:
            raise InputError("contrast sensitivity C must be positive")
        if self.sample_rate <= 0:
            raise InputError("sample rate must be positive")
        if self.illumination_scale <= 0:
            raise InputError("illumination scale must be positive")
        if self.antialias < 1:
            raise InputError("antialias factor must be at least 1")


@dataclass
class SimResult:
    events: EventStream
    labels: np.ndarray  # bool, aligned with events
    depth_times: np.ndarray
    depths: list[np.ndarray] = field(default_factory=list)
    skipped_pose_samples: int = 0


def render_depth(scene: Scene, cam: CameraIntrinsics, pose: CameraPose) -> np.ndarray:
    """(H, W) nearest-intersection camera depth in meters; +inf background."""
    return render_depth_bvh(scene.bvh, cam, pose)


def render_log_intensity(
    scene: Scene, cam: CameraIntrinsics, pose: CameraPose, illumination_scale: float = 1.0
) -> np.ndarray:
    depth = render_depth(scene, cam, pose)
    return _log_image(scene, depth, illumination_scale)


def _log_image(scene: Scene, depth: np.ndarray, illumination_scale: float) -> np.ndarray:
    if illumination_scale == 1.0:
        fg = scene.log_intensity_fg
    else:
        fg = scene.log_intensity_bg + illumination_scale * (
            scene.log_intensity_fg - scene.log_intensity_bg
        )
    return np.where(np.isfinite(depth), fg, scene.log_intensity_bg)


def depth_contour_mask(depth: np.ndarray, threshold: float = DEPTH_EDGE_THRESHOLD) -> np.ndarray:
    """Pixels within one pixel (Chebyshev) of a depth discontinuity.

    A pixel is marked when any 8-neighbor jumps by >= threshold or crosses
    between finite depth and background.  Borders replicate, so the image
    edge itself is not a discontinuity.
    """
    pad = np.pad(depth, 1, mode="edge")
    finite = np.isfinite(depth)
    pad_finite = np.pad(finite, 1, mode="edge")
    h, w = depth.shape
    mask = np.zeros(depth.shape, dtype=bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            a = pad[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
            fa = pad_finite[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
            both = finite & fa
            jump = both & (np.abs(depth - np.where(fa, a, 0.0)) >= threshold)
            mask |= jump | (finite ^ fa)
    return mask


def simulate_events(
    scene: Scene, cam: CameraIntrinsics, trajectory: Trajectory, cfg: SimConfig
) -> SimResult:
    """Run the reference-level event model along a camera trajectory."""
    if np.any(np.diff(trajectory.times) <= 0):
        raise InputError("trajectory has duplicate timestamps")
    if cfg.sample_rate < 2.0 * trajectory.keyframe_rate():
        raise InputError(
            f"sample rate {cfg.sample_rate} Hz must be at least twice the "
            f"trajectory keyframe rate {trajectory.keyframe_rate():.3g} Hz"
        )
    duration = trajectory.duration
    n_samples = max(2, int(round(duration * cfg.sample_rate)) + 1)
    times = trajectory.t_start + np.linspace(0.0, duration, n_samples)
    depth_every = cfg.depth_every or max(1, int(round(cfg.sample_rate / 30.0)))

    centers = trajectory.centers_at(times)
    rotations = trajectory.rotations_at(times).as_matrix()

    C = cfg.contrast_C

    def sample_level(pose, depth):
        # with antialiasing, log intensity mixes by pixel-area coverage, so
        # the rays of a crossing's events carry the sub-pixel edge position
        if cfg.antialias > 1:
            cov = render_coverage_bvh(scene.bvh, cam, pose, cfg.antialias)
            contrast = cfg.illumination_scale * (scene.log_intensity_fg - scene.log_intensity_bg)
            return scene.log_intensity_bg + cov * contrast
        return _log_image(scene, depth, cfg.illumination_scale)

    pose0 = CameraPose(R=rotations[0].T, T=-centers[0], t=times[0])
    depth = render_depth(scene, cam, pose0)
    l_ref = sample_level(pose0, depth)

    chunks_t, chunks_x, chunks_y, chunks_p, chunks_lab = [], [], [], [], []
    depth_times = [times[0]]
    depths = [depth.astype(np.float32)]

    for k in range(1, n_samples):
        pose = CameraPose(R=rotations[k].T, T=-centers[k], t=times[k])
        depth = render_depth(scene, cam, pose)
        level = sample_level(pose, depth)
        delta = level - l_ref
        n_ev = np.floor(np.abs(delta) / C).astype(np.int64)
        active = n_ev > 0
        if np.any(active):
            ys, xs = np.nonzero(active)
            counts = n_ev[ys, xs]
            pol = np.sign(delta[ys, xs]).astype(np.int8)
            l_ref[ys, xs] += pol * counts * C

            total = int(counts.sum())
            rep_x = np.repeat(xs, counts).astype(np.uint16)
            rep_y = np.repeat(ys, counts).astype(np.uint16)
            rep_p = np.repeat(pol, counts)
            # j-th of n events in (t_{k-1}, t_k] lands at fraction j/n
            offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts) + 1
            frac = offsets / np.repeat(counts, counts)
            rep_t = times[k - 1] + frac * (times[k] - times[k - 1])

            contour = depth_contour_mask(depth, cfg.edge_threshold)
            rep_lab = contour[rep_y, rep_x]

            chunks_t.append(rep_t)
            chunks_x.append(rep_x)
            chunks_y.append(rep_y)
            chunks_p.append(rep_p)
            chunks_lab.append(rep_lab)
        if k % depth_every == 0 or k == n_samples - 1:
            depth_times.append(times[k])
            depths.append(depth.astype(np.float32))

    if chunks_t:
        t = np.concatenate(chunks_t)
        x = np.concatenate(chunks_x)
        y = np.concatenate(chunks_y)
        p = np.concatenate(chunks_p)
        lab = np.concatenate(chunks_lab)
    else:
        t = np.zeros(0)
        x = np.zeros(0, dtype=np.uint16)
        y = np.zeros(0, dtype=np.uint16)
        p = np.zeros(0, dtype=np.int8)
        lab = np.zeros(0, dtype=bool)

    if cfg.noise_rate > 0:
        t, x, y, p, lab = _add_noise(t, x, y, p, lab, cam, trajectory, cfg, depth_times, depths)

    # canonical global order: (t, y, x)
    order = np.lexsort((x, y, t))
    events = EventStream(t[order], x[order], y[order], p[order], cam.width, cam.height)
    return SimResult(
        events=events,
        labels=lab[order],
        depth_times=np.array(depth_times),
        depths=depths,
    )


def _add_noise(t, x, y, p, lab, cam, trajectory, cfg, depth_times, depths):
    """Uniform background-rate noise events, labeled against the nearest
    stored depth snapshot so noise on the silhouette stays a positive."""
    rng = np.random.default_rng(cfg.seed)
    expected = cfg.noise_rate * cam.width * cam.height * trajectory.duration
    n = int(rng.poisson(expected))
    if n == 0:
        return t, x, y, p, lab
    nt = trajectory.t_start + rng.random(n) * trajectory.duration
    nx = rng.integers(0, cam.width, n).astype(np.uint16)
    ny = rng.integers(0, cam.height, n).astype(np.uint16)
    np_ = np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)
    snap = np.searchsorted(np.asarray(depth_times), nt).clip(0, len(depths) - 1)
    masks = [depth_contour_mask(d, cfg.edge_threshold) for d in depths]
    nlab = np.array([masks[s][ny[i], nx[i]] for i, s in enumerate(snap)], dtype=bool)
    return (
        np.concatenate([t, nt]),
        np.concatenate([x, nx]),
        np.concatenate([y, ny]),
        np.concatenate([p, np_]),
        np.concatenate([lab, nlab]),
    )


def render_frames(
    scene: Scene,
    cam: CameraIntrinsics,
    trajectory: Trajectory,
    fps: float = 30.0,
    illumination_scale: float = 1.0,
    blur_px_threshold: float = 1.0,
    max_sub_renders: int = 64,
) -> list[np.ndarray]:
    """Frame sequence at the given rate; frame count = floor(duration * fps).

    When the camera sweeps more than blur_px_threshold pixels during the
    exposure (1/fps), the frame averages sub-renders across the exposure to
    emulate motion blur.
    """
    if fps <= 0:
        raise InputError("fps must be positive")
    n_frames = int(np.floor(trajectory.duration * fps))
    frames = []
    ref = _reference_points(scene)
    for i in range(n_frames):
        t0 = trajectory.t_start + i / fps
        t1 = t0 + 1.0 / fps
        blur_px = _image_motion(cam, trajectory, ref, t0, min(t1, trajectory.t_end))
        n_sub = int(np.clip(np.ceil(blur_px / blur_px_threshold), 1, max_sub_renders))
        acc = np.zeros((cam.height, cam.width), dtype=np.float64)
        for j in range(n_sub):
            ts = t0 + (j + 0.5) / n_sub * (t1 - t0)
            pose = trajectory.pose_at(min(ts, trajectory.t_end))
            acc += _log_image(scene, render_depth(scene, cam, pose), illumination_scale)
        frames.append(_to_pgm_gray(acc / n_sub, scene, illumination_scale))
    return frames


def _reference_points(scene: Scene) -> np.ndarray:
    """Mesh centroid plus bounding-box corners; the corners track the
    fastest-moving silhouette regions."""
    if not len(scene.mesh):
        return np.zeros((1, 3))
    v = scene.mesh.vertices
    lo, hi = v.min(axis=0), v.max(axis=0)
    corners = np.array([[a, b, c] for a in (lo[0], hi[0]) for b in (lo[1], hi[1]) for c in (lo[2], hi[2])])
    return np.vstack([v.mean(axis=0)[None, :], corners])


def _image_motion(cam, trajectory, points, t0, t1) -> float:
    from .geometry import project_point

    points = np.atleast_2d(points)
    pose0 = trajectory.pose_at(t0)
    pose1 = trajectory.pose_at(t1)
    worst = 0.0
    for point in points:
        try:
            px0, _ = project_point(cam, pose0, point)
            px1, _ = project_point(cam, pose1, point)
        except ValueError:
            continue
        worst = max(worst, float(np.linalg.norm(px1 - px0)))
    return worst


def _to_pgm_gray(log_img: np.ndarray, scene: Scene, illumination_scale: float) -> np.ndarray:
    fg = scene.log_intensity_bg + illumination_scale * (
        scene.log_intensity_fg - scene.log_intensity_bg
    )
    lo, hi = min(scene.log_intensity_bg, fg), max(scene.log_intensity_bg, fg)
    if hi <= lo:
        return np.zeros(log_img.shape, dtype=np.uint8)
    return (255.0 * (log_img - lo) / (hi - lo)).clip(0, 255).astype(np.uint8)
