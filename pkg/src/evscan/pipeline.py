"""Stage orchestration and artifact layout.

Every stage writes its outputs plus a manifest.json recording all
parameters and seeds, sufficient to reproduce the artifacts bit-for-bit;
every stage also restarts from on-disk artifacts alone.

Dataset directory (one sequence):
    manifest.json  trajectory.csv  events.evc  labels.evl
    depth/depth_NNNNNN.pfm + depth_times.csv   frames/frame_NNNNNN.pgm
Carve directory:   manifest.json  weights.evg  occupancy.evg  mesh.obj
Fit directory:     manifest.json  result.json  fitted.obj  joints.json
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import io as evio
from .body import BodyModel, BodyParams, load_model, skin
from .carve import (
    AttenuationMode,
    CarveConfig,
    accumulate,
    default_prune_threshold,
    event_hull_mask,
    occupied_fraction,
    prune,
    visibility_mask,
)
from .contour import ContourProvider, apply_provider
from .errors import InputError
from .fit import FitConfig, FitResult, fit
from .geometry import CameraIntrinsics, Trajectory, TriMesh, make_orbit
from .metrics import aggregate, chamfer_distance, pel_mpjpe, rms_from_cd
from .simulate import Scene, SimConfig, render_frames, simulate_events
from .surface import marching_cubes

PAPER_INTRINSICS = dict(width=640, height=480, fx=250.0, fy=250.0, cx=320.0, cy=240.0)
DEFAULT_ILLUM_SCALES = np.geomspace(0.25, 4.0, 9).round(6).tolist()


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(directory: Path, manifest: dict) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)


def read_manifest(directory) -> dict:
    with open(Path(directory) / "manifest.json") as f:
        return json.load(f)


def intrinsics_from_dict(d: dict) -> CameraIntrinsics:
    return CameraIntrinsics(
        int(d["width"]), int(d["height"]),
        float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]),
    )


def run_simulate(
    out_dir,
    mesh_path,
    cam: CameraIntrinsics,
    orbit: dict,
    sim: SimConfig,
    save_frames: bool = False,
    fps: float = 30.0,
    log_fg: float = 0.4,
    log_bg: float = -0.7,
) -> dict:
    """Simulate one sequence into out_dir and return its manifest."""
    out_dir = Path(out_dir)
    mesh = evio.load_obj(mesh_path)
    if mesh.is_empty:
        raise InputError(f"{mesh_path}: mesh has no faces")
    scene = Scene(mesh, log_fg, log_bg)
    trajectory = make_orbit(**orbit)
    result = simulate_events(scene, cam, trajectory, sim)

    out_dir.mkdir(parents=True, exist_ok=True)
    evio.save_trajectory(out_dir / "trajectory.csv", trajectory)
    evio.save_events(out_dir / "events.evc", result.events)
    evio.save_labels(out_dir / "labels.evl", result.labels, cam.width, cam.height)
    depth_dir = out_dir / "depth"
    depth_dir.mkdir(exist_ok=True)
    with open(depth_dir / "depth_times.csv", "w") as f:
        f.write("index,t\n")
        for i, t in enumerate(result.depth_times):
            f.write(f"{i},{t:.9f}\n")
    for i, d in enumerate(result.depths):
        evio.save_pfm(depth_dir / f"depth_{i:06d}.pfm", d)
    if save_frames:
        frames = render_frames(scene, cam, trajectory, fps, sim.illumination_scale)
        frame_dir = out_dir / "frames"
        frame_dir.mkdir(exist_ok=True)
        for i, img in enumerate(frames):
            evio.save_pgm(frame_dir / f"frame_{i:06d}.pgm", img)

    manifest = {
        "stage": "simulate",
        "mesh": str(mesh_path),
        "mesh_sha256": file_sha256(mesh_path),
        "intrinsics": dict(width=cam.width, height=cam.height, fx=cam.fx, fy=cam.fy, cx=cam.cx, cy=cam.cy),
        "orbit": orbit,
        "sim": asdict(sim),
        "scene": {"log_fg": log_fg, "log_bg": log_bg},
        "frames": {"saved": save_frames, "fps": fps},
        "n_events": len(result.events),
        "n_contour": int(np.count_nonzero(result.labels)),
    }
    write_manifest(out_dir, manifest)
    return manifest


def run_simulate_group(out_dir, mesh_path, cam, orbit, sim: SimConfig, illum_scales, **kw) -> dict:
    """One sequence per illumination scale; group manifest lists them all."""
    out_dir = Path(out_dir)
    sequences = []
    for i, scale in enumerate(illum_scales):
        seq_sim = SimConfig(**{**asdict(sim), "illumination_scale": float(scale)})
        seq_dir = out_dir / f"seq_{i:02d}"
        run_simulate(seq_dir, mesh_path, cam, orbit, seq_sim, **kw)
        sequences.append(seq_dir.name)
    manifest = {"stage": "simulate-group", "sequences": sequences, "illum_scales": list(illum_scales)}
    write_manifest(out_dir, manifest)
    return manifest


def load_dataset(dataset_dir):
    dataset_dir = Path(dataset_dir)
    manifest = read_manifest(dataset_dir)
    events = evio.load_events(dataset_dir / "events.evc")
    labels = evio.load_labels(dataset_dir / "labels.evl")
    trajectory = evio.load_trajectory(dataset_dir / "trajectory.csv")
    cam = intrinsics_from_dict(manifest["intrinsics"])
    return manifest, events, labels, trajectory, cam


def run_carve(
    dataset_dir,
    out_dir,
    cfg: CarveConfig,
    provider: ContourProvider | None = None,
    grid_from_trajectory: bool = True,
) -> dict:
    """contour filter -> accumulate -> prune -> marching cubes."""
    out_dir = Path(out_dir)
    manifest, events, labels, trajectory, cam = load_dataset(dataset_dir)
    provider = provider or ContourProvider()
    contour = apply_provider(events, provider, labels=labels)

    if grid_from_trajectory and cfg.grid_dims is not None:
        center = trajectory.centers.mean(axis=0)
        radius = float(np.linalg.norm(trajectory.centers - center, axis=1).mean())
        edge = 2.0 * radius
        n = cfg.grid_dims[0]
        cfg.grid_origin = center - edge / 2.0
        cfg.grid_pitch = edge / n

    weights, n_skipped = accumulate(contour, trajectory, cam, cfg)
    tau = cfg.prune_threshold
    if tau is None:
        tau = default_prune_threshold(weights, cfg.prune_rel_coeff)
    region = visibility_mask(
        weights, trajectory, cam,
        min_visible_frac=cfg.min_visible_frac,
        region_min=cfg.region_min, region_max=cfg.region_max,
    )
    if cfg.use_event_hull:
        # region reconstruction integrates polarities, so it wants the raw
        # stream, not the contour subset
        region &= event_hull_mask(weights, events, trajectory, cam)
    occupancy = prune(weights, tau, region)
    occ_frac = occupied_fraction(occupancy, region)
    warning = None
    if occ_frac > cfg.insufficient_rays_bound:
        warning = (
            f"insufficient-rays: occupied fraction {occ_frac:.3f} exceeds "
            f"{cfg.insufficient_rays_bound}; grid resolution may be too high "
            f"for the available contour rays"
        )
    if cfg.region_min is not None and cfg.region_max is not None:
        seed = 0.5 * (np.asarray(cfg.region_min, float) + np.asarray(cfg.region_max, float))
    else:
        seed = weights.origin + 0.5 * np.array(weights.dims) * weights.pitch
    mesh = marching_cubes(occupancy, seed_point=seed)

    out_dir.mkdir(parents=True, exist_ok=True)
    evio.save_grid(out_dir / "weights.evg", weights)
    evio.save_grid(out_dir / "occupancy.evg", occupancy)
    evio.save_obj(out_dir / "mesh.obj", mesh)
    out_manifest = {
        "stage": "carve",
        "dataset": str(dataset_dir),
        "provider": asdict(provider),
        "attenuation": asdict(cfg.attenuation),
        "grid": {
            "origin": weights.origin.tolist(),
            "pitch": weights.pitch,
            "dims": list(weights.dims),
        },
        "prune_threshold": tau,
        "n_contour_events": len(contour),
        "n_skipped": n_skipped,
        "occupied_fraction": occ_frac,
        "warning": warning,
        "min_visible_frac": cfg.min_visible_frac,
        "region_min": None if cfg.region_min is None else np.asarray(cfg.region_min).tolist(),
        "region_max": None if cfg.region_max is None else np.asarray(cfg.region_max).tolist(),
    }
    write_manifest(out_dir, out_manifest)
    return out_manifest


def run_fit(carved_mesh_path, model_path, out_dir, cfg: FitConfig) -> dict:
    out_dir = Path(out_dir)
    model = load_model(model_path)
    target = evio.load_obj(carved_mesh_path)
    result = fit(model, target, init=None, cfg=cfg)
    fitted, joints = skin(model, result.params)

    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "result.json", "w") as f:
        json.dump(result.to_dict(), f)
    evio.save_obj(out_dir / "fitted.obj", fitted)
    save_joints(out_dir / "joints.json", joints, model.joint_names)
    manifest = {
        "stage": "fit",
        "carved_mesh": str(carved_mesh_path),
        "model": str(model_path),
        "model_sha256": file_sha256(model_path),
        "fit": asdict(cfg),
        "final_loss": float(result.loss_trace[-1]),
        "initial_loss": float(result.loss_trace[0]),
        "converged": result.converged,
    }
    write_manifest(out_dir, manifest)
    return manifest


def save_joints(path, joints: np.ndarray, names: list[str]) -> None:
    with open(path, "w") as f:
        json.dump({"names": list(names), "positions": np.asarray(joints).tolist()}, f)


def load_joints(path) -> tuple[np.ndarray, list[str]]:
    with open(path) as f:
        d = json.load(f)
    return np.array(d["positions"], dtype=np.float64), list(d["names"])


def run_eval(
    est_mesh_path,
    est_joints_path,
    gt_mesh_path,
    gt_joints_path,
    out_path=None,
    cd_samples: int = 200_000,
    seed: int = 0,
    carved_mesh_path=None,
) -> dict:
    est_joints, est_names = load_joints(est_joints_path)
    gt_joints, gt_names = load_joints(gt_joints_path)
    if est_names != gt_names:
        raise InputError(
            f"joint orderings differ: {est_names[:3]}... vs {gt_names[:3]}..."
        )
    est_mesh = evio.load_obj(est_mesh_path)
    gt_mesh = evio.load_obj(gt_mesh_path)
    cd = chamfer_distance(gt_mesh, est_mesh, n=cd_samples, seed=seed)
    out = {
        "pel_mpjpe_mm": pel_mpjpe(est_joints, gt_joints),
        "cd_mm2": cd,
        "rms_mm": rms_from_cd(cd),
    }
    if carved_mesh_path is not None:
        carved = evio.load_obj(carved_mesh_path)
        out["carved_cd_mm2"] = chamfer_distance(gt_mesh, carved, n=cd_samples, seed=seed)
    if out_path is not None:
        with open(out_path, "w") as f:
            json.dump(out, f, indent=2)
    return out


def eval_group(per_sequence: list[dict], out_path=None) -> dict:
    out = aggregate(per_sequence)
    if out_path is not None:
        with open(out_path, "w") as f:
            json.dump(out, f, indent=2)
    return out


def make_toy_subject(out_dir, theta=None, beta=None, spec=None) -> dict:
    """Write the toy body posed at (theta, beta): OBJ + model file + GT joints."""
    from .body import make_toy_model, save_model

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = make_toy_model(spec)
    params = model.zero_params(10)
    if theta is not None:
        params.theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if beta is not None:
        params.beta = np.asarray(beta, dtype=np.float64).reshape(-1)
    mesh, joints = skin(model, params)
    evio.save_obj(out_dir / "subject.obj", mesh)
    save_model(out_dir / "model.evm1", model)
    save_joints(out_dir / "gt_joints.json", joints, model.joint_names)
    manifest = {
        "stage": "make-toy",
        "theta": params.theta.tolist(),
        "beta": params.beta.tolist(),
        "n_vertices": model.n_vertices,
    }
    write_manifest(out_dir, manifest)
    return manifest


def run_sweep(spec: dict, out_dir) -> dict:
    """Cartesian sweep over declared axes; one row per cell with metrics.

    Cells whose CD exceeds 5x the sweep median are flagged as outliers and
    means are reported both with and without them.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = spec["dataset"]
    model_path = spec["model"]
    gt_mesh = spec["gt_mesh"]
    gt_joints = spec["gt_joints"]
    axes = {
        "attenuation": [str(v) for v in spec.get("attenuation", ["inverse"])],
        "grid_dims": [int(v) for v in spec.get("grid_dims", [256])],
        "beta_dim": [int(v) for v in spec.get("beta_dim", [10])],
    }
    fit_iters = int(spec.get("fit_iters", 300))
    n_samples = int(spec.get("n_samples", 20000))
    cd_samples = int(spec.get("cd_samples", 200000))
    region_min = spec.get("region_min")
    region_max = spec.get("region_max")

    rows = []
    for atten in axes["attenuation"]:
        for dims in axes["grid_dims"]:
            for beta_dim in axes["beta_dim"]:
                cell = f"atten={atten}_grid={dims}_beta={beta_dim}"
                cell_dir = out_dir / cell
                carve_cfg = CarveConfig(
                    grid_dims=(dims, dims, dims),
                    attenuation=AttenuationMode(atten),
                    region_min=region_min,
                    region_max=region_max,
                )
                carve_manifest = run_carve(dataset, cell_dir / "carve", carve_cfg)
                fit_cfg = FitConfig(iters=fit_iters, n_samples=n_samples, beta_dim=beta_dim)
                run_fit(cell_dir / "carve" / "mesh.obj", model_path, cell_dir / "fit", fit_cfg)
                metrics = run_eval(
                    cell_dir / "fit" / "fitted.obj",
                    cell_dir / "fit" / "joints.json",
                    gt_mesh,
                    gt_joints,
                    cd_samples=cd_samples,
                    carved_mesh_path=cell_dir / "carve" / "mesh.obj",
                )
                rows.append(
                    {
                        "attenuation": atten,
                        "grid_dims": dims,
                        "beta_dim": beta_dim,
                        "pel_mpjpe_mm": metrics["pel_mpjpe_mm"],
                        "cd_mm2": metrics["cd_mm2"],
                        "carved_cd_mm2": metrics["carved_cd_mm2"],
                        "warning": carve_manifest["warning"],
                    }
                )

    cds = np.array([r["cd_mm2"] for r in rows])
    median = float(np.median(cds))
    for r in rows:
        r["outlier"] = bool(r["cd_mm2"] > 5.0 * median) or r["warning"] is not None
    inliers = [r for r in rows if not r["outlier"]]
    table = {
        "rows": rows,
        "mean_cd_mm2_all": float(np.mean([r["cd_mm2"] for r in rows])),
        "mean_cd_mm2_inliers": float(np.mean([r["cd_mm2"] for r in inliers])) if inliers else None,
        "mean_pel_mpjpe_all": float(np.mean([r["pel_mpjpe_mm"] for r in rows])),
        "mean_pel_mpjpe_inliers": float(np.mean([r["pel_mpjpe_mm"] for r in inliers])) if inliers else None,
    }
    with open(out_dir / "sweep.json", "w") as f:
        json.dump(table, f, indent=2)
    _write_sweep_csv(out_dir / "sweep.csv", rows)
    return table


def _write_sweep_csv(path, rows: list[dict]) -> None:
    cols = ["attenuation", "grid_dims", "beta_dim", "pel_mpjpe_mm", "cd_mm2", "carved_cd_mm2", "outlier", "warning"]
    with open(path, "w") as f:
        f.write(",".join(cols) + "\n")
        for r in rows:
            f.write(",".join(str(r.get(c, "")) for c in cols) + "\n")
