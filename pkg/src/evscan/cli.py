"""Command-line pipeline driver.

Subcommands mirror the pipeline stages (simulate, filter, carve, mesh, fit,
eval, sweep, pipeline); make-toy writes the self-contained test subject.
Values come from an INI config file (section per stage) overridden by
explicit flags.  Exit codes: 0 success, 1 runtime failure, 2 usage/config
error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from pathlib import Path

import numpy as np

from . import io as evio
from . import pipeline
from .carve import AttenuationMode, CarveConfig
from .contour import ContourProvider
from .errors import EvscanUsageError, FitDivergenceError, InputError, LoadError
from .fit import FitConfig
from .geometry import CameraIntrinsics
from .simulate import SimConfig
from .surface import marching_cubes


def _config_section(path: str | None, section: str) -> dict:
    if path is None:
        return {}
    if not Path(path).exists():
        raise EvscanUsageError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.read(path)
    if section not in parser:
        return {}
    return dict(parser[section])


def _pick(args_value, cfg: dict, key: str, default, cast=float):
    """Flag beats config file beats default."""
    if args_value is not None:
        return args_value
    if key in cfg:
        raw = cfg[key]
        if cast is bool:
            return str(raw).lower() in ("1", "true", "yes", "on")
        return cast(raw)
    return default


def _floats(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if v != ""]


def _require(path, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise EvscanUsageError(f"{what} not found: {p}")
    return p


def cmd_simulate(args) -> int:
    if args.manifest:
        m = json.load(open(_require(args.manifest, "manifest")))
        cam = pipeline.intrinsics_from_dict(m["intrinsics"])
        sim = SimConfig(**m["sim"])
        pipeline.run_simulate(
            args.out, m["mesh"], cam, m["orbit"], sim,
            save_frames=m["frames"]["saved"], fps=m["frames"]["fps"],
            log_fg=m["scene"]["log_fg"], log_bg=m["scene"]["log_bg"],
        )
        return 0
    cfg = _config_section(args.config, "simulate")
    mesh = _require(_pick(args.mesh, cfg, "mesh", None, str), "mesh OBJ")
    width = int(_pick(args.width, cfg, "width", 640, int))
    height = int(_pick(args.height, cfg, "height", 480, int))
    scale = width / 640.0
    cam = CameraIntrinsics(width, height, 250.0 * scale, 250.0 * scale, width / 2.0, height / 2.0)
    loops = _pick(args.orbit_loops, cfg, "orbit_loops", 2.0)
    if loops <= 0:
        raise EvscanUsageError("orbit must have a positive number of loops")
    speed = _pick(args.speed_mult, cfg, "speed_mult", 1.0)
    orbit = dict(
        center=_floats(_pick(None, cfg, "orbit_center", "0,0,0", str)),
        radius=_pick(args.orbit_radius, cfg, "orbit_radius", 1.0),
        loops=loops,
        duration=_pick(args.duration, cfg, "duration", 17.27) / speed,
        elev_amplitude=_pick(args.elev_amplitude, cfg, "elev_amplitude", 0.25),
        jitter=_pick(args.jitter, cfg, "jitter", 0.0),
    )
    sim = SimConfig(
        contrast_C=_pick(args.contrast_c, cfg, "contrast_c", 0.2),
        sample_rate=_pick(args.sample_rate, cfg, "sample_rate", 1000.0),
        seed=int(_pick(args.seed, cfg, "seed", 0, int)),
        illumination_scale=_pick(args.illum_scale, cfg, "illum_scale", 1.0),
        noise_rate=_pick(args.noise_rate, cfg, "noise_rate", 0.0),
    )
    frames = bool(args.frames or _pick(None, cfg, "frames", False, bool))
    if args.illum_scales:
        scales = _floats(args.illum_scales)
        pipeline.run_simulate_group(args.out, mesh, cam, orbit, sim, scales, save_frames=frames)
    else:
        pipeline.run_simulate(args.out, mesh, cam, orbit, sim, save_frames=frames)
    return 0


def cmd_filter(args) -> int:
    events = evio.load_events(_require(args.events, "event file"))
    provider = ContourProvider(
        variant=args.provider,
        threshold=args.threshold,
        path=args.labels or args.probabilities,
        quantile=args.quantile,
    )
    labels = evio.load_labels(args.labels) if args.labels else None
    from .contour import apply_provider

    out = apply_provider(events, provider, labels=labels)
    evio.save_events(args.out, out)
    print(f"kept {len(out)} of {len(events)} events")
    return 0


def _carve_config(args, cfg: dict) -> CarveConfig:
    dims = int(_pick(args.grid_dims, cfg, "grid_dims", 256, int))
    region_min = region_max = None
    region = _pick(args.region, cfg, "region", None, str)
    if region:
        vals = _floats(region)
        if len(vals) != 6:
            raise EvscanUsageError("--region wants x0,y0,z0,x1,y1,z1")
        region_min, region_max = vals[:3], vals[3:]
    return CarveConfig(
        grid_dims=(dims, dims, dims),
        attenuation=AttenuationMode(
            _pick(args.attenuation, cfg, "attenuation", "inverse", str),
            _pick(args.r0, cfg, "r0", 1.0),
        ),
        prune_threshold=_pick(args.tau, cfg, "tau", None),
        region_min=region_min,
        region_max=region_max,
        min_visible_frac=_pick(None, cfg, "min_visible_frac", 0.5),
    )


def cmd_carve(args) -> int:
    cfg = _config_section(args.config, "carve")
    _require(Path(args.dataset) / "manifest.json", "dataset manifest")
    provider = ContourProvider(
        variant=args.provider, threshold=args.threshold,
        path=args.probabilities,
    )
    manifest = pipeline.run_carve(args.dataset, args.out, _carve_config(args, cfg), provider)
    if manifest["warning"]:
        print(f"warning: {manifest['warning']}", file=sys.stderr)
    print(f"carved {manifest['n_contour_events']} contour events -> {args.out}")
    return 0


def cmd_mesh(args) -> int:
    grid = evio.load_grid(_require(args.occupancy, "occupancy grid"))
    mesh = marching_cubes(grid, iso=args.iso, keep_largest=not args.keep_debris)
    evio.save_obj(args.out, mesh)
    print(f"extracted {len(mesh)} faces")
    return 0


def cmd_fit(args) -> int:
    cfg = _config_section(args.config, "fit")
    fit_cfg = FitConfig(
        lr=_pick(args.lr, cfg, "lr", 0.01),
        iters=int(_pick(args.iters, cfg, "iters", 1000, int)),
        n_samples=int(_pick(args.n_samples, cfg, "n_samples", 50000, int)),
        seed=int(_pick(args.seed, cfg, "seed", 0, int)),
        beta_dim=int(_pick(args.beta_dim, cfg, "beta_dim", 10, int)),
        resample_every=int(_pick(None, cfg, "resample_every", 10, int)),
        yaw_search=bool(args.yaw_search),
    )
    mesh = _require(args.mesh, "carved mesh")
    model = _require(args.model, "body model file")
    pipeline.run_fit(mesh, model, args.out, fit_cfg)
    return 0


def cmd_eval(args) -> int:
    if args.group:
        seq_dirs = sorted(Path(args.group).glob("seq_*"))
        if not seq_dirs:
            raise EvscanUsageError(f"no seq_* directories under {args.group}")
        per_seq = []
        for d in seq_dirs:
            per_seq.append(
                pipeline.run_eval(
                    d / "fit" / "fitted.obj", d / "fit" / "joints.json",
                    args.gt_mesh, args.gt_joints,
                    cd_samples=args.cd_samples,
                )
            )
        out = pipeline.eval_group(per_seq, args.out)
    else:
        out = pipeline.run_eval(
            _require(args.est_mesh, "estimated mesh"),
            _require(args.est_joints, "estimated joints"),
            _require(args.gt_mesh, "GT mesh"),
            _require(args.gt_joints, "GT joints"),
            out_path=args.out,
            cd_samples=args.cd_samples,
            carved_mesh_path=args.carved_mesh,
        )
    print(json.dumps({k: v for k, v in out.items() if not isinstance(v, list)}, indent=2))
    return 0


def cmd_sweep(args) -> int:
    cfg = _config_section(args.config, "sweep")
    if not cfg:
        raise EvscanUsageError(f"config {args.config} has no [sweep] section")
    spec = dict(cfg)
    for key in ("attenuation",):
        if key in spec:
            spec[key] = [v.strip() for v in spec[key].split(",")]
    for key in ("grid_dims", "beta_dim"):
        if key in spec:
            spec[key] = [int(v) for v in spec[key].split(",")]
    for key in ("region_min", "region_max"):
        if key in spec:
            spec[key] = _floats(spec[key])
    if not spec.get("attenuation") and not spec.get("grid_dims") and not spec.get("beta_dim"):
        raise EvscanUsageError("sweep needs at least one axis")
    table = pipeline.run_sweep(spec, args.out)
    print(f"{len(table['rows'])} cells -> {args.out}/sweep.csv")
    return 0


def cmd_pipeline(args) -> int:
    out = Path(args.out)
    rc = cmd_simulate(argparse.Namespace(**{**vars(args), "out": out / "dataset", "manifest": None}))
    if rc:
        return rc
    cfg = _config_section(args.config, "carve")
    provider = ContourProvider(variant="gt-labels")
    pipeline.run_carve(out / "dataset", out / "carve", _carve_config(args, cfg), provider)
    fit_cfg = FitConfig(
        iters=int(args.iters or 1000), n_samples=int(args.n_samples or 50000),
        beta_dim=int(args.beta_dim or 10), seed=int(args.seed or 0),
    )
    pipeline.run_fit(out / "carve" / "mesh.obj", _require(args.model, "body model"), out / "fit", fit_cfg)
    if args.gt_mesh and args.gt_joints:
        result = pipeline.run_eval(
            out / "fit" / "fitted.obj", out / "fit" / "joints.json",
            args.gt_mesh, args.gt_joints, out_path=out / "metrics.json",
            carved_mesh_path=out / "carve" / "mesh.obj",
        )
        print(json.dumps(result, indent=2))
    return 0


def cmd_make_toy(args) -> int:
    theta = np.zeros(72)
    if args.pose == "a":
        # A-pose: arms lowered ~50 degrees at the shoulders
        theta[3 * 16 + 2] = -0.9
        theta[3 * 17 + 2] = 0.9
    elif args.pose == "bent":
        theta[3 * 18 + 1] = -0.6  # elbows
        theta[3 * 19 + 1] = 0.6
        theta[3 * 4] = 0.3  # left knee
    elif args.pose != "t":
        raise EvscanUsageError(f"unknown pose {args.pose!r} (t, a, bent)")
    if args.theta:
        vals = _floats(args.theta)
        if len(vals) != 72:
            raise EvscanUsageError("--theta wants 72 comma-separated values")
        theta = np.array(vals)
    beta = np.zeros(10)
    if args.beta:
        vals = _floats(args.beta)
        if len(vals) > 10:
            raise EvscanUsageError("--beta wants at most 10 values")
        beta[: len(vals)] = vals
    pipeline.make_toy_subject(args.out, theta=theta, beta=beta)
    print(f"toy subject written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="evscan", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="render a dataset of events/labels/depth")
    s.add_argument("--config")
    s.add_argument("--manifest", help="reproduce a previous run from its manifest")
    s.add_argument("--mesh")
    s.add_argument("--out", required=True)
    s.add_argument("--width", type=int)
    s.add_argument("--height", type=int)
    s.add_argument("--contrast-C", dest="contrast_c", type=float)
    s.add_argument("--sample-rate", dest="sample_rate", type=float)
    s.add_argument("--orbit-radius", dest="orbit_radius", type=float)
    s.add_argument("--orbit-loops", dest="orbit_loops", type=float)
    s.add_argument("--duration", type=float)
    s.add_argument("--elev-amplitude", dest="elev_amplitude", type=float)
    s.add_argument("--jitter", type=float)
    s.add_argument("--speed-mult", dest="speed_mult", type=float)
    s.add_argument("--illum-scale", dest="illum_scale", type=float)
    s.add_argument("--illum-scales", dest="illum_scales", help="comma list; one sequence each")
    s.add_argument("--noise-rate", dest="noise_rate", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--frames", action="store_true")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("filter", help="select contour events")
    s.add_argument("--events", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--provider", default="gt-labels",
                   choices=["gt-labels", "probability-file", "density-heuristic"])
    s.add_argument("--labels")
    s.add_argument("--probabilities")
    s.add_argument("--threshold", type=float, default=0.5)
    s.add_argument("--quantile", type=float, default=0.5)
    s.set_defaults(func=cmd_filter)

    s = sub.add_parser("carve", help="contour filter + accumulate + prune + mesh")
    s.add_argument("--config")
    s.add_argument("--dataset", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--provider", default="gt-labels",
                   choices=["gt-labels", "probability-file", "density-heuristic"])
    s.add_argument("--probabilities")
    s.add_argument("--threshold", type=float, default=0.5)
    s.add_argument("--attenuation", choices=["none", "linear", "inverse"])
    s.add_argument("--r0", type=float)
    s.add_argument("--grid-dims", dest="grid_dims", type=int)
    s.add_argument("--tau", type=float)
    s.add_argument("--region", help="x0,y0,z0,x1,y1,z1 bounding region")
    s.set_defaults(func=cmd_carve)

    s = sub.add_parser("mesh", help="marching cubes on an occupancy grid")
    s.add_argument("--occupancy", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--iso", type=float, default=0.5)
    s.add_argument("--keep-debris", action="store_true")
    s.set_defaults(func=cmd_mesh)

    s = sub.add_parser("fit", help="fit the body model to a carved mesh")
    s.add_argument("--config")
    s.add_argument("--mesh", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--lr", type=float)
    s.add_argument("--iters", type=int)
    s.add_argument("--n-samples", dest="n_samples", type=int)
    s.add_argument("--beta-dim", dest="beta_dim", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--yaw-search", action="store_true")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("eval", help="PEL-MPJPE and Chamfer Distance")
    s.add_argument("--est-mesh", dest="est_mesh")
    s.add_argument("--est-joints", dest="est_joints")
    s.add_argument("--carved-mesh", dest="carved_mesh")
    s.add_argument("--gt-mesh", dest="gt_mesh", required=True)
    s.add_argument("--gt-joints", dest="gt_joints", required=True)
    s.add_argument("--group", help="directory of seq_* runs to average")
    s.add_argument("--cd-samples", dest="cd_samples", type=int, default=200000)
    s.add_argument("--out")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="cartesian ablation/sensitivity sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("pipeline", help="simulate + carve + fit (+ eval)")
    s.add_argument("--config")
    s.add_argument("--mesh")
    s.add_argument("--model", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--gt-mesh", dest="gt_mesh")
    s.add_argument("--gt-joints", dest="gt_joints")
    s.add_argument("--width", type=int)
    s.add_argument("--height", type=int)
    s.add_argument("--contrast-C", dest="contrast_c", type=float)
    s.add_argument("--sample-rate", dest="sample_rate", type=float)
    s.add_argument("--orbit-radius", dest="orbit_radius", type=float)
    s.add_argument("--orbit-loops", dest="orbit_loops", type=float)
    s.add_argument("--duration", type=float)
    s.add_argument("--elev-amplitude", dest="elev_amplitude", type=float)
    s.add_argument("--jitter", type=float)
    s.add_argument("--speed-mult", dest="speed_mult", type=float)
    s.add_argument("--illum-scale", dest="illum_scale", type=float)
    s.add_argument("--noise-rate", dest="noise_rate", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--attenuation", choices=["none", "linear", "inverse"])
    s.add_argument("--r0", type=float)
    s.add_argument("--grid-dims", dest="grid_dims", type=int)
    s.add_argument("--tau", type=float)
    s.add_argument("--region")
    s.add_argument("--iters", type=int)
    s.add_argument("--n-samples", dest="n_samples", type=int)
    s.add_argument("--beta-dim", dest="beta_dim", type=int)
    s.set_defaults(func=cmd_pipeline, illum_scales=None, frames=False, manifest=None)

    s = sub.add_parser("make-toy", help="write the toy subject (OBJ + model + GT joints)")
    s.add_argument("--out", required=True)
    s.add_argument("--pose", default="t", help="t | a | bent")
    s.add_argument("--theta", help="72 comma-separated axis-angle values")
    s.add_argument("--beta", help="up to 10 comma-separated shape values")
    s.set_defaults(func=cmd_make_toy)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EvscanUsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (InputError, LoadError, FitDivergenceError, FileNotFoundError, OSError) as e:
        print(f"error [{args.command}]: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
