import numpy as np
import pytest


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """Tiny simulator dataset with noise so both label classes appear."""
    from evscan.geometry import CameraIntrinsics, make_orbit
    from evscan.simulate import Scene, SimConfig, simulate_events
    from evscan.shapes import make_icosphere
    from evscan import io as evio

    d = tmp_path_factory.mktemp("learner_dataset")
    scene = Scene(make_icosphere(0.3, (0.2, 0.0, 0.05), subdivisions=3))
    cam = CameraIntrinsics(64, 48, 25.0, 25.0, 32.0, 24.0)
    traj = make_orbit(radius=1.0, loops=2.0, duration=8.0, elev_amplitude=0.25,
                      elev_cycles=4, jitter=0.04)
    cfg = SimConfig(contrast_C=0.1, sample_rate=300.0, noise_rate=1.5, seed=5, depth_every=10)
    res = simulate_events(scene, cam, traj, cfg)
    evio.save_events(d / "events.evc", res.events)
    evio.save_labels(d / "labels.evl", res.labels, cam.width, cam.height)
    evio.save_trajectory(d / "trajectory.csv", traj)
    (d / "manifest.json").write_text('{"stage": "simulate"}')
    return d
