"""End-to-end interop: learned probabilities drive the primary pipeline and
land within a factor of the GT-label run (the paper-style trade-off check)."""

import numpy as np
import pytest

from evscan import io as evio
from evscan.carve import AttenuationMode, CarveConfig
from evscan.contour import ContourProvider
from evscan.fit import FitConfig
from evscan.geometry import CameraIntrinsics
from evscan.metrics import chamfer_distance
from evscan.pipeline import make_toy_subject, run_carve, run_fit, run_simulate
from evscan.simulate import SimConfig

from evlearner.infer import infer
from evlearner.train import TrainConfig, train


@pytest.fixture(scope="module")
def toy_pipeline(tmp_path_factory):
    """Simulated toy-body dataset plus a trained classifier."""
    root = tmp_path_factory.mktemp("interop")
    make_toy_subject(root / "toy", theta=_bent_pose())
    cam = CameraIntrinsics(96, 72, 37.5, 37.5, 48.0, 36.0)
    sim = SimConfig(contrast_C=0.06, sample_rate=400.0, seed=2, noise_rate=1.0)
    orbit = dict(radius=1.3, loops=2.0, duration=12.0, elev_amplitude=0.25,
                 elev_cycles=5, jitter=0.05)
    run_simulate(root / "dataset", root / "toy" / "subject.obj", cam, orbit, sim)

    weights = root / "weights.pt"
    cfg = TrainConfig(epochs=25, lr=2e-3, seed=0, window_events=4000,
                      base_channels=8, max_windows=80)
    train(root / "dataset", weights, cfg, log=lambda *_: None)
    probs_path = root / "probs.evp"
    infer(root / "dataset" / "events.evc", weights, probs_path)
    return root, probs_path


def _bent_pose():
    th = np.zeros(72)
    th[3 * 18 + 1] = -0.5
    th[3 * 19 + 1] = 0.5
    th[3 * 4] = 0.3
    return th


def _branch(root, out, provider):
    carve_cfg = CarveConfig(grid_dims=(128, 128, 128), attenuation=AttenuationMode("inverse"))
    run_carve(root / "dataset", out / "carve", carve_cfg, provider)
    fit_cfg = FitConfig(iters=250, n_samples=8000, seed=0, beta_dim=10)
    run_fit(out / "carve" / "mesh.obj", root / "toy" / "model.evm1", out / "fit", fit_cfg)
    gt_mesh = evio.load_obj(root / "toy" / "subject.obj")
    fitted = evio.load_obj(out / "fit" / "fitted.obj")
    return chamfer_distance(gt_mesh, fitted, n=60000, seed=1)


class TestPipelineEquivalence:
    def test_learned_probabilities_validate(self, toy_pipeline):
        root, probs_path = toy_pipeline
        events = evio.load_events(root / "dataset" / "events.evc")
        probs = evio.load_probabilities(probs_path)
        assert len(probs) == len(events)
        assert probs.min() >= 0.0 and probs.max() <= 1.0
        from evscan.contour import filter_probabilities

        kept = filter_probabilities(events, probs_path, threshold=0.5)
        labels = evio.load_labels(root / "dataset" / "labels.evl")
        # learned selection should broadly agree with GT labels
        agreement = np.mean((probs >= 0.5) == labels)
        assert agreement > 0.8
        assert 0 < len(kept) < len(events)

    def test_cd_within_factor_of_gt_run(self, toy_pipeline):
        root, probs_path = toy_pipeline
        cd_gt = _branch(root, root / "gt_run", ContourProvider("gt-labels"))
        cd_learned = _branch(
            root, root / "learned_run",
            ContourProvider("probability-file", threshold=0.5, path=str(probs_path)),
        )
        print(f"CD gt {cd_gt:.1f} mm2, learned {cd_learned:.1f} mm2, ratio {cd_learned / cd_gt:.2f}")
        assert cd_learned <= 2.5 * cd_gt
