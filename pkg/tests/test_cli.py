"""CLI and pipeline-stage integration: small end-to-end runs, manifests,
restartability, exit codes."""

import json
from pathlib import Path

import numpy as np
import pytest

from evscan import io as evio
from evscan.cli import main


@pytest.fixture(scope="module")
def toy_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("toy")
    assert main(["make-toy", "--out", str(d), "--pose", "bent"]) == 0
    return d


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory, toy_dir):
    d = tmp_path_factory.mktemp("dataset")
    rc = main([
        "simulate", "--mesh", str(toy_dir / "subject.obj"), "--out", str(d),
        "--width", "64", "--height", "48",
        "--contrast-C", "0.1", "--sample-rate", "240",
        "--orbit-radius", "1.3", "--duration", "6.0",
    ])
    assert rc == 0
    return d


class TestMakeToy:
    def test_outputs_exist(self, toy_dir):
        for name in ("subject.obj", "model.evm1", "gt_joints.json", "manifest.json"):
            assert (toy_dir / name).exists()

    def test_gt_joints_has_names(self, toy_dir):
        d = json.loads((toy_dir / "gt_joints.json").read_text())
        assert len(d["names"]) == 24
        assert len(d["positions"]) == 24


class TestSimulate:
    def test_dataset_layout(self, dataset_dir):
        assert (dataset_dir / "events.evc").exists()
        assert (dataset_dir / "labels.evl").exists()
        assert (dataset_dir / "trajectory.csv").exists()
        assert (dataset_dir / "depth" / "depth_000000.pfm").exists()
        manifest = json.loads((dataset_dir / "manifest.json").read_text())
        assert manifest["n_events"] > 0

    def test_missing_mesh_is_usage_error(self, tmp_path):
        rc = main(["simulate", "--mesh", str(tmp_path / "no.obj"), "--out", str(tmp_path / "o")])
        assert rc == 2

    def test_zero_loop_trajectory_rejected(self, toy_dir, tmp_path):
        rc = main([
            "simulate", "--mesh", str(toy_dir / "subject.obj"),
            "--out", str(tmp_path / "o"), "--orbit-loops", "0",
        ])
        assert rc == 2

    def test_manifest_reproduces_bitwise(self, dataset_dir, tmp_path):
        out2 = tmp_path / "repro"
        rc = main(["simulate", "--manifest", str(dataset_dir / "manifest.json"), "--out", str(out2)])
        assert rc == 0
        a = (dataset_dir / "events.evc").read_bytes()
        b = (out2 / "events.evc").read_bytes()
        assert a == b
        assert (dataset_dir / "labels.evl").read_bytes() == (out2 / "labels.evl").read_bytes()


class TestFilter:
    def test_gt_filter(self, dataset_dir, tmp_path):
        out = tmp_path / "contour.evc"
        rc = main([
            "filter", "--events", str(dataset_dir / "events.evc"),
            "--labels", str(dataset_dir / "labels.evl"), "--out", str(out),
        ])
        assert rc == 0
        events = evio.load_events(out)
        labels = evio.load_labels(dataset_dir / "labels.evl")
        assert len(events) == int(labels.sum())


@pytest.fixture(scope="module")
def carve_dir(tmp_path_factory, dataset_dir):
    d = tmp_path_factory.mktemp("carve")
    rc = main([
        "carve", "--dataset", str(dataset_dir), "--out", str(d),
        "--grid-dims", "96", "--attenuation", "inverse",
    ])
    assert rc == 0
    return d


class TestCarve:
    def test_outputs(self, carve_dir):
        assert (carve_dir / "weights.evg").exists()
        assert (carve_dir / "occupancy.evg").exists()
        assert (carve_dir / "mesh.obj").exists()
        manifest = json.loads((carve_dir / "manifest.json").read_text())
        assert manifest["attenuation"]["variant"] == "inverse"
        assert manifest["grid"]["dims"] == [96, 96, 96]

    def test_mesh_subcommand_restarts_from_grid(self, carve_dir, tmp_path):
        out = tmp_path / "again.obj"
        rc = main(["mesh", "--occupancy", str(carve_dir / "occupancy.evg"), "--out", str(out)])
        assert rc == 0
        assert evio.load_obj(out).vertices.shape[0] > 0


@pytest.fixture(scope="module")
def fit_dir(tmp_path_factory, carve_dir, toy_dir):
    d = tmp_path_factory.mktemp("fit")
    rc = main([
        "fit", "--mesh", str(carve_dir / "mesh.obj"), "--model", str(toy_dir / "model.evm1"),
        "--out", str(d), "--iters", "40", "--n-samples", "1500",
    ])
    assert rc == 0
    return d


class TestFit:
    def test_outputs(self, fit_dir):
        result = json.loads((fit_dir / "result.json").read_text())
        assert len(result["loss_trace"]) == 40
        assert (fit_dir / "fitted.obj").exists()
        joints = json.loads((fit_dir / "joints.json").read_text())
        assert len(joints["positions"]) == 24

    def test_missing_model_exit_2(self, carve_dir, tmp_path):
        rc = main([
            "fit", "--mesh", str(carve_dir / "mesh.obj"),
            "--model", str(tmp_path / "nope.evm1"), "--out", str(tmp_path / "f"),
        ])
        assert rc == 2

    def test_loss_trace_reproducible(self, carve_dir, toy_dir, tmp_path):
        args = [
            "fit", "--mesh", str(carve_dir / "mesh.obj"), "--model", str(toy_dir / "model.evm1"),
            "--iters", "15", "--n-samples", "800",
        ]
        assert main(args + ["--out", str(tmp_path / "f1")]) == 0
        assert main(args + ["--out", str(tmp_path / "f2")]) == 0
        t1 = json.loads((tmp_path / "f1" / "result.json").read_text())["loss_trace"]
        t2 = json.loads((tmp_path / "f2" / "result.json").read_text())["loss_trace"]
        assert t1 == t2


class TestEval:
    def test_self_eval_zero(self, toy_dir, tmp_path):
        out = tmp_path / "metrics.json"
        rc = main([
            "eval", "--est-mesh", str(toy_dir / "subject.obj"),
            "--est-joints", str(toy_dir / "gt_joints.json"),
            "--gt-mesh", str(toy_dir / "subject.obj"),
            "--gt-joints", str(toy_dir / "gt_joints.json"),
            "--cd-samples", "5000", "--out", str(out),
        ])
        assert rc == 0
        m = json.loads(out.read_text())
        assert m["pel_mpjpe_mm"] == 0.0
        assert m["cd_mm2"] == 0.0

    def test_fit_eval(self, fit_dir, toy_dir, tmp_path):
        rc = main([
            "eval", "--est-mesh", str(fit_dir / "fitted.obj"),
            "--est-joints", str(fit_dir / "joints.json"),
            "--gt-mesh", str(toy_dir / "subject.obj"),
            "--gt-joints", str(toy_dir / "gt_joints.json"),
            "--cd-samples", "5000",
        ])
        assert rc == 0

    def test_mismatched_joint_names_rejected(self, toy_dir, tmp_path):
        bad = tmp_path / "bad_joints.json"
        d = json.loads((toy_dir / "gt_joints.json").read_text())
        d["names"] = list(reversed(d["names"]))
        bad.write_text(json.dumps(d))
        rc = main([
            "eval", "--est-mesh", str(toy_dir / "subject.obj"),
            "--est-joints", str(bad),
            "--gt-mesh", str(toy_dir / "subject.obj"),
            "--gt-joints", str(toy_dir / "gt_joints.json"),
        ])
        assert rc == 1


class TestDensityProvider:
    def test_density_filter_runs(self, dataset_dir, tmp_path):
        out = tmp_path / "dens.evc"
        rc = main([
            "filter", "--events", str(dataset_dir / "events.evc"),
            "--provider", "density-heuristic", "--out", str(out),
        ])
        assert rc == 0
        assert len(evio.load_events(out)) > 0
