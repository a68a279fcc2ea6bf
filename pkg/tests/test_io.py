"""Round trips and validation for the artifact file formats."""

import numpy as np
import pytest

from evscan import io as evio
from evscan.errors import LoadError
from evscan.geometry import EventStream, Trajectory, TriMesh, VoxelGrid, make_orbit
from evscan.shapes import make_icosphere


def make_stream(n=100, seed=0, width=64, height=48):
    rng = np.random.default_rng(seed)
    t = np.sort(rng.uniform(0, 5, n))
    return EventStream(
        t,
        rng.integers(0, width, n),
        rng.integers(0, height, n),
        np.where(rng.random(n) < 0.5, 1, -1),
        width,
        height,
    )


class TestEventFile:
    def test_round_trip(self, tmp_path):
        ev = make_stream(257)
        evio.save_events(tmp_path / "e.evc", ev)
        back = evio.load_events(tmp_path / "e.evc")
        np.testing.assert_array_equal(back.t, ev.t)
        np.testing.assert_array_equal(back.x, ev.x)
        np.testing.assert_array_equal(back.y, ev.y)
        np.testing.assert_array_equal(back.p, ev.p)
        assert (back.width, back.height) == (64, 48)

    def test_header(self, tmp_path):
        ev = make_stream(3)
        evio.save_events(tmp_path / "e.evc", ev)
        raw = (tmp_path / "e.evc").read_bytes()
        assert raw[:4] == b"EVC1"
        assert len(raw) == 16 + 3 * 13  # header + packed records

    def test_bad_magic(self, tmp_path):
        (tmp_path / "bad.evc").write_bytes(b"NOPE" + b"\0" * 12)
        with pytest.raises(LoadError):
            evio.load_events(tmp_path / "bad.evc")

    def test_csv_fallback(self, tmp_path):
        ev = make_stream(41)
        evio.save_events_csv(tmp_path / "e.csv", ev)
        back = evio.load_events(tmp_path / "e.csv")
        np.testing.assert_allclose(back.t, ev.t, atol=1e-9)
        np.testing.assert_array_equal(back.x, ev.x)
        np.testing.assert_array_equal(back.p, ev.p)


class TestLabelAndProbabilityFiles:
    def test_labels_round_trip(self, tmp_path):
        labels = np.random.default_rng(1).random(99) < 0.3
        evio.save_labels(tmp_path / "l.evl", labels, 64, 48)
        back = evio.load_labels(tmp_path / "l.evl")
        np.testing.assert_array_equal(back, labels)

    def test_probability_round_trip(self, tmp_path):
        probs = np.random.default_rng(2).random(77)
        evio.save_probabilities(tmp_path / "p.evp", probs)
        back = evio.load_probabilities(tmp_path / "p.evp")
        np.testing.assert_allclose(back, probs, atol=1e-7)
        raw = (tmp_path / "p.evp").read_bytes()
        assert raw[:4] == b"EVP1"
        assert len(raw) == 12 + 77 * 4

    def test_probability_range_checked(self, tmp_path):
        from evscan.errors import InputError

        with pytest.raises(InputError):
            evio.save_probabilities(tmp_path / "p.evp", np.array([0.5, 1.5]))


class TestGridFile:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        grid = VoxelGrid(np.array([-1.0, 0.5, 2.0]), 0.125, (4, 5, 6), rng.random(120))
        evio.save_grid(tmp_path / "g.evg", grid)
        back = evio.load_grid(tmp_path / "g.evg")
        np.testing.assert_array_equal(back.origin, grid.origin)
        assert back.pitch == grid.pitch
        assert back.dims == grid.dims
        np.testing.assert_allclose(back.cells, grid.cells, atol=1e-7)


class TestTrajectoryFile:
    def test_round_trip(self, tmp_path):
        traj = make_orbit(radius=1.2, loops=2.0, duration=5.0, n_keyframes=37)
        evio.save_trajectory(tmp_path / "t.csv", traj)
        back = evio.load_trajectory(tmp_path / "t.csv")
        np.testing.assert_allclose(back.times, traj.times, atol=1e-9)
        np.testing.assert_allclose(back.centers, traj.centers, rtol=1e-9, atol=1e-10)
        # quaternions match up to sign
        dots = np.abs(np.sum(back.quats * traj.quats, axis=1))
        np.testing.assert_allclose(dots, 1.0, atol=1e-9)

    def test_header_format(self, tmp_path):
        traj = make_orbit(loops=1.0, duration=1.0, n_keyframes=3)
        evio.save_trajectory(tmp_path / "t.csv", traj)
        first = (tmp_path / "t.csv").read_text().splitlines()[0]
        assert first == "t,cx,cy,cz,qw,qx,qy,qz"


class TestObj:
    def test_round_trip(self, tmp_path):
        mesh = make_icosphere(0.3, (0.1, 0.2, 0.3), subdivisions=1)
        evio.save_obj(tmp_path / "m.obj", mesh)
        back = evio.load_obj(tmp_path / "m.obj")
        np.testing.assert_allclose(back.vertices, mesh.vertices, atol=1e-8)
        np.testing.assert_array_equal(back.faces, mesh.faces)

    def test_non_triangle_rejected(self, tmp_path):
        (tmp_path / "q.obj").write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
        with pytest.raises(LoadError):
            evio.load_obj(tmp_path / "q.obj")


class TestImages:
    def test_pfm_round_trip(self, tmp_path):
        img = np.random.default_rng(4).random((7, 9)).astype(np.float32)
        img[2, 3] = np.inf
        evio.save_pfm(tmp_path / "d.pfm", img)
        back = evio.load_pfm(tmp_path / "d.pfm")
        np.testing.assert_array_equal(back, img)

    def test_pgm_round_trip(self, tmp_path):
        img = np.random.default_rng(5).integers(0, 256, (5, 8)).astype(np.uint8)
        evio.save_pgm(tmp_path / "f.pgm", img)
        np.testing.assert_array_equal(evio.load_pgm(tmp_path / "f.pgm"), img)
