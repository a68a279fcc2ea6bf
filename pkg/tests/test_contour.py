"""Contour-event selection: GT labels, probability files, density heuristic."""

import numpy as np
import pytest

from evscan import io as evio
from evscan.contour import ContourProvider, apply_provider, filter_density, filter_gt, filter_probabilities
from evscan.errors import InputError
from evscan.geometry import EventStream


def stream(xs, ys, ts=None, width=32, height=32):
    n = len(xs)
    ts = np.arange(n, dtype=np.float64) if ts is None else np.asarray(ts, float)
    return EventStream(ts, xs, ys, np.ones(n, dtype=np.int8), width, height)


class TestFilterGt:
    def test_all_false(self):
        ev = stream([1, 2, 3], [1, 1, 1])
        assert len(filter_gt(ev, np.zeros(3, bool))) == 0

    def test_all_true_identity(self):
        ev = stream([1, 2, 3], [1, 1, 1])
        out = filter_gt(ev, np.ones(3, bool))
        np.testing.assert_array_equal(out.x, ev.x)
        np.testing.assert_array_equal(out.t, ev.t)

    def test_alternating(self):
        ev = stream(list(range(10)), [0] * 10)
        out = filter_gt(ev, np.arange(10) % 2 == 0)
        assert len(out) == 5
        assert out.x.tolist() == [0, 2, 4, 6, 8]  # original order

    def test_length_mismatch(self):
        with pytest.raises(InputError):
            filter_gt(stream([1], [1]), np.zeros(2, bool))


class TestFilterProbabilities:
    def test_threshold_zero_keeps_all(self):
        ev = stream([1, 2, 3], [0, 0, 0])
        assert len(filter_probabilities(ev, [0.0, 0.5, 1.0], threshold=0.0)) == 3

    def test_above_one_keeps_none(self):
        ev = stream([1, 2, 3], [0, 0, 0])
        assert len(filter_probabilities(ev, [0.0, 0.5, 1.0], threshold=1.0 + 1e-9)) == 0

    def test_half_threshold(self):
        ev = stream([1, 2, 3], [0, 0, 0])
        out = filter_probabilities(ev, [0.2, 0.7, 0.5], threshold=0.5)
        assert out.x.tolist() == [2, 3]

    def test_count_mismatch(self):
        with pytest.raises(InputError):
            filter_probabilities(stream([1], [1]), [0.5, 0.5])

    def test_out_of_range(self):
        with pytest.raises(InputError):
            filter_probabilities(stream([1, 2], [1, 1]), [0.5, 1.5])

    def test_from_file(self, tmp_path):
        ev = stream([1, 2, 3, 4], [0, 0, 0, 0])
        evio.save_probabilities(tmp_path / "p.evp", np.array([0.9, 0.1, 0.6, 0.4]))
        out = filter_probabilities(ev, tmp_path / "p.evp", threshold=0.5)
        assert out.x.tolist() == [1, 3]


def brute_force_density(ev, radius):
    counts = np.empty(len(ev), dtype=np.int64)
    for i in range(len(ev)):
        counts[i] = np.sum(
            (np.abs(ev.x.astype(int) - int(ev.x[i])) <= radius)
            & (np.abs(ev.y.astype(int) - int(ev.y[i])) <= radius)
        )
    return counts


class TestFilterDensity:
    def test_quantile_zero_keeps_all(self):
        rng = np.random.default_rng(0)
        ev = stream(rng.integers(0, 32, 50), rng.integers(0, 32, 50))
        assert len(filter_density(ev, window=100, radius=3, quantile=0.0)) == 50

    def test_isolated_event_dropped(self):
        # dense ring of 99 events plus one isolated outlier
        angles = np.linspace(0, 2 * np.pi, 99, endpoint=False)
        xs = (16 + 6 * np.cos(angles)).astype(int)
        ys = (16 + 6 * np.sin(angles)).astype(int)
        xs = np.append(xs, 0)
        ys = np.append(ys, 0)
        ev = stream(xs, ys)
        out = filter_density(ev, window=100, radius=3, quantile=0.9)
        kept_pixels = set(zip(out.x.tolist(), out.y.tolist()))
        assert (0, 0) not in kept_pixels
        # oracle agreement: kept events are exactly those at/above the quantile
        counts = brute_force_density(ev, 3)
        thresh = np.quantile(counts, 0.9)
        expect = counts >= thresh
        assert len(out) == expect.sum()

    def test_determinism(self):
        rng = np.random.default_rng(7)
        ev = stream(rng.integers(0, 32, 200), rng.integers(0, 32, 200))
        a = filter_density(ev, window=64, radius=2, quantile=0.5)
        b = filter_density(ev, window=64, radius=2, quantile=0.5)
        np.testing.assert_array_equal(a.t, b.t)
        np.testing.assert_array_equal(a.x, b.x)

    def test_box_counts_match_brute_force(self):
        rng = np.random.default_rng(3)
        ev = stream(rng.integers(0, 32, 300), rng.integers(0, 32, 300))
        from evscan.contour import _box_counts

        counts = _box_counts(ev.x, ev.y, 32, 32, 3)
        np.testing.assert_array_equal(counts, brute_force_density(ev, 3))


class TestProvider:
    def test_unknown_variant(self):
        with pytest.raises(InputError):
            ContourProvider(variant="magic")

    def test_gt_dispatch(self):
        ev = stream([1, 2], [0, 0])
        out = apply_provider(ev, ContourProvider("gt-labels"), labels=np.array([True, False]))
        assert out.x.tolist() == [1]
