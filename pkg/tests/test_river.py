import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rivertraj.errors import CurvatureError, OffRiverError, RangeError
from rivertraj.geometry import ProjectionFrame
from rivertraj.river import (
    CurvatureFunction,
    RadiiTable,
    RiverAxis,
    RiverModel,
    build_curvature,
    context_length,
    context_window,
)


def straight_axis(start=10.0, vertices=11, spacing=100.0):
    y = np.arange(vertices) * spacing
    return RiverAxis(np.column_stack([np.zeros(vertices), y]), start + np.arange(vertices) * spacing / 1000)


@pytest.fixture
def curved_axis():
    # quarter circle of radius 1 km sampled every 10 m, then a straight
    r = 1000.0
    s = np.arange(0, 1571, 10.0)
    arc = np.column_stack([r - r * np.cos(s / r), r * np.sin(s / r)])
    tail = arc[-1] + np.column_stack([np.arange(1, 51) * 10.0, np.zeros(50)])
    xy = np.vstack([arc, tail])
    seglen = np.hypot(*np.diff(xy, axis=0).T)
    hm = 100.0 + np.concatenate([[0.0], np.cumsum(seglen)]) / 1000
    return RiverAxis(xy, hm)


class TestAxisValidation:
    def test_too_short(self):
        with pytest.raises(ValueError):
            RiverAxis(np.zeros((1, 2)), [0.0])

    def test_non_increasing_hm(self):
        with pytest.raises(ValueError):
            RiverAxis([[0, 0], [0, 1], [0, 2]], [0.0, 0.2, 0.1])

    def test_duplicate_vertices(self):
        with pytest.raises(ValueError):
            RiverAxis([[0, 0], [0, 0], [0, 2]], [0.0, 0.1, 0.2])


class TestHmOf:
    def test_vertex(self):
        axis = RiverAxis([[0, 0], [0, 100], [0, 200]], [2231.3, 2231.4, 2231.5])
        assert axis.hm_of((0, 100)) == pytest.approx(2231.4, abs=1e-12)

    def test_midpoint(self):
        axis = straight_axis()
        assert axis.hm_of((0, 50)) == pytest.approx(10.05, abs=1e-12)

    def test_lateral_offset(self):
        axis = straight_axis()
        assert axis.hm_of((50, 0)) == pytest.approx(10.0, abs=1e-12)
        assert axis.hm_of((-50, 300)) == pytest.approx(10.3, abs=1e-12)

    def test_off_river(self):
        axis = straight_axis()
        with pytest.raises(OffRiverError):
            axis.hm_of((2500, 500))

    def test_brute_force_projection(self, curved_axis):
        rng = np.random.default_rng(4)
        idx = rng.integers(0, len(curved_axis.xy), 200)
        pts = curved_axis.xy[idx] + rng.normal(0, 80, (200, 2))
        h, dist = curved_axis.hm_of_array(pts)
        # dense resampling oracle: nearest of 0.05 m spaced axis points
        for p, hp, dp in zip(pts[:20], h[:20], dist[:20]):
            hh = np.append(np.arange(curved_axis.hm_min, curved_axis.hm_max, 5e-5), curved_axis.hm_max)
            q = curved_axis.axis_points(hh)
            d = np.hypot(q[:, 0] - p[0], q[:, 1] - p[1])
            assert dp == pytest.approx(d.min(), abs=1e-3)
            assert hp == pytest.approx(hh[np.argmin(d)], abs=1e-4)


class TestAxisPoint:
    def test_vertex(self):
        axis = straight_axis()
        assert axis.axis_point(10.3) == pytest.approx((0.0, 300.0))

    def test_interpolated(self):
        assert straight_axis().axis_point(10.05) == pytest.approx((0.0, 50.0))

    def test_out_of_range(self):
        axis = straight_axis()
        with pytest.raises(RangeError):
            axis.axis_point(9.99)
        with pytest.raises(RangeError):
            axis.axis_point(11.01)

    @settings(max_examples=200)
    @given(st.floats(0, 1))
    def test_round_trip(self, u):
        axis = straight_axis()
        h = axis.hm_min + u * (axis.hm_max - axis.hm_min)
        assert axis.hm_of(axis.axis_point(h)) == pytest.approx(h, abs=1e-6)

    def test_round_trip_curved(self, curved_axis):
        h = np.linspace(curved_axis.hm_min, curved_axis.hm_max, 3001)
        back, dist = curved_axis.hm_of_array(curved_axis.axis_points(h))
        np.testing.assert_allclose(back, h, atol=1e-6)
        assert dist.max() < 1e-6


class TestCurvature:
    def test_single_radius(self):
        cv = build_curvature(RadiiTable([10.0], [500.0]))
        assert cv(10.0) == pytest.approx(0.002)

    def test_straight_is_zero(self):
        cv = build_curvature(RadiiTable([10.0, 10.1], [math.inf, -math.inf]))
        assert cv(10.0) == 0.0
        assert cv(10.05) == 0.0

    def test_linear_interpolation(self):
        cv = build_curvature(RadiiTable([10.0, 10.1], [500.0, 1000.0]))
        assert cv(10.05) == pytest.approx(0.0015, abs=1e-15)

    def test_sign_kept(self):
        cv = build_curvature(RadiiTable([1.0, 1.1], [-400.0, 400.0]))
        assert cv(1.0) == pytest.approx(-0.0025)
        assert cv(1.1) == pytest.approx(0.0025)

    def test_empty(self):
        with pytest.raises(CurvatureError):
            build_curvature(RadiiTable([], []))

    def test_radius_floor(self):
        with pytest.raises(ValueError):
            RadiiTable([1.0], [99.0])

    @given(
        st.lists(
            st.one_of(st.just(math.inf), st.floats(100, 5000), st.floats(-5000, -100)),
            min_size=2,
            max_size=30,
        ),
        st.floats(0, 1),
    )
    def test_bounds_and_sample_values(self, radii, u):
        hm = np.round(np.arange(len(radii)) * 0.1, 1)
        cv = build_curvature(RadiiTable(hm, radii))
        inv = 1.0 / np.array(radii)
        np.testing.assert_array_equal(cv(hm), inv)
        h = u * hm[-1]
        i = min(int(h / 0.1), len(radii) - 2)
        v = cv(h)
        assert min(inv[i], inv[i + 1]) - 1e-18 <= v <= max(inv[i], inv[i + 1]) + 1e-18
        assert abs(v) <= np.abs(inv).max() + 1e-18
        assert abs(v) <= 0.01


class TestContextWindow:
    @pytest.mark.parametrize("n, m, length", [(10, 15, 116), (5, 15, 93), (10, 30, 185)])
    def test_lengths(self, n, m, length):
        assert context_length(n, m) == length
        cv = CurvatureFunction(np.array([0.0, 100.0]), np.array([0.0, 0.0]))
        assert len(context_window(1.0, n, m, cv)) == length

    @given(st.integers(1, 60), st.integers(1, 60))
    def test_length_formula(self, n, m):
        # exact rational arithmetic: 7.7 * 60 / 100 = 462 / 100
        assert context_length(n, m) == math.floor(7.7 * (n + m) * 60 / 100 + 1e-9) + 1

    def test_values_every_hectometer(self):
        hm = np.round(np.arange(0, 50.01, 0.1), 1)
        cv = CurvatureFunction(hm, np.sin(hm))
        w = context_window(3.0, 5, 15, cv)
        np.testing.assert_allclose(w, np.sin(3.0 + 0.1 * np.arange(93)), atol=1e-12)

    def test_clamped_at_axis_end(self):
        cv = CurvatureFunction(np.array([0.0, 1.0, 2.0]), np.array([0.0, 0.001, 0.003]))
        w = context_window(1.5, 5, 15, cv)
        assert len(w) == 93
        assert w[0] == pytest.approx(0.002)
        assert np.all(w[5:] == 0.003)

    def test_start_out_of_range(self):
        cv = CurvatureFunction(np.array([0.0, 1.0]), np.array([0.0, 0.0]))
        with pytest.raises(RangeError):
            context_window(1.2, 5, 15, cv)
        with pytest.raises(RangeError):
            context_window(-0.1, 5, 15, cv)


def test_save_load_round_trip(tmp_path):
    axis = RiverAxis([[0, 0], [0, 100], [30, 195]], [5.0, 5.1, 5.2])
    radii = RadiiTable([5.0, 5.1, 5.2], [math.inf, 800.0, -350.0])
    frame = ProjectionFrame(48.75, 12.95)
    model = RiverModel(axis, radii, frame)
    model.save(tmp_path)
    back = RiverModel.load(tmp_path, frame=frame)
    np.testing.assert_allclose(back.axis.xy, axis.xy, atol=1e-6)
    np.testing.assert_array_equal(back.axis.hm, axis.hm)
    np.testing.assert_array_equal(back.radii.radius, radii.radius)
    assert back.curvature(5.1) == pytest.approx(1 / 800)
