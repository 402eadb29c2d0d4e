import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rategames.projections import (project_box, project_floored_l1_ball,
                                   project_l2_ball, project_nonneg_l1_ball)

vectors = st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=6)


class TestNonnegL1Ball:
    def test_single_active_coordinate(self):
        np.testing.assert_allclose(project_nonneg_l1_ball(np.array([2.0, 0.0]), 1.0),
                                   [1.0, 0.0])

    def test_interior_point_unchanged(self):
        v = np.array([0.2, 0.3])
        np.testing.assert_array_equal(project_nonneg_l1_ball(v, 1.0), v)

    def test_matches_face_grid_minimizer(self):
        # clipped vector exceeds the ball, so the solution lies on the face
        # {x >= 0, sum x = 1}; brute-force that face at step 1e-3
        v = np.array([1.5, 0.5, -1.0])
        got = project_nonneg_l1_ball(v, 1.0)
        grid = np.arange(0.0, 1.0 + 1e-9, 1e-3)
        best, best_d = None, np.inf
        for x1 in grid:
            x2 = np.arange(0.0, 1.0 - x1 + 1e-9, 1e-3)
            x3 = 1.0 - x1 - x2
            d = (x1 - v[0]) ** 2 + (x2 - v[1]) ** 2 + (x3 - v[2]) ** 2
            i = int(np.argmin(d))
            if d[i] < best_d:
                best_d, best = d[i], np.array([x1, x2[i], x3[i]])
        assert np.linalg.norm(got - best) <= 2e-3

    @given(vectors, st.floats(0.1, 3.0))
    @settings(max_examples=200, deadline=None)
    def test_membership_and_idempotence(self, v, radius):
        x = project_nonneg_l1_ball(np.array(v), radius)
        assert np.all(x >= 0)
        assert x.sum() <= radius + 1e-9
        np.testing.assert_allclose(project_nonneg_l1_ball(x, radius), x, atol=1e-12)

    @given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=2, max_size=2),
           st.floats(0.2, 2.0))
    @settings(max_examples=60, deadline=None)
    def test_2d_grid_optimality(self, v, radius):
        v = np.array(v)
        got = project_nonneg_l1_ball(v, radius)
        axis = np.arange(0.0, radius + 1e-9, 1e-3)
        X1, X2 = np.meshgrid(axis, axis)
        ok = X1 + X2 <= radius + 1e-12
        d = (X1 - v[0]) ** 2 + (X2 - v[1]) ** 2
        d[~ok] = np.inf
        i = np.unravel_index(np.argmin(d), d.shape)
        best = np.array([X1[i], X2[i]])
        assert np.linalg.norm(got - best) <= 2e-3


class TestL2Ball:
    def test_radial_scaling(self):
        w = np.array([1.2, 1.6])  # norm 2
        np.testing.assert_allclose(project_l2_ball(w, 1.0), w / 2.0)

    def test_zero_fixed(self):
        np.testing.assert_array_equal(project_l2_ball(np.zeros(3), 1.0), np.zeros(3))

    @given(vectors, st.floats(0.1, 3.0))
    @settings(max_examples=200, deadline=None)
    def test_norm_bound_and_colinearity(self, v, radius):
        v = np.array(v)
        x = project_l2_ball(v, radius)
        assert np.linalg.norm(x) <= radius + 1e-12
        # colinear with the input: cross terms vanish
        assert abs(np.linalg.norm(v) * np.linalg.norm(x) - abs(v @ x)) <= 1e-9
        np.testing.assert_allclose(project_l2_ball(x, radius), x, atol=1e-12)


class TestBox:
    def test_clamp(self):
        np.testing.assert_array_equal(
            project_box(np.array([-1.0, 0.5, 2.0]), 0.0, 1.0), [0.0, 0.5, 1.0])

    def test_interior_unchanged(self):
        v = np.array([0.25, 0.75])
        np.testing.assert_array_equal(project_box(v, 0.0, 1.0), v)

    @given(vectors)
    @settings(max_examples=100, deadline=None)
    def test_idempotence(self, v):
        x = project_box(np.array(v), -1.0, 1.0)
        np.testing.assert_array_equal(project_box(x, -1.0, 1.0), x)

    def test_bad_bounds(self):
        with pytest.raises(ValueError):
            project_box(np.zeros(2), 1.0, 0.0)


class TestFlooredBall:
    def test_floor_respected(self):
        x = project_floored_l1_ball(np.zeros(3), 2.0, np.array([0.1, 0.0, 0.0]))
        assert x[0] >= 0.1
        assert x.sum() <= 2.0 + 1e-9

    def test_floor_mass_exceeds_radius(self):
        with pytest.raises(ValueError):
            project_floored_l1_ball(np.zeros(2), 0.1, np.array([0.2, 0.2]))
