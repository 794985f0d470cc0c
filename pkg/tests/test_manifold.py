from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from pytest import mark, raises

from multifield.core.exceptions import (
    ChartSingularityError,
    InputError,
    MetricDegenerateError,
    UnknownCaseError,
    UnsupportedActionError,
)
from multifield.models.manifolds import ManifoldModel, TangentVector, wrap
from multifield.repositories.manifold import manifold_repository
from multifield.services.manifold import manifold_service

angles = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)
polar = st.floats(min_value=0.2, max_value=np.pi - 0.2)


@st.composite
def unit_vectors(draw):
    v = np.array([draw(st.floats(-1.0, 1.0)) for _ in range(3)])
    if np.linalg.norm(v) < 1e-3:
        v = np.array([0.0, 0.0, 1.0])
    return v / np.linalg.norm(v)


class TestRegistry:
    def test_euclidean_tags_created_on_demand(self):
        assert manifold_repository.get("R5").dim == 5
        assert manifold_repository.get("R^2") is manifold_repository.get("R2")

    def test_unknown_tag_lists_known(self):
        with raises(UnknownCaseError) as info:
            manifold_repository.get("T2")
        assert "S2" in info.value.message


class TestDistances:
    """Geodesic distances satisfy the metric axioms on every built-in manifold."""

    @given(angles, angles, angles)
    @settings(max_examples=100, deadline=None)
    def test_circle_arc_is_a_metric(self, a, b, c):
        S1 = manifold_repository.get("S1")
        d_ab = manifold_service.geodesic_distance(S1, a, b)
        d_ba = manifold_service.geodesic_distance(S1, b, a)
        d_ac = manifold_service.geodesic_distance(S1, a, c)
        d_cb = manifold_service.geodesic_distance(S1, c, b)
        assert 0.0 <= d_ab <= np.pi + 1e-12
        assert d_ab == pytest.approx(d_ba, abs=1e-12)
        assert d_ab <= d_ac + d_cb + 1e-12

    @given(unit_vectors(), unit_vectors(), unit_vectors())
    @settings(max_examples=100, deadline=None)
    def test_sphere_triangle_inequality(self, a, b, c):
        S2 = manifold_repository.get("S2:embedded")
        d = lambda p, q: manifold_service.geodesic_distance(S2, p, q)
        assert d(a, b) <= d(a, c) + d(c, b) + 1e-12
        assert d(a, a) == pytest.approx(0.0, abs=1e-7)

    @given(st.lists(st.floats(-1.0, 1.0), min_size=3, max_size=3),
           st.lists(st.floats(-1.0, 1.0), min_size=3, max_size=3))
    @settings(max_examples=50, deadline=None)
    def test_rotation_distance_symmetric(self, a, b):
        SO3 = manifold_repository.get("SO3")
        a, b = np.array(a), np.array(b)
        assert manifold_service.geodesic_distance(SO3, a, b) == pytest.approx(
            manifold_service.geodesic_distance(SO3, b, a), abs=1e-10)

    @given(st.floats(0.0, 1e6))
    def test_bounded_distance_below_one(self, d):
        bounded = float(manifold_service.bounded(d))
        assert 0.0 <= bounded < 1.0
        assert bounded <= d

    def test_bounded_mode(self):
        R1 = manifold_repository.get("R1")
        assert manifold_service.geodesic_distance(R1, 0.0, 3.0, mode="bounded") == pytest.approx(0.75)
        with raises(InputError):
            manifold_service.geodesic_distance(R1, 0.0, 3.0, mode="huge")

    def test_sphere_chart_matches_embedded(self):
        S2 = manifold_repository.get("S2")
        a, b = np.array([0.4, 0.1]), np.array([1.9, 2.5])
        expected = np.arccos(np.clip(S2.to_embedded(a) @ S2.to_embedded(b), -1.0, 1.0))
        assert manifold_service.geodesic_distance(S2, a, b) == pytest.approx(expected, abs=1e-12)

    def test_batched_distance_keeps_shape(self):
        S1 = manifold_repository.get("S1")
        a = np.zeros((4, 5, 1))
        b = np.full((4, 5, 1), 0.5)
        d = manifold_service.geodesic_distance(S1, a, b)
        assert d.shape == (4, 5)
        np.testing.assert_allclose(d, 0.5)

    def test_wrap_range(self):
        values = wrap(np.array([-7.0, -np.pi, 0.0, np.pi, 7.0]))
        assert np.all(values >= -np.pi) and np.all(values < np.pi)


class TestShooting:
    def test_equator_needs_no_correction(self, sphere):
        chart = replace(sphere, tag="S2:shooting", analytic_distance=None)
        d = manifold_service.geodesic_distance(chart, [np.pi / 2, 0.0], [np.pi / 2, 1.0])
        assert d == pytest.approx(1.0, abs=1e-8)

    def test_shooting_matches_closed_form(self, sphere):
        chart = replace(sphere, tag="S2:shooting", analytic_distance=None)
        a, b = np.array([1.0, 0.0]), np.array([1.2, 0.5])
        assert manifold_service.shooting_distance(chart, a, b) == pytest.approx(
            manifold_service.geodesic_distance(sphere, a, b), rel=1e-6)

    def test_coincident_points(self, sphere):
        assert manifold_service.shooting_distance(sphere, np.array([1.0, 1.0]), np.array([1.0, 1.0])) == 0.0


class TestConnection:
    @given(polar, angles)
    @settings(max_examples=30, deadline=None)
    def test_sphere_christoffel_analytic_matches_finite_difference(self, theta, phi):
        S2 = manifold_repository.get("S2")
        nu = np.array([theta, phi])
        analytic = manifold_service.christoffel(S2, nu, method="analytic")
        numeric = manifold_service.christoffel(S2, nu, method="finite-difference")
        np.testing.assert_allclose(numeric, analytic, atol=1e-6)

    def test_christoffel_at_pole_is_singular(self, sphere):
        with raises(ChartSingularityError):
            manifold_service.christoffel(sphere, np.array([0.0, 0.3]))

    def test_unknown_method(self, sphere):
        with raises(InputError):
            manifold_service.christoffel(sphere, np.array([1.0, 0.0]), method="spectral")

    def test_degenerate_metric(self):
        flat = ManifoldModel(tag="degenerate", dim=2, chart_metric=lambda nu: np.zeros(nu.shape[:-1] + (2, 2)))
        with raises(MetricDegenerateError):
            manifold_service.inverse_metric(flat, np.zeros(2))

    def test_covariant_acceleration_on_sphere(self, sphere):
        nu = np.array([np.pi / 4, 0.0])
        acceleration = manifold_service.covariant_acceleration(sphere, nu, np.array([0.0, 1.0]), np.zeros(2))
        assert isinstance(acceleration, TangentVector)
        np.testing.assert_allclose(acceleration.components, [-0.5, 0.0], atol=1e-12)

    def test_covariant_acceleration_flat(self):
        R2 = manifold_repository.get("R2")
        acceleration = manifold_service.covariant_acceleration(R2, np.zeros(2), np.ones(2), np.array([0.5, -1.0]))
        np.testing.assert_allclose(acceleration.components, [0.5, -1.0])

    def test_velocity_at_another_point(self, sphere):
        velocity = TangentVector(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
        with raises(InputError):
            manifold_service.covariant_acceleration(sphere, np.array([1.2, 0.0]), velocity, np.zeros(2))


class TestCurves:
    def test_quarter_equator(self, sphere):
        phi = np.linspace(0.0, np.pi / 2, 50)
        samples = np.stack([np.full_like(phi, np.pi / 2), phi], axis=-1)
        assert manifold_service.curve_length(sphere, samples) == pytest.approx(np.pi / 2, abs=1e-12)

    def test_circle_length_across_the_cut(self, circle):
        samples = wrap(np.array([3.0, 3.2, 3.4]))
        assert manifold_service.curve_length(circle, samples) == pytest.approx(0.4, abs=1e-12)

    def test_single_sample_rejected(self, circle):
        with raises(InputError):
            manifold_service.curve_length(circle, [0.5])


class TestActions:
    def test_interval_has_no_rotation(self):
        interval = manifold_repository.get("I")
        with raises(UnsupportedActionError):
            manifold_service.action_generator(interval, "SO3", [0.0, 0.0, 1.0], [0.5])

    @given(unit_vectors(), unit_vectors())
    @settings(max_examples=50, deadline=None)
    def test_rotation_generator_is_tangent(self, xi, nu):
        S2 = manifold_repository.get("S2:embedded")
        generator = manifold_service.action_generator(S2, "SO3", xi, nu)
        assert generator.components @ nu == pytest.approx(0.0, abs=1e-12)

    def test_flow_about_the_pole(self, director_sphere):
        end = manifold_service.flow(director_sphere, "SO3", [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], np.pi / 2)
        np.testing.assert_allclose(end, [0.0, 1.0, 0.0], atol=1e-4)
        assert np.linalg.norm(end) == pytest.approx(1.0, abs=1e-12)

    def test_circle_flow_wraps(self, circle):
        end = manifold_service.flow(circle, "SO2", [1.0], [3.0], 1.0)
        assert end[0] == pytest.approx(4.0 - 2.0 * np.pi, abs=1e-12)

    @mark.parametrize("tag, group, dim", [("S2:embedded", "SO3", 3), ("S1", "SO2", 1), ("SO3", "SO3", 3)])
    def test_action_matrix_shape(self, tag, group, dim):
        manifold = manifold_repository.get(tag)
        nu = manifold.as_points([1.0, 0.0, 0.0] if manifold.dim == 3 else [0.3])
        assert manifold_service.algebra_dimension(manifold, group) == dim
        assert manifold_service.action_matrix(manifold, group, nu).shape == (manifold.dim, dim)

    def test_rotation_action_jacobian(self, director_sphere):
        xi = np.array([0.3, -0.2, 0.5])
        jacobian = manifold_service.action_jacobian(director_sphere, "SO3", xi, np.array([0.0, 0.6, 0.8]))
        expected = np.array([[0.0, -xi[2], xi[1]], [xi[2], 0.0, -xi[0]], [-xi[1], xi[0], 0.0]])
        np.testing.assert_allclose(jacobian, expected, atol=1e-8)
