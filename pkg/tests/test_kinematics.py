import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from pytest import raises

from multifield.core.exceptions import InputError, OrientationError, UnsupportedActionError
from multifield.models.body import BodyGrid, MotionState, OrderField, PlacementField
from multifield.models.manifolds import wrap
from multifield.repositories.manifold import manifold_repository
from multifield.services.kinematics import kinematics_service


class TestStencils:
    @given(st.lists(st.floats(-2.0, 2.0), min_size=6, max_size=6))
    @settings(max_examples=30, deadline=None)
    def test_affine_fields_are_differentiated_exactly(self, entries):
        grid = BodyGrid.box([0.0, -1.0], [1.0, 2.0], (5, 7))
        A = np.array(entries[:4]).reshape(2, 2)
        values = grid.coordinates() @ A.T + np.array(entries[4:])
        gradient = kinematics_service.gradient_of(values, grid)
        np.testing.assert_allclose(gradient, np.broadcast_to(A, gradient.shape), atol=1e-11)

    def test_kink_splits_the_stencil(self):
        grid = BodyGrid.box([0.0], [1.0], 11)
        values = np.abs(grid.coordinates() - 0.5)
        gradient = kinematics_service.gradient_of(values, grid, kinks=[(0, 0.5)])[:, 0, 0]
        np.testing.assert_allclose(gradient[:5], -1.0, atol=1e-12)
        np.testing.assert_allclose(gradient[6:], 1.0, atol=1e-12)
        assert gradient[5] == pytest.approx(0.0, abs=1e-12)

    def test_periodic_values_are_unwrapped(self, circle):
        grid = BodyGrid.box([0.0], [1.0], 21)
        values = wrap(3.0 + grid.coordinates())
        gradient = kinematics_service.gradient_of(values, grid, circle)
        np.testing.assert_allclose(gradient, 1.0, atol=1e-10)

    def test_divergence_of_linear_flux(self, square_grid):
        X = square_grid.coordinates()
        tensor = np.stack([X[..., 0], 2.0 * X[..., 1]], axis=-1)[..., None, :]
        divergence = kinematics_service.divergence(tensor, square_grid)
        np.testing.assert_allclose(divergence, 3.0, atol=1e-11)

    def test_values_off_the_grid(self, square_grid):
        with raises(InputError):
            kinematics_service.gradient_of(np.zeros((4, 4)), square_grid)


class TestDeformation:
    def test_two_nodes_are_not_enough(self):
        grid = BodyGrid.box([0.0, 0.0], [1.0, 1.0], (2, 5))
        with raises(InputError):
            kinematics_service.deformation_gradient(PlacementField.identity(grid))

    def test_reflection_is_rejected(self, square_grid):
        placement = PlacementField.from_closure(square_grid, lambda X: X * np.array([-1.0, 1.0]))
        with raises(OrientationError) as info:
            kinematics_service.deformation_gradient(placement)
        assert info.value.exit_code == 2

    def test_rigid_rotation_has_no_strain(self, square_grid):
        angle = 0.4
        Q = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        placement = PlacementField.from_closure(square_grid, lambda X: X @ Q.T + 1.0)
        strain = kinematics_service.strain_measures(kinematics_service.deformation_gradient(placement))
        np.testing.assert_allclose(strain.C, np.broadcast_to(np.eye(2), strain.C.shape), atol=1e-12)
        np.testing.assert_allclose(strain.E, 0.0, atol=1e-12)

    def test_pullback_with_spatial_metric(self):
        F = np.array([[2.0, 0.0], [0.0, 1.0]])
        g = np.array([[1.0, 0.0], [0.0, 3.0]])
        np.testing.assert_allclose(kinematics_service.pullback_metric(F, g), [[4.0, 0.0], [0.0, 3.0]])

    def test_generalized_metric_must_be_positive(self):
        from multifield.core.exceptions import ModelError

        F = np.eye(2)
        hook = lambda F, g, nu, grad_nu: -np.eye(2)
        with raises(ModelError):
            kinematics_service.generalized_metric(F, None, None, None, hook)

    def test_generalized_metric_strain(self):
        hook = lambda F, g, nu, grad_nu: F.T @ F + grad_nu.T @ grad_nu
        result = kinematics_service.generalized_metric(np.eye(2), None, np.zeros(1), np.array([[1.0, 0.0]]), hook)
        np.testing.assert_allclose(result.E_bar, [[0.5, 0.0], [0.0, 0.0]])


class TestRates:
    def _state(self, manifold, grid):
        shape = grid.shape
        d, m = grid.dim, manifold.dim
        grad_nu = np.zeros(shape + (m, d))
        grad_nu[..., 0, 0] = 1.0
        xdot = np.zeros(shape + (d,))
        xdot[..., 0] = 1.0
        return MotionState(
            grid=grid, manifold=manifold, t=0.0, x=2.0 * grid.coordinates(), xdot=xdot,
            F=np.broadcast_to(2.0 * np.eye(d), shape + (d, d)), nu=np.zeros(shape + (m,)),
            nudot=np.zeros(shape + (m,)), grad_nu=grad_nu,
        )

    def test_spatial_rates(self, square_grid):
        state = self._state(manifold_repository.get("R1"), square_grid)
        v, upsilon = kinematics_service.spatial_rates(state)
        np.testing.assert_allclose(v, state.xdot)
        np.testing.assert_allclose(upsilon, 0.5)

    def test_observer_translation(self, square_grid):
        state = self._state(manifold_repository.get("R1"), square_grid)
        xdot, nudot = kinematics_service.observer_change(state, c=[0.0, 2.0])
        np.testing.assert_allclose(xdot[..., 1], 2.0)
        np.testing.assert_allclose(nudot, state.nudot)

    def test_observer_rotation_needs_an_action(self, cube_grid):
        state = self._state(manifold_repository.get("S1"), cube_grid)
        with raises(UnsupportedActionError):
            kinematics_service.observer_change(state, qdot=[0.0, 0.0, 1.0])

    def test_observer_rotation_moves_the_director(self, cube_grid):
        director = manifold_repository.get("S2:embedded")
        state = self._state(manifold_repository.get("R3"), cube_grid).replace(
            manifold=director,
            nu=np.broadcast_to([1.0, 0.0, 0.0], cube_grid.shape + (3,)),
            grad_nu=np.zeros(cube_grid.shape + (3, 3)),
        )
        xdot, nudot = kinematics_service.observer_change(state, qdot=[0.0, 0.0, 1.0])
        np.testing.assert_allclose(nudot, np.broadcast_to([0.0, 1.0, 0.0], nudot.shape), atol=1e-14)
        expected = state.xdot + np.cross([0.0, 0.0, 1.0], state.x)
        np.testing.assert_allclose(xdot, expected)

    def test_rotate_state_needs_three_dimensions(self, square_grid):
        state = self._state(manifold_repository.get("R1"), square_grid)
        with raises(InputError):
            kinematics_service.rotate_state(state, np.eye(3))

    def test_rotate_state_needs_a_linear_action(self, cube_grid):
        state = self._state(manifold_repository.get("R1"), cube_grid)
        with raises(UnsupportedActionError):
            kinematics_service.rotate_state(state, np.eye(3))

    def test_rotate_state_preserves_unit_directors(self, cube_grid, random_director_state):
        state = random_director_state(cube_grid)
        Q = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        rotated = kinematics_service.rotate_state(state, Q)
        np.testing.assert_allclose(np.linalg.norm(rotated.nu, axis=-1), 1.0, atol=1e-12)
        np.testing.assert_allclose(np.linalg.det(rotated.F), np.linalg.det(state.F), rtol=1e-12)


class TestMicrocracks:
    @staticmethod
    def _residual(nodes):
        grid = BodyGrid.box([0.0, 0.0], [1.0, 1.0], nodes)
        placement = PlacementField.from_closure(grid, lambda X: X + 0.1 * np.sin(np.pi * X[..., ::-1]))
        crack_map = lambda y: y + 0.05 * np.stack([np.sin(2.0 * y[..., 1]), np.cos(y[..., 0])], axis=-1)
        return kinematics_service.microcrack_decomposition(placement, crack_map)

    def test_decomposition_parts(self):
        result = self._residual(9)
        np.testing.assert_allclose(result.F_tot, result.F_micro @ result.F, atol=0.1)
        assert result.displacement.shape == result.F.shape[:-1]

    def test_residual_is_second_order(self):
        coarse, fine = self._residual(9).linf, self._residual(17).linf
        assert 2.5 < coarse / fine < 5.5

    def test_explicit_jacobian(self):
        grid = BodyGrid.box([0.0, 0.0], [1.0, 1.0], 7)
        placement = PlacementField.identity(grid)
        A = np.array([[1.0, 0.2], [0.0, 1.5]])
        result = kinematics_service.microcrack_decomposition(
            placement, lambda y: y @ A.T, crack_jacobian=lambda y: np.broadcast_to(A, y.shape + (2,)))
        assert result.linf == pytest.approx(0.0, abs=1e-12)


class TestStateAssembly:
    def test_state_from_fields(self, line_grid, circle):
        order = OrderField.from_closure(line_grid, circle, lambda X: 0.3 * X)
        state = kinematics_service.state_from_fields(PlacementField.identity(line_grid), order)
        np.testing.assert_allclose(state.F, 1.0, atol=1e-12)
        np.testing.assert_allclose(state.grad_nu, 0.3, atol=1e-12)
        np.testing.assert_allclose(state.xdot, 0.0)

    def test_mismatched_grids(self, line_grid, circle):
        other = BodyGrid.box([0.0], [2.0], 11)
        with raises(InputError):
            kinematics_service.state_from_fields(PlacementField.identity(line_grid), OrderField(other, circle, np.zeros(11)))
