import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from pytest import raises

from multifield.core.exceptions import InputError, InstabilityError, ModelError, UnknownCaseError
from multifield.models.body import BodyGrid, OrderField, PlacementField
from multifield.models.trajectory import Trajectory
from multifield.repositories.manifold import manifold_repository
from multifield.repositories.preset import model_presets
from multifield.schemas.options import BoundaryCondition, IntegrateOptions, SolveOptions
from multifield.services.engine import CellOperator, engine_service
from multifield.services.kinematics import kinematics_service


def pinned(field, value_lower=None, value_upper=None):
    return [BoundaryCondition(field=field, axis=0, side="lower", value=value_lower),
            BoundaryCondition(field=field, axis=0, side="upper", value=value_upper)]


class TestCellOperator:
    @given(st.integers(0, 2 ** 16))
    @settings(max_examples=20, deadline=None)
    def test_transpose_is_the_adjoint(self, seed):
        rng = np.random.default_rng(seed)
        grid = BodyGrid.box([0.0, 0.0], [1.0, 2.0], (5, 6))
        ops = CellOperator(grid)
        u = rng.normal(size=grid.shape + (2,))
        values, gradients = ops.evaluate(u)
        V, G = rng.normal(size=values.shape), rng.normal(size=gradients.shape)
        lhs = np.sum(values * V) + np.sum(gradients * G)
        assert lhs == pytest.approx(np.sum(u * ops.transpose(V, G)), rel=1e-10, abs=1e-10)

    def test_affine_fields_have_exact_cell_gradients(self, square_grid):
        ops = CellOperator(square_grid)
        A = np.array([[1.0, 0.5], [-0.25, 2.0]])
        _, gradients = ops.evaluate(square_grid.coordinates() @ A.T)
        np.testing.assert_allclose(gradients, np.broadcast_to(A, gradients.shape), atol=1e-12)

    def test_lumped_mass_adds_up_to_the_body(self, cube_grid):
        assert np.sum(CellOperator(cube_grid).lumped) == pytest.approx(cube_grid.volume)

    def test_periodic_increments(self, circle):
        grid = BodyGrid.box([0.0], [1.0], 5)
        ops = CellOperator(grid)
        u = np.array([3.0, 3.1, -3.1, -3.0, -2.9])[:, None]
        _, gradients = ops.evaluate(u, circle)
        assert np.all(np.abs(gradients) < 2.0)


class TestMinimize:
    def _solve(self, **options):
        grid = BodyGrid.box([0.0], [1.0], 11)
        order = OrderField(grid, manifold_repository.get("R1"), np.zeros(grid.shape))
        options = SolveOptions(boundary_conditions=pinned("nu", [0.0], [1.0]), **options)
        return engine_service.minimize_energy(model_presets.build("quadratic"), PlacementField.identity(grid),
                                              order, options)

    def test_linear_profile(self):
        result = self._solve()
        assert result.converged
        X = result.order.grid.coordinates()
        np.testing.assert_allclose(result.order.values, X, atol=1e-4)
        assert result.final_residual < 1e-6

    def test_energy_never_increases(self):
        history = np.asarray(self._solve().energy_history)
        assert np.all(np.diff(history) <= 1e-14)
        assert history[-1] == pytest.approx(0.5, abs=1e-6)

    def test_iteration_cap(self):
        result = self._solve(max_iterations=3, spectral_step=False)
        assert not result.converged
        assert result.iterations == 3
        assert len(result.energy_history) == 4

    def test_fields_on_different_grids(self):
        grid = BodyGrid.box([0.0], [1.0], 11)
        other = BodyGrid.box([0.0], [1.0], 13)
        with raises(InputError):
            engine_service.minimize_energy(model_presets.build("quadratic"), PlacementField.identity(grid),
                                           OrderField(other, manifold_repository.get("R1"), np.zeros(13)))

    def test_boundary_value_length(self):
        with raises(InputError):
            self._solve_with(pinned("nu", [0.0, 1.0]))

    def test_boundary_axis(self):
        with raises(InputError):
            self._solve_with([BoundaryCondition(field="x", axis=1, side="lower")])

    def _solve_with(self, conditions):
        grid = BodyGrid.box([0.0], [1.0], 11)
        order = OrderField(grid, manifold_repository.get("R1"), np.zeros(grid.shape))
        return engine_service.minimize_energy(model_presets.build("quadratic"), PlacementField.identity(grid),
                                              order, SolveOptions(boundary_conditions=conditions))


class TestIntegrate:
    @staticmethod
    def _init(values, manifold_tag="R1"):
        grid = BodyGrid.box([0.0], [1.0], len(values))
        order = OrderField(grid, manifold_repository.get(manifold_tag), np.asarray(values, dtype=float))
        return kinematics_service.state_from_fields(PlacementField.identity(grid), order)

    def test_wave_energy_is_nearly_conserved(self):
        trajectory, _, _ = engine_service.noether_wave(h=0.125)
        assert len(trajectory.energy_history) == len(trajectory)
        assert engine_service.energy_drift(trajectory)["relative"] < 0.1

    def test_pinned_ends_stay_fixed(self):
        trajectory, _, _ = engine_service.noether_wave(h=0.125)
        final = trajectory[len(trajectory) - 1]
        np.testing.assert_allclose(final.nu[[0, -1]], 0.0, atol=1e-14)
        np.testing.assert_allclose(final.nudot[[0, -1]], 0.0, atol=1e-14)

    def test_massless_order_parameter(self):
        X = np.linspace(0.0, 1.0, 11)
        init = self._init(0.1 * np.sin(np.pi * X))
        model = model_presets.build("quadratic", {"iota": 0.0})
        with raises(ModelError):
            engine_service.integrate_motion(model, init, IntegrateOptions(dt=0.01, T=0.1))

    def test_large_step_is_unstable(self):
        values = 0.01 * (-1.0) ** np.arange(11)
        init = self._init(values)
        with raises(InstabilityError) as info:
            engine_service.integrate_motion(model_presets.build("quadratic"), init, IntegrateOptions(dt=0.5, T=20.0))
        assert info.value.exit_code == 2

    def test_step_longer_than_horizon(self):
        with raises(ValueError):
            IntegrateOptions(dt=1.0, T=0.5)

    def test_drift_needs_a_history(self):
        trajectory, _, _ = engine_service.noether_wave(h=0.25, T=0.25)
        bare = Trajectory(states=trajectory.states, dt=trajectory.dt)
        with raises(InputError):
            engine_service.energy_drift(bare)


class TestRefinement:
    def test_gradient_stencil_is_second_order(self):
        result = engine_service.refinement_study("gradient", [0.125, 0.0625, 0.03125])
        assert 1.8 < result.order < 2.3
        assert result.flags == []
        assert [row["h"] for row in result.table()] == [0.125, 0.0625, 0.03125]

    def test_exact_target_has_no_order(self):
        result = engine_service.refinement_study("affine-gradient", [0.125, 0.0625, 0.03125])
        assert result.order is None
        assert "order-indeterminate" in result.flags

    def test_surface_trace_identity(self):
        result = engine_service.refinement_study("lemma1-sphere", [0.04, 0.02, 0.01])
        assert result.order > 1.5

    def test_levels_as_pairs(self):
        result = engine_service.refinement_study("gradient", [(0.25, None), {"h": 0.125}, 0.0625])
        assert result.time_steps == [None, None, None]

    def test_too_few_levels(self):
        with raises(InputError):
            engine_service.refinement_study("gradient", [0.1, 0.05])

    def test_spacing_must_decrease(self):
        with raises(InputError):
            engine_service.refinement_study("gradient", [0.1, 0.1, 0.05])

    def test_unknown_target(self):
        with raises(UnknownCaseError):
            engine_service.refinement_study("turbulence", [0.1, 0.05, 0.025])
