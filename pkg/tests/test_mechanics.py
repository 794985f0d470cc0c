import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from pytest import mark, raises

from multifield.core.exceptions import InputError, ModelError, UnsupportedActionError
from multifield.models.body import BodyGrid, MotionState
from multifield.models.lagrangian import GeneratorSet
from multifield.models.trajectory import Trajectory
from multifield.repositories.manifold import manifold_repository
from multifield.repositories.preset import model_presets
from multifield.services.engine import engine_service
from multifield.services.manufactured import manufactured_service
from multifield.services.mechanics import mechanics_service, residual_norms


@pytest.fixture(scope="module")
def bulk_case():
    return manufactured_service.case("bulk-smooth")


class TestResponses:
    @given(st.integers(0, 2 ** 16))
    @settings(max_examples=20, deadline=None)
    def test_analytic_partials_match_differences(self, seed):
        rng = np.random.default_rng(seed)
        model = model_presets.build("quadratic", {"alpha": 0.7})
        X, F = rng.normal(size=(4, 2)), np.eye(2) + 0.1 * rng.normal(size=(4, 2, 2))
        nu, grad_nu = rng.normal(size=(4, 1)), rng.normal(size=(4, 1, 2))
        for name in ("dF_e", "dnu_e", "dgradnu_e"):
            assert model.partial_mismatch(name, X, F, nu, grad_nu) < 1e-6

    def test_rest_state_is_stress_free(self, square_grid, rest_state, quadratic):
        state = rest_state(square_grid, manifold_repository.get("R1"), np.zeros(square_grid.shape))
        responses = mechanics_service.bulk_responses(state, quadratic)
        np.testing.assert_allclose(responses.P, 0.0, atol=1e-12)
        np.testing.assert_allclose(responses.S, 0.0, atol=1e-12)
        assert mechanics_service.total_energy(state, quadratic) == pytest.approx(0.0, abs=1e-20)

    def test_order_and_body_forces_carry_density(self, square_grid, rest_state):
        model = model_presets.build("quadratic", {"alpha": 0.7})
        nu = 0.3 * square_grid.coordinates()[..., :1]
        state = rest_state(square_grid, manifold_repository.get("R1"), nu[..., 0])
        responses = mechanics_service.bulk_responses(state, model)
        rho = square_grid.rho0[..., None]
        np.testing.assert_allclose(responses.z, -rho * 0.7 * state.nu, atol=1e-14)
        np.testing.assert_allclose(responses.b, 0.0, atol=1e-14)
        np.testing.assert_allclose(responses.beta, 0.0, atol=1e-14)

    def test_kinetic_energy(self, line_grid, rest_state, quadratic):
        state = rest_state(line_grid, manifold_repository.get("R1"), np.zeros(line_grid.shape))
        moving = state.replace(xdot=np.full(line_grid.shape + (1,), 2.0))
        assert mechanics_service.total_energy(moving, quadratic) == pytest.approx(2.0)
        assert mechanics_service.total_lagrangian(moving, quadratic) == pytest.approx(2.0)

    def test_eshelby_symmetric_for_symmetric_stretch(self, square_grid, quadratic):
        F = np.broadcast_to(np.array([[1.2, 0.1], [0.1, 0.9]]), square_grid.shape + (2, 2))
        state = MotionState(grid=square_grid, manifold=manifold_repository.get("R1"), t=0.0,
                            x=square_grid.coordinates(), xdot=np.zeros(square_grid.shape + (2,)), F=F,
                            nu=np.zeros(square_grid.shape + (1,)), nudot=np.zeros(square_grid.shape + (1,)),
                            grad_nu=np.zeros(square_grid.shape + (1, 2)))
        check = mechanics_service.eshelby_skew_check([state], quadratic)
        assert check["passed"]
        assert check["linf"] == pytest.approx(0.0, abs=1e-14)


class TestEulerLagrange:
    def test_routes_agree(self, bulk_case):
        balance = mechanics_service.el_residuals(bulk_case.trajectory, bulk_case.model, bulk_case.sources)
        lagrangian = mechanics_service.el_residuals(bulk_case.trajectory, bulk_case.model, bulk_case.sources,
                                                    route="lagrangian")
        np.testing.assert_allclose(balance.r_x, lagrangian.r_x, atol=1e-10)
        np.testing.assert_allclose(balance.r_nu, lagrangian.r_nu, atol=1e-10)
        assert balance.r_x.shape[0] == len(bulk_case.trajectory) - 2

    def test_manufactured_residual_is_small(self, bulk_case):
        residuals = mechanics_service.el_residuals(bulk_case.trajectory, bulk_case.model, bulk_case.sources)
        grid = bulk_case.trajectory.grid
        assert residual_norms(residuals.r_x, grid)["linf"] < 0.1
        assert residual_norms(residuals.r_nu, grid)["linf"] < 0.1

    def test_missing_sources_show_up(self, bulk_case):
        residuals = mechanics_service.el_residuals(bulk_case.trajectory, bulk_case.model)
        assert residual_norms(residuals.r_x, bulk_case.trajectory.grid)["linf"] > 0.1

    def test_needs_three_levels(self, bulk_case):
        short = bulk_case.trajectory.window(0, 2)
        with raises(InputError):
            mechanics_service.el_residuals(short, bulk_case.model)

    def test_unknown_route(self, bulk_case):
        with raises(InputError):
            mechanics_service.el_residuals(bulk_case.trajectory, bulk_case.model, route="hamiltonian")


class TestResidualNorms:
    def test_boundary_nodes_are_skipped(self, square_grid):
        values = np.zeros((1,) + square_grid.shape + (2,))
        values[0, 0, 0] = 5.0
        values[0, 4, 4] = [3.0, 4.0]
        norms = residual_norms(values, square_grid)
        assert norms["linf"] == pytest.approx(5.0)
        assert residual_norms(values, square_grid, exclude_boundary=False)["linf"] == pytest.approx(np.sqrt(50.0))

    def test_unstacked(self, square_grid):
        norms = residual_norms(np.ones(square_grid.shape), square_grid, exclude_boundary=False, stacked=False)
        assert norms["l2"] == pytest.approx(1.0)


class TestSymmetries:
    def test_director_energy_is_frame_indifferent(self, cube_grid, random_director_state):
        state = random_director_state(cube_grid)
        residual = mechanics_service.rotational_invariance_residual(state, model_presets.build("director"))
        assert np.max(np.abs(residual)) < 1e-8

    def test_shear_energy_is_not(self, cube_grid, random_director_state):
        state = random_director_state(cube_grid)
        residual = mechanics_service.rotational_invariance_residual(state, model_presets.build("shear"))
        assert np.max(np.abs(residual)) > 1e-2

    def test_rotations_need_a_3d_body(self, square_grid, rest_state, quadratic):
        state = rest_state(square_grid, manifold_repository.get("R1"), np.zeros(square_grid.shape))
        with raises(UnsupportedActionError):
            mechanics_service.rotational_invariance_residual(state, quadratic)

    @mark.parametrize("alpha, passed", [(0.0, True), (1.0, False)])
    def test_order_shift_invariance(self, line_grid, rest_state, alpha, passed):
        state = rest_state(line_grid, manifold_repository.get("S1"), np.ones(line_grid.shape))
        model = model_presets.build("quadratic", {"alpha": alpha})
        report = mechanics_service.invariance_check(model, "group", GeneratorSet.order_shift("SO2", [1.0]), [state])
        assert report.passed is passed

    def test_translation_invariance(self, square_grid, rest_state, quadratic):
        state = rest_state(square_grid, manifold_repository.get("R1"), np.zeros(square_grid.shape))
        report = mechanics_service.invariance_check(quadratic, "spatial", GeneratorSet.translation([1.0, 0.5]),
                                                    [state])
        assert report.passed
        assert report.max_deviation == pytest.approx(0.0, abs=1e-14)

    def test_identity_family(self, square_grid, rest_state, quadratic):
        state = rest_state(square_grid, manifold_repository.get("R1"), np.zeros(square_grid.shape))
        report = mechanics_service.invariance_check(quadratic, "identity", GeneratorSet.zero(), [state])
        assert report.passed and report.max_deviation == 0.0

    def test_unknown_family(self, square_grid, rest_state, quadratic):
        state = rest_state(square_grid, manifold_repository.get("R1"), np.zeros(square_grid.shape))
        with raises(InputError):
            mechanics_service.invariance_check(quadratic, "boost", GeneratorSet.zero(), [state])

    def test_relabeling_must_be_isochoric(self, cube_grid):
        X = cube_grid.coordinates()
        with raises(InputError):
            mechanics_service.relabeling_gradient(GeneratorSet.relabeling(lambda Y: Y), X)
        grad_w = mechanics_service.relabeling_gradient(GeneratorSet.relabeling(engine_service.isochoric_field), X)
        np.testing.assert_allclose(np.trace(grad_w, axis1=-2, axis2=-1), 0.0, atol=1e-8)


class TestNoether:
    def test_zero_generator_has_no_current(self, bulk_case):
        report = mechanics_service.noether_residual(bulk_case.trajectory, bulk_case.model, GeneratorSet.zero())
        assert report.linf == 0.0
        assert report.flags == []

    def test_order_shift_current_on_integrated_wave(self):
        trajectory, model, gens = engine_service.noether_wave(h=0.0625)
        report = mechanics_service.noether_residual(trajectory, model, gens)
        assert report.linf < 2e-2
        assert "invariance-precondition" not in report.flags
        assert report.residual.shape[0] == len(trajectory) - 2

    @staticmethod
    def _travelling_wave(nodes, amplitude=0.01, k=2.0 * np.pi, dt=1e-3):
        # x1 = X1 + a sin(k X1 - k t) solves the quadratic model with mu = rho0 = 1
        grid = BodyGrid.box([0.0, 0.0], [1.0, 1.0], (nodes, 5))
        X = grid.coordinates()
        states = []
        for n in range(3):
            t = n * dt
            phase = k * X[..., 0] - k * t
            x = X.copy()
            x[..., 0] += amplitude * np.sin(phase)
            xdot = np.zeros_like(X)
            xdot[..., 0] = -amplitude * k * np.cos(phase)
            F = np.broadcast_to(np.eye(2), grid.shape + (2, 2)).copy()
            F[..., 0, 0] += amplitude * k * np.cos(phase)
            states.append(MotionState(grid=grid, manifold=manifold_repository.get("R1"), t=t, x=x, xdot=xdot, F=F,
                                      nu=np.zeros(grid.shape + (1,)), nudot=np.zeros(grid.shape + (1,)),
                                      grad_nu=np.zeros(grid.shape + (1, 2))))
        return Trajectory(states=tuple(states), dt=dt)

    def test_translation_current_on_a_travelling_wave(self, quadratic):
        gens = GeneratorSet.translation([1.0, 0.0])
        coarse, fine = (mechanics_service.noether_residual(self._travelling_wave(nodes), quadratic, gens,
                                                           check_preconditions=False).linf
                        for nodes in (41, 81))
        assert fine < 1e-3
        assert coarse / fine > 3.5

    @staticmethod
    def _static_stretch(model, manifold_tag, nu):
        grid = BodyGrid.box([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], 5)
        F = np.array([[1.1, 0.2, 0.0], [0.0, 0.9, 0.1], [0.0, 0.0, 1.05]])
        manifold = manifold_repository.get(manifold_tag)
        m = manifold.dim
        state = MotionState(grid=grid, manifold=manifold, t=0.0, x=grid.coordinates() @ F.T,
                            xdot=np.zeros(grid.shape + (3,)), F=np.broadcast_to(F, grid.shape + (3, 3)),
                            nu=np.broadcast_to(nu(F), grid.shape + (m,)), nudot=np.zeros(grid.shape + (m,)),
                            grad_nu=np.zeros(grid.shape + (m, 3)))
        return Trajectory(states=(state, state.replace(t=0.1), state.replace(t=0.2)), dt=0.1)

    def test_rotation_current_of_a_frame_indifferent_model(self):
        model = model_presets.build("director", {"c": 1.0, "kappa": 1.0, "mu": 1.0})
        tau = np.array([0.0, 0.0, 1.0])
        trajectory = self._static_stretch(model, "S2:embedded", lambda F: F @ tau / np.linalg.norm(F @ tau))
        gens = GeneratorSet.rotation([0.0, 0.0, 1.0])
        report = mechanics_service.noether_residual(trajectory, model, gens, check_preconditions=False)
        assert report.linf < 1e-10
        assert mechanics_service.invariance_check(model, "rotation", gens, [trajectory[0]]).passed

    def test_rotation_current_fails_without_frame_indifference(self, quadratic):
        trajectory = self._static_stretch(quadratic, "R1", lambda F: np.zeros(1))
        gens = GeneratorSet.rotation([0.0, 0.0, 1.0], group=None)
        report = mechanics_service.noether_residual(trajectory, quadratic, gens, check_preconditions=False)
        # rho0 W : (P F^T) with P = F - I reduces to F_21 - F_12
        assert report.linf == pytest.approx(0.2, rel=1e-8)

    def test_family_of(self):
        assert mechanics_service.family_of(GeneratorSet.zero()) == "identity"
        assert mechanics_service.family_of(GeneratorSet.translation([1.0])) == "spatial"
        assert mechanics_service.family_of(GeneratorSet.rotation([0.0, 0.0, 1.0])) == "rotation"
        assert mechanics_service.family_of(GeneratorSet.order_shift("SO2", [1.0])) == "group"


class TestConfigurational:
    def test_residual_shapes(self, bulk_case):
        result = mechanics_service.config_balance_residual(bulk_case.trajectory, bulk_case.model, bulk_case.sources)
        grid = bulk_case.trajectory.grid
        assert result.consistent.shape == (len(bulk_case.trajectory) - 2,) + grid.shape + (grid.dim,)
        assert np.all(np.isfinite(result.printed))

    def test_static_homogeneous_state_is_balanced(self, square_grid, quadratic):
        F = np.broadcast_to(np.array([[1.1, 0.0], [0.0, 0.95]]), square_grid.shape + (2, 2))
        state = MotionState(grid=square_grid, manifold=manifold_repository.get("R1"), t=0.0,
                            x=square_grid.coordinates() @ F[0, 0].T, xdot=np.zeros(square_grid.shape + (2,)), F=F,
                            nu=np.full(square_grid.shape + (1,), 0.2), nudot=np.zeros(square_grid.shape + (1,)),
                            grad_nu=np.zeros(square_grid.shape + (1, 2)))
        trajectory = Trajectory(states=(state, state.replace(t=0.1), state.replace(t=0.2)), dt=0.1)
        result = mechanics_service.config_balance_residual(trajectory, quadratic)
        np.testing.assert_allclose(result.consistent, 0.0, atol=1e-12)
        np.testing.assert_allclose(result.printed, 0.0, atol=1e-12)

    def test_integral_balance_needs_a_linear_manifold(self):
        trajectory, model, _ = engine_service.noether_wave(h=0.125)
        with raises(ModelError):
            mechanics_service.integral_substructural_balance(trajectory, model, [(1, 5)])

    def test_integral_balance_on_manufactured_motion(self, bulk_case):
        result = mechanics_service.integral_substructural_balance(
            bulk_case.trajectory, bulk_case.model, [(2, 6), (2, 6)], bulk_case.sources)
        assert result["residual"].shape == (len(bulk_case.trajectory) - 2, 1)
        assert np.max(np.abs(result["residual"])) < 0.05

    def test_part_outside_the_grid(self, bulk_case):
        with raises(InputError):
            mechanics_service.integral_substructural_balance(bulk_case.trajectory, bulk_case.model, [(0, 40), (2, 6)])
