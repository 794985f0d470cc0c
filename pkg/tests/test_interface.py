from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from pytest import raises

from multifield.core.exceptions import GeometryError, InputError, ModelError, TraceDivergenceError
from multifield.models.body import BodyGrid
from multifield.models.interface import InterfaceModel, JumpRecord, PointJet
from multifield.models.lagrangian import GeneratorSet
from multifield.repositories.manifold import manifold_repository
from multifield.repositories.preset import surface_presets
from multifield.services.engine import engine_service
from multifield.services.interface import interface_service
from multifield.services.manufactured import manufactured_service

finite = st.floats(-5.0, 5.0, allow_nan=False, allow_infinity=False)
triples = st.lists(finite, min_size=3, max_size=3)

class TestGeometry:
    def test_degenerate_shapes(self):
        with raises(GeometryError):
            InterfaceModel.plane(normal=(0.0, 0.0, 0.0))
        with raises(GeometryError):
            InterfaceModel.sphere(radius=0.0)

    def test_sphere_curvature_matches_level_set(self):
        sphere = InterfaceModel.sphere()
        X = np.array([0.6, 0.0, 0.8])
        np.testing.assert_allclose(sphere.curvature(X), sphere.curvature(X, method="level-set"), atol=1e-12)
        assert np.trace(sphere.curvature(X)) == pytest.approx(-2.0)

    def test_graph_curvature_by_differences(self):
        bowl = InterfaceModel.graph(lambda x, y: 0.5 * (x ** 2 + y ** 2))
        L = bowl.curvature(np.zeros(3))
        np.testing.assert_allclose(L, np.diag([1.0, 1.0, 0.0]), atol=1e-3)

    def test_off_surface_point(self):
        with raises(InputError):
            InterfaceModel.sphere().ensure_on_surface([0.0, 0.0, 1.1], 1e-9)

    def test_projection_and_frame(self):
        sphere = InterfaceModel.sphere(radius=2.0)
        X = sphere.project(np.array([1.0, 1.0, 1.0]))
        assert np.linalg.norm(X) == pytest.approx(2.0, abs=1e-12)
        t1, t2 = sphere.tangent_frame(X)
        np.testing.assert_allclose(np.cross(t1, t2), sphere.normal(X), atol=1e-12)

    def test_normal_speed(self):
        plane = InterfaceModel.plane(normal=(2.0, 0.0, 0.0), speed=0.3)
        assert float(plane.normal_speed(np.zeros(3))) == pytest.approx(0.3)

class TestJumps:
    @given(triples, triples, triples, triples)
    @settings(max_examples=50, deadline=None)
    def test_product_rule(self, a_plus, a_minus, b_plus, b_minus):
        a, b = JumpRecord(a_plus, a_minus), JumpRecord(b_plus, b_minus)
        assert a.product_rule_gap(b) == pytest.approx(0.0, abs=1e-10)

    def test_shapes_must_agree(self):
        with raises(InputError):
            JumpRecord(np.zeros(3), np.zeros(2))

    def test_jets_live_in_three_dimensions(self):
        with raises(InputError):
            PointJet(x=np.zeros(2), xdot=np.zeros(2), F=np.eye(2), nu=np.zeros(1), nudot=np.zeros(1),
                     grad_nu=np.zeros((1, 2)))

class TestTraces:
    plane = InterfaceModel.plane()

    def test_step_across_the_plane(self):
        closure = lambda Y: np.array([Y[0] + (1.0 if Y[2] > 0.0 else 0.0)])
        record = interface_service.traces(closure, self.plane, [0.5, 0.0, 0.0])
        assert record.plus[0] == pytest.approx(1.5, abs=1e-12)
        assert record.minus[0] == pytest.approx(0.5, abs=1e-12)
        assert record.jump[0] == pytest.approx(1.0, abs=1e-12)

    def test_nodal_field(self):
        grid = BodyGrid.box([-1.0, -1.0, -1.0], [1.0, 1.0, 1.0], 9)
        values = np.abs(grid.coordinates()[..., 2]) + grid.coordinates()[..., 0]
        record = interface_service.traces(SimpleNamespace(grid=grid, values=values), self.plane, [0.25, 0.0, 0.0])
        assert float(record.plus) == pytest.approx(0.25, abs=1e-12)
        assert float(record.minus) == pytest.approx(0.25, abs=1e-12)

    def test_singular_field_does_not_settle(self):
        with raises(TraceDivergenceError) as info:
            interface_service.traces(lambda Y: 1.0 / abs(Y[2]), self.plane, np.zeros(3),
                                     schedule=(4e-4, 2e-4, 1e-4))
        assert info.value.exit_code == 2

    @pytest.mark.parametrize("schedule", [(1e-4,), (1e-4, 2e-4), (2e-4, -1e-4)])
    def test_malformed_schedule(self, schedule):
        with raises(InputError):
            interface_service.traces(lambda Y: Y[:1], self.plane, np.zeros(3), schedule=schedule)

    def test_pair_from_piecewise_jets(self):
        case = manufactured_service.case("two-phase-bar")
        pair = interface_service.pair_from_field(case.closures["jets"], case.surface, np.zeros(3))
        expected = case.pairs(np.zeros(3))
        np.testing.assert_allclose(pair.plus.F, expected.plus.F, atol=1e-9)
        np.testing.assert_allclose(pair.minus.xdot, expected.minus.xdot, atol=1e-9)

class TestSurfaceCalculus:
    def test_curvature_cross_check(self):
        calculus = interface_service.surface_calculus(InterfaceModel.sphere(), [0.6, 0.0, 0.8])
        assert calculus.curvature_gap < 1e-6

    def test_gradient_of_a_tangential_coordinate(self):
        plane = InterfaceModel.plane()
        calculus = interface_service.surface_calculus(plane, np.zeros(3), e=lambda Y: np.array([2.0 * Y[0] + Y[2]]))
        np.testing.assert_allclose(calculus.grad_e, [[2.0, 0.0, 0.0]], atol=1e-8)

    def test_lemmas_on_the_sphere(self):
        # acceptance reads lemma1 and lemma2; lemma1_printed is reported for comparison only
        sphere = InterfaceModel.sphere()
        report = interface_service.lemma_checks(sphere, engine_service.isochoric_field,
                                                engine_service.superficial_field(sphere),
                                                engine_service.sphere_points())
        assert report.lemma1 < 1e-6
        assert report.lemma2 < 1e-6
        assert report.lemma1_printed > 0.1
        assert report.flags == []

    def test_printed_trace_sign_is_off_by_twice_the_normal_part(self):
        sphere = InterfaceModel.sphere()
        report = interface_service.lemma_checks(sphere, engine_service.isochoric_field,
                                                engine_service.superficial_field(sphere), [[0.6, 0.0, 0.8]])
        # ((grad w) m) . m = 0.48 cos(0.6) at this point
        assert report.lemma1 < 1e-6
        assert report.lemma1_printed == pytest.approx(0.96 * np.cos(0.6), abs=1e-5)

    def test_lemma_precondition_flags(self):
        sphere = InterfaceModel.sphere()
        report = interface_service.lemma_checks(sphere, lambda Y: np.asarray(Y, dtype=float),
                                                lambda Y: np.outer(np.ones(3), Y), engine_service.sphere_points())
        assert report.flags == ["isochoric-precondition", "superficial-precondition"]

class TestBalances:
    def test_two_phase_bar_is_compatible(self):
        case = manufactured_service.case("two-phase-bar")
        pair = case.pairs(np.array([0.0, 0.3, -0.2]))
        report = interface_service.compatibility_checks(pair, case.surface)
        assert report.coherent and report.compatible
        assert report.kinematic == pytest.approx(0.0, abs=1e-12)

    def test_two_phase_bar_balances(self):
        case = manufactured_service.case("two-phase-bar")
        result = interface_service.unstructured_balance_residuals(case.pairs(np.zeros(3)), case.surface, case.model,
                                                                  case.U, case.manifold)
        for value in result.norms().values():
            assert value < 1e-10

    def test_wrong_speed_breaks_the_balance(self):
        case = manufactured_service.case("two-phase-bar")
        result = interface_service.unstructured_balance_residuals(case.pairs(np.zeros(3)), case.surface, case.model,
                                                                  0.5 * case.U, case.manifold)
        assert result.norms()["standard"] > 1e-3

    def test_order_jump_on_a_nonlinear_manifold(self):
        case = manufactured_service.case("two-phase-bar")
        pair = case.pairs(np.zeros(3))
        broken = replace(pair, minus=replace(pair.minus, nu=pair.minus.nu + 0.5))
        with raises(ModelError):
            interface_service.unstructured_balance_residuals(broken, case.surface, case.model, case.U,
                                                             manifold_repository.get("S1"))

    def test_sphere_tension(self):
        case = manufactured_service.case("structured-sphere", sigma=1.0, radius=1.0)
        X = np.array([0.6, 0.0, 0.8])
        bare = interface_service.unstructured_balance_residuals(case.pairs(X), case.surface, case.model, 0.0,
                                                                case.manifold)
        assert bare.configurational == pytest.approx(2.0, abs=1e-8)
        structured = interface_service.structured_balance_residuals(case.pairs, case.surface, X, case.model,
                                                                    case.phi, 0.0, case.manifold)
        for value in structured.norms().values():
            assert value < 1e-6

    def test_sample_cloud_records(self):
        case = manufactured_service.case("two-phase-bar")
        records = interface_service.sample_cloud(case.pairs, case.surface, [[0.0, 0.0, 0.0], [0.0, 1.0, 1.0]],
                                                 case.model, manifold=case.manifold)
        assert len(records) == 2
        assert set(records[0]) >= {"X1", "m1", "standard", "substructural", "configurational"}

    def test_translation_noether_balance(self):
        case = manufactured_service.case("two-phase-bar")
        pair = case.pairs(np.zeros(3))
        result = interface_service.interfacial_noether_residual(pair, case.surface, case.model,
                                                                GeneratorSet.translation([1.0, 0.0, 0.0]),
                                                                case.manifold, U=case.U)
        assert result["residual"] == pytest.approx(0.0, abs=1e-10)
        assert result["surface"] == 0.0

    def test_noether_balance_inputs(self):
        case = manufactured_service.case("two-phase-bar")
        gens = GeneratorSet.translation([1.0, 0.0, 0.0])
        with raises(InputError):
            interface_service.interfacial_noether_residual(case.pairs, case.surface, case.model, gens,
                                                           case.manifold)
        with raises(InputError):
            interface_service.interfacial_noether_residual(case.pairs(np.zeros(3)), case.surface, case.model,
                                                           gens, case.manifold, phi=surface_presets.build("invariant"))


class TestSurfaceInvariance:
    director = manifold_repository.get("S2:embedded")

    def _residuals(self, preset, parameters=None):
        rng = np.random.default_rng(3)
        samples = interface_service.random_surface_samples(5, self.director, rng)
        generators = [interface_service.random_surface_generators(sample, rng) for sample in samples]
        phi = surface_presets.build(preset, parameters)
        return interface_service.surface_invariance_residuals(phi, samples, generators, self.director)

    def test_invariant_energy_satisfies_the_identities(self):
        residuals = self._residuals("invariant", {"sigma": 1.0, "eta": 0.5, "zeta": 0.3})
        assert residuals["samples"] == 5
        for name in ("nr1", "nr2", "nr3"):
            assert residuals[name] < 1e-6

    def test_quadratic_energy_does_not(self):
        assert self._residuals("quadratic")["nr1"] > 1e-3

    def test_generators_must_be_tangential(self):
        rng = np.random.default_rng(0)
        sample = interface_service.random_surface_samples(1, self.director, rng)[0]
        gens = interface_service.random_surface_generators(sample, rng)
        bad = replace(gens, grad_w=gens.grad_w + np.eye(3))
        with raises(InputError):
            interface_service.surface_invariance_residuals(surface_presets.build("invariant"), [sample], [bad],
                                                           self.director)
