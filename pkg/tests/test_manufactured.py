from dataclasses import replace

import numpy as np
import pytest
from pytest import mark, raises

from multifield.core.exceptions import InputError, NumericalConsistencyError, UnknownCaseError
from multifield.models.lagrangian import Sources
from multifield.services.manufactured import manufactured_service


class TestCases:
    @mark.parametrize("tag", ["bulk-smooth", "rigid-rotation", "two-phase-bar", "structured-sphere"])
    def test_case_solves_its_balances(self, tag):
        case = manufactured_service.case(tag)
        assert case.tag == tag
        assert manufactured_service.verify(case) <= 1e-4

    def test_unknown_tag(self):
        with raises(UnknownCaseError) as info:
            manufactured_service.case("vortex-sheet")
        assert "bulk-smooth" in info.value.message

    def test_interfacial_flag(self):
        assert manufactured_service.case("two-phase-bar").is_interfacial
        assert not manufactured_service.case("bulk-smooth", nodes=9).is_interfacial


class TestTwoPhaseBar:
    def test_strain_must_exceed_the_well_offset(self):
        with raises(InputError):
            manufactured_service.case("two-phase-bar", strain=0.05, delta=0.1)

    def test_interface_speed(self):
        case = manufactured_service.case("two-phase-bar", strain=0.2, delta=0.1, a=1.0)
        assert case.U == pytest.approx(np.sqrt(0.03))
        assert case.surface.shape == "plane"

    def test_velocity_jump(self):
        case = manufactured_service.case("two-phase-bar")
        pair = case.pairs(np.zeros(3))
        jump = pair.record("xdot").jump
        np.testing.assert_allclose(jump, [-2.0 * case.U * 0.2, 0.0, 0.0], atol=1e-14)


class TestStructuredSphere:
    def test_needs_a_positive_order_stiffness(self):
        with raises(InputError):
            manufactured_service.case("structured-sphere", alpha=0.0)

    def test_pure_tension_order_value(self):
        case = manufactured_service.case("structured-sphere", radius=2.0, sigma=1.0, alpha=1.0)
        nu_plus = case.parameters["nu_plus"]
        assert 0.5 * nu_plus ** 2 == pytest.approx(2.0 * 1.0 / 2.0)


class TestAnalyticResiduals:
    def test_interfacial_cases_have_no_bulk_closures(self):
        case = manufactured_service.case("two-phase-bar")
        with raises(InputError):
            manufactured_service.analytic_residuals(case, np.zeros((1, 3)), 0.0)

    def test_missing_sources_fail_verification(self):
        case = manufactured_service.case("bulk-smooth", nodes=9)
        with raises(NumericalConsistencyError) as info:
            manufactured_service.verify(replace(case, sources=Sources()))
        assert info.value.exit_code == 2

    def test_short_trajectory(self):
        case = manufactured_service.case("bulk-smooth", nodes=9)
        with raises(InputError):
            manufactured_service.sample_trajectory(case.trajectory.grid, case.manifold, case.closures, 0.1, 2)
