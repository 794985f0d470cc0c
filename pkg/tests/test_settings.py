import pytest
from pytest import raises

from multifield.core.decorators import validation_aware
from multifield.core.exceptions import NumericalConsistencyError
from multifield.core.settings import settings
from multifield.core.settings.development import DevelopmentSettings
from multifield.core.settings.testing import TestingSettings
from multifield.core.settings_checker import SettingsChecker, check_settings_at_startup


@pytest.fixture
def lenient():
    previous = settings.STRICT_VALIDATION
    settings.STRICT_VALIDATION = False
    yield
    settings.STRICT_VALIDATION = previous


class TestEnvironments:
    def test_tests_run_strict(self):
        assert settings.IS_TESTING
        assert settings.STRICT_VALIDATION

    def test_testing_rejects_lenient_validation(self):
        with raises(ValueError):
            TestingSettings(STRICT_VALIDATION=False)

    def test_testing_rejects_coarse_steps(self):
        with raises(ValueError):
            TestingSettings(PARTIALS_STEP=1e-2)

    def test_development_rejects_strict_validation(self):
        with raises(ValueError):
            DevelopmentSettings(STRICT_VALIDATION=True)

    def test_development_log_level(self):
        with raises(ValueError):
            DevelopmentSettings(STRICT_VALIDATION=False, LOG_LEVEL="ERROR")
        assert DevelopmentSettings(STRICT_VALIDATION=False, LOG_LEVEL="debug").LOG_LEVEL == "DEBUG"


class TestChecker:
    def test_default_settings_pass(self):
        assert check_settings_at_startup(settings)["passed"]

    def test_inconsistent_knobs(self):
        broken = settings.model_copy(update={"INSTABILITY_FACTOR": 0.5, "FLOAT_FORMAT": "%q", "MAX_BACKTRACKS": 0})
        errors = SettingsChecker(broken).check_settings()["errors"]
        assert len(errors) == 3

    def test_coarse_step_warns(self):
        coarse = settings.model_copy(update={"SURFACE_STEP": 0.05})
        results = SettingsChecker(coarse).check_settings()
        assert results["errors"] == []
        assert any("SURFACE_STEP" in warning for warning in results["warnings"])

    def test_unknown_env_keys(self, tmp_path):
        env = tmp_path / ".env.testing"
        env.write_text("# comment\nENV=testing\nTRACE_STEP=1e-4\nSMTP_HOST=localhost\n")
        warnings = SettingsChecker(settings).check_env_files([str(env)])["warnings"]
        assert warnings == [f"Unknown key SMTP_HOST in {env}"]

    def test_env_keys_follow_dotenv_syntax(self, tmp_path):
        env = tmp_path / ".env"
        env.write_text('export SMTP_PORT=25\nFLOAT_FORMAT=".6e"  # inline\n')
        warnings = SettingsChecker(settings).check_env_files([str(env)])["warnings"]
        assert warnings == [f"Unknown key SMTP_PORT in {env}"]

    def test_no_settings_object(self):
        assert SettingsChecker().check_settings()["warnings"]


class TestValidationAware:
    @staticmethod
    @validation_aware("numerical", fallback=lambda value: -value)
    def checked(value):
        raise NumericalConsistencyError(f"value {value} rejected")

    def test_strict_mode_raises(self):
        with raises(NumericalConsistencyError):
            self.checked(1.0)

    def test_lenient_mode_falls_back(self, lenient):
        assert self.checked(2.0) == -2.0
