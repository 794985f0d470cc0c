# multifield/core/settings/testing.py
from multifield.core.settings.base import BaseAppSettings
from pydantic import field_validator

class TestingSettings(BaseAppSettings):
    """Settings for the testing environment."""

    @field_validator('STRICT_VALIDATION')
    def validate_strict_validation(cls, v):
        if v is False:
            raise ValueError(
                "STRICT_VALIDATION must be True under ENV=testing so tolerance breaches fail the run"
            )
        return v

    # Golden comparisons rely on the default stencils
    @field_validator('CHRISTOFFEL_STEP', 'PARTIALS_STEP')
    def validate_steps(cls, v):
        if not 1e-9 <= v <= 1e-3:
            raise ValueError("Difference steps must lie in [1e-9, 1e-3] in testing environment")
        return v
