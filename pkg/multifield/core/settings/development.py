# multifield/core/settings/development.py
from .base import BaseAppSettings
from pydantic import field_validator
import logging

logger = logging.getLogger(__name__)

class DevelopmentSettings(BaseAppSettings):
    """Settings for interactive development: lenient validation, verbose logs."""

    # Tolerance checks only warn here; strict runs belong to testing or production
    @field_validator('STRICT_VALIDATION')
    def validate_strict_validation(cls, v):
        if v is True:
            raise ValueError(
                "STRICT_VALIDATION=True is not allowed in development, where tolerance "
                "checks log and continue. Use ENV=testing for strict runs."
            )
        return v

    @field_validator('LOG_LEVEL')
    def validate_log_level(cls, v):
        level = v.upper()
        if level not in ("DEBUG", "INFO"):
            raise ValueError(
                f"LOG_LEVEL {v!r} hides solver progress; development accepts DEBUG or INFO"
            )
        return level
