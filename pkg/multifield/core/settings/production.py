# multifield/core/settings/production.py
from .base import BaseAppSettings
from pydantic import field_validator
import logging

logger = logging.getLogger(__name__)

class ProductionSettings(BaseAppSettings):
    """Settings for batch runs whose reports are archived or compared."""

    @field_validator('STRICT_VALIDATION')
    def validate_strict_validation(cls, v):
        if not v:
            raise ValueError("STRICT_VALIDATION must be True in production")
        return v

    @field_validator('LOG_LEVEL')
    def validate_log_level(cls, v):
        if v.upper() == "DEBUG":
            error_msg = "Production LOG_LEVEL must not be DEBUG (per-iteration logs swamp batch output)"
            logger.critical(error_msg)
            raise ValueError(error_msg)
        return v.upper()

    @field_validator('FLOAT_FORMAT')
    def validate_float_format(cls, v):
        if v != ".17g":
            logger.warning("Production FLOAT_FORMAT is not '.17g'; CSV output will not round-trip bit-exactly")
        return v
