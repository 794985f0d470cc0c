import functools
import logging
from multifield.core.settings import settings
from multifield.core.exceptions import PreconditionViolation, NumericalConsistencyError

logger = logging.getLogger(__name__)

def validation_aware(validation_type: str = 'all', fallback=None):
    """
    Decorator that downgrades tolerance-based validation failures to warnings
    when strict validation is disabled.

    Args:
        validation_type: Kind of validation the wrapped function performs
        fallback: Value returned when a failure is bypassed. A callable is
            invoked with the original arguments.

    Returns:
        Decorated function honouring the validation settings
    """
    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            try:
                return func(*args, **kwargs)
            except (PreconditionViolation, NumericalConsistencyError) as e:
                if not settings.should_validate(validation_type):
                    logger.warning(
                        f"Validation bypassed: {e.message} | Function: {func.__name__} | "
                        f"STRICT_VALIDATION={settings.STRICT_VALIDATION}"
                    )
                    if callable(fallback):
                        return fallback(*args, **kwargs)
                    return fallback

                # Strict mode: propagate
                raise
        return wrapper
    return decorator
