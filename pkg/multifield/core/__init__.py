"""
Core package of the toolkit.

- settings: environment-selected configuration (pydantic-settings)
- exceptions: error hierarchy with stable codes and exit codes
- decorators: validation-aware wrappers
- validators: shared numeric checks
- settings_checker: startup sanity checks

Importing 'settings' here makes it available as ``from multifield.core import settings``.
"""
from multifield.core.settings import settings
