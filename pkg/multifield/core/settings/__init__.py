# multifield/core/settings/__init__.py
import os
from dotenv import load_dotenv
from importlib import import_module
from pathlib import Path
import logging

logger = logging.getLogger(__name__)

# Settings modules are imported after the env file is loaded: field defaults read os.environ
SETTINGS_CLASSES = {
    "development": (".development", "DevelopmentSettings"),
    "testing": (".testing", "TestingSettings"),
    "production": (".production", "ProductionSettings"),
}

def env_candidates(env: str):
    """Environment files for ``env``, most specific first."""
    env_dir = Path(os.getenv("MULTIFIELD_ENV_DIR", "env"))
    return [env_dir / f".env.{env}", env_dir / ".env"]

def load_settings(env: str = None):
    """
    Load the env file of ``env`` and build its settings class.

    Unknown environments fall back to development with a warning.
    """
    env = (env or os.getenv("ENV", "development")).lower()
    loaded = next((path for path in env_candidates(env) if path.exists()), None)
    if loaded is not None:
        load_dotenv(loaded)
    logger.debug(f"Settings for '{env}' from {loaded or 'process environment only'}")

    if env not in SETTINGS_CLASSES:
        logger.warning(f"Unknown environment '{env}', using development settings")
    module, name = SETTINGS_CLASSES.get(env, SETTINGS_CLASSES["development"])
    settings_class = getattr(import_module(module, __name__), name)
    try:
        return settings_class()
    except Exception as e:
        logger.error(f"Invalid {name}: {e}")
        raise

# Create singleton instance
settings = load_settings()
