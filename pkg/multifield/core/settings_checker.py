"""
Settings Checker Module

This module performs sanity checks on the numerical configuration
so that inconsistent step sizes or tolerances are caught before a run.
"""

import logging
from typing import List, Dict, Any
from pathlib import Path

from dotenv import dotenv_values

logger = logging.getLogger(__name__)

class SettingsChecker:
    """
    Checker for numerical settings and environment files.
    """

    def __init__(self, settings=None):
        """Initialize with optional settings object"""
        self.settings = settings

    def check_env_files(self, env_files: List[str] = None) -> Dict[str, List[str]]:
        """
        Check environment files for unknown keys.
        """
        if env_files is None:
            env_files = [
                "env/.env",
                "env/.env.development",
                "env/.env.testing",
                "env/.env.production"
            ]

        results = {"errors": [], "warnings": []}
        known = set(type(self.settings).model_fields) if self.settings is not None else set()

        for env_file in env_files:
            if not Path(env_file).exists():
                continue

            logger.info(f"Checking {env_file}")

            for key in dotenv_values(env_file):
                if known and key not in known and key != "ENV":
                    results["warnings"].append(f"Unknown key {key} in {env_file}")

        return results

    def check_settings(self) -> Dict[str, List[str]]:
        """
        Check the loaded settings object for inconsistent numerical knobs.
        """
        results = {"errors": [], "warnings": []}
        if not self.settings:
            results["warnings"].append("No settings object provided for checking")
            return results

        s = self.settings

        for name in ("CHRISTOFFEL_STEP", "PARTIALS_STEP", "SURFACE_STEP"):
            step = getattr(s, name)
            if step <= 0:
                results["errors"].append(f"{name} must be positive, got {step}")
            elif step > 1e-2:
                results["warnings"].append(f"{name}={step} is coarse; difference errors will dominate residuals")
            elif step < 1e-10:
                results["warnings"].append(f"{name}={step} is below the rounding-dominated range")

        for name in (
            "CHART_MARGIN",
            "GEODESIC_TOLERANCE",
            "SYMMETRY_TOLERANCE",
            "TRACE_TOLERANCE",
            "ON_SURFACE_TOLERANCE",
            "INVARIANCE_TOLERANCE",
            "COMPATIBILITY_TOLERANCE",
            "CONTINUITY_TOLERANCE",
            "ISOCHORIC_TOLERANCE",
            "ROUNDING_FLOOR",
        ):
            value = getattr(s, name)
            if value <= 0:
                results["errors"].append(f"{name} must be positive, got {value}")

        if s.GEODESIC_MAX_ITERATIONS < 1:
            results["errors"].append("GEODESIC_MAX_ITERATIONS must be at least 1")

        if s.INSTABILITY_FACTOR <= 1:
            results["errors"].append(f"INSTABILITY_FACTOR must exceed 1, got {s.INSTABILITY_FACTOR}")

        if s.MAX_BACKTRACKS < 1:
            results["errors"].append("MAX_BACKTRACKS must be at least 1")

        if s.QUADRATURE_RULE == "trapezoid":
            results["warnings"].append("Trapezoid quadrature is first-order on kinked fields; closed-form distance reproductions may miss 1e-4")

        try:
            format(1.0, s.FLOAT_FORMAT)
        except ValueError:
            results["errors"].append(f"FLOAT_FORMAT {s.FLOAT_FORMAT!r} is not a valid float format")

        return results

    def run_all_checks(self) -> Dict[str, Any]:
        """
        Run all checks and return the combined results.
        """
        env_results = self.check_env_files()
        settings_results = self.check_settings()

        all_errors = env_results["errors"] + settings_results["errors"]
        all_warnings = env_results["warnings"] + settings_results["warnings"]

        for error in all_errors:
            logger.error(f"Settings error: {error}")

        for warning in all_warnings:
            logger.warning(f"Settings warning: {warning}")

        return {
            "errors": all_errors,
            "warnings": all_warnings,
            "passed": len(all_errors) == 0
        }


def check_settings_at_startup(settings=None) -> Dict[str, Any]:
    """
    Run settings checks at startup.

    Args:
        settings: Settings object

    Returns:
        Dict with check results
    """
    checker = SettingsChecker(settings)
    results = checker.run_all_checks()

    if not results["passed"]:
        logger.critical("Configuration errors detected; strict runs will abort")
    elif results["warnings"]:
        logger.info(f"Settings check passed with {len(results['warnings'])} warning(s)")
    else:
        logger.info("Settings check passed")

    return results
