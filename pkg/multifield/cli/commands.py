import json
import logging
import sys
from pathlib import Path
from typing import Optional, TextIO

from multifield.core.exceptions import AppException
from multifield.core.settings import settings
from multifield.core.settings_checker import check_settings_at_startup
from multifield.repositories.report_store import report_store
from multifield.repositories.scenario import scenario_repository
from multifield.schemas.scenario import Scenario
from multifield.services.scenario import scenario_service

logger = logging.getLogger(__name__)

# ------------------------------
# RUN
# ------------------------------

def run_command(config: str, out: Optional[str] = None, strict: bool = False, seed: Optional[int] = None,
                stream: TextIO = sys.stdout) -> int:
    """
    Run a scenario file (or a bundled scenario by name) and write its reports.

    Returns:
        int: 0 on success, 1 on validation failures, 2 on numerical or task failures
    """
    checks = check_settings_at_startup(settings)
    if not checks["passed"] and (strict or settings.STRICT_VALIDATION):
        for error in checks["errors"]:
            print(f"settings error: {error}", file=sys.stderr)
        return 1

    try:
        scenario = scenario_repository.resolve(config)
    except AppException as e:
        logger.error(f"Cannot load scenario {config}: {e.message}")
        print(f"error [{e.code}]: {e.message}", file=sys.stderr)
        return e.exit_code

    out_dir = Path(out or scenario.output_dir or Path(settings.OUTPUT_DIR) / scenario.name)
    summary = scenario_service.run(scenario, out_dir=out_dir, strict=True if strict else None, seed=seed)

    for task in summary.tasks:
        line = f"{task.name:<32} {task.kind:<18} {task.status.value}"
        if task.error is not None:
            line += f"  [{task.error.code}] {task.error.message}"
        print(line, file=stream)
    print(f"reports written to {out_dir}", file=stream)
    return summary.exit_code

# ------------------------------
# LIST
# ------------------------------

def list_command(stream: TextIO = sys.stdout) -> int:
    """Print the bundled scenarios, sorted by name."""
    try:
        catalog = scenario_repository.catalog()
    except AppException as e:
        print(f"error [{e.code}]: {e.message}", file=sys.stderr)
        return e.exit_code
    for name in sorted(catalog):
        print(f"{name:<28} {catalog[name]}", file=stream)
    return 0

# ------------------------------
# EXPORT
# ------------------------------

def export_command(report: str, series: str, out: Optional[str] = None, stream: TextIO = sys.stdout) -> int:
    """Write one report series as CSV to ``out`` or to the stream."""
    try:
        text = report_store.export_series(report, series, out)
    except AppException as e:
        print(f"error [{e.code}]: {e.message}", file=sys.stderr)
        return e.exit_code
    if out is None:
        stream.write(text)
    else:
        logger.info(f"Exported series '{series}' to {out}")
    return 0

# ------------------------------
# SCHEMA
# ------------------------------

def schema_command(stream: TextIO = sys.stdout) -> int:
    """Print the JSON schema of scenario files."""
    stream.write(json.dumps(Scenario.model_json_schema(), sort_keys=True, indent=2) + "\n")
    return 0
