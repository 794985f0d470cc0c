import json
import logging
from importlib import resources
from pathlib import Path
from typing import Dict, List, Union

from pydantic import ValidationError as PydanticValidationError

from multifield.core.exceptions import ScenarioSchemaError
from multifield.repositories.base import BaseRegistry
from multifield.schemas.scenario import Scenario

logger = logging.getLogger(__name__)


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    """
    Parse and validate a scenario document.

    Raises:
        ScenarioSchemaError: With line/column for JSON errors and the field path for schema errors
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioSchemaError(f"{source}: {e.msg}", location=f"line {e.lineno}, column {e.colno}")
    try:
        return Scenario.model_validate(data)
    except PydanticValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"]) or "<root>"
        details = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()
        )
        raise ScenarioSchemaError(f"{source}: {details}", location=location)


class ScenarioRepository(BaseRegistry[Path]):
    """
    Catalog of the bundled scenario files, keyed by scenario name.
    """

    def __init__(self, package: str = "multifield.scenarios"):
        super().__init__("scenario")
        self.package = package
        self._loaded = False

    def _discover(self):
        if self._loaded:
            return
        root = resources.files(self.package)
        for entry in sorted(root.iterdir(), key=lambda p: p.name):
            if not entry.name.endswith(".json"):
                continue
            path = Path(str(entry))
            scenario = self.load(path)
            self.register(scenario.name, path, description=scenario.description, replace=True)
        self._loaded = True
        logger.debug(f"Discovered {len(self.tags())} bundled scenarios")

    def get(self, tag: str) -> Path:
        self._discover()
        return super().get(tag)

    def tags(self) -> List[str]:
        self._discover()
        return super().tags()

    def catalog(self) -> Dict[str, str]:
        self._discover()
        return super().catalog()

    def load(self, path: Union[str, Path]) -> Scenario:
        """
        Load a scenario file.

        Raises:
            ScenarioSchemaError: If the file is missing, malformed or schema-invalid
        """
        path = Path(path)
        if not path.is_file():
            raise ScenarioSchemaError(f"scenario file {path} does not exist", location=str(path))
        return parse_scenario(path.read_text(encoding="utf-8"), source=path.name)

    def resolve(self, name_or_path: str) -> Scenario:
        """Bundled scenario by name, or a scenario file by path."""
        path = Path(name_or_path)
        if path.suffix == ".json" or path.exists():
            return self.load(path)
        return self.load(self.get(name_or_path))


# Create singleton instance
scenario_repository = ScenarioRepository()
