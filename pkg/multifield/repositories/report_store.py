import csv
import io
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from multifield.core.exceptions import InputError, SelectorError
from multifield.core.settings import settings
from multifield.schemas.reports import RunMetadata, ScenarioSummary, Series

logger = logging.getLogger(__name__)

SUMMARY_FILE = "summary.json"
METADATA_FILE = "metadata.json"


def _dump(data) -> str:
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


class ReportStore:
    """
    Scenario reports: JSON summary, separate metadata and one CSV per series.
    """

    def __init__(self, float_format: Optional[str] = None):
        self.float_format = float_format or settings.FLOAT_FORMAT

    def _cell(self, value) -> str:
        return "" if value is None else format(float(value), self.float_format)

    def series_csv(self, series: Series) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(series.columns)
        for row in series.rows:
            writer.writerow([self._cell(v) for v in row])
        return buffer.getvalue()

    def write(self, out_dir: Union[str, Path], summary: ScenarioSummary,
              metadata: Optional[RunMetadata] = None) -> List[Path]:
        """Write summary.json, metadata.json and ``<task>__<series>.csv`` tables."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        path = out_dir / SUMMARY_FILE
        path.write_text(_dump(summary.model_dump(mode="json")), encoding="utf-8", newline="\n")
        written.append(path)
        if metadata is not None:
            path = out_dir / METADATA_FILE
            path.write_text(_dump(metadata.model_dump(mode="json")), encoding="utf-8", newline="\n")
            written.append(path)
        for task in summary.tasks:
            for name, series in sorted(task.series.items()):
                path = out_dir / f"{task.name}__{name}.csv"
                path.write_text(self.series_csv(series), encoding="utf-8", newline="\n")
                written.append(path)
        logger.info(f"Wrote {len(written)} report files to {out_dir}")
        return written

    def load_summary(self, path: Union[str, Path]) -> ScenarioSummary:
        path = Path(path)
        if path.is_dir():
            path = path / SUMMARY_FILE
        if not path.is_file():
            raise InputError(f"report {path} does not exist", field="report")
        return ScenarioSummary.model_validate_json(path.read_text(encoding="utf-8"))

    def available_series(self, summary: ScenarioSummary) -> Dict[str, Tuple[str, Series]]:
        """Selectors ``task/series``, plus bare ``series`` names that are unique."""
        qualified = {f"{task.name}/{name}": (task.name, series)
                     for task in summary.tasks for name, series in task.series.items()}
        bare: Dict[str, List[Tuple[str, Series]]] = {}
        for key, entry in qualified.items():
            bare.setdefault(key.split("/", 1)[1], []).append(entry)
        selectors = dict(qualified)
        selectors.update({name: entries[0] for name, entries in bare.items() if len(entries) == 1})
        return selectors

    def export_series(self, report: Union[str, Path], selector: str,
                      out_path: Optional[Union[str, Path]] = None) -> str:
        """
        CSV text of one series, optionally written to ``out_path``.

        Raises:
            SelectorError: If the report has no such series
        """
        summary = self.load_summary(report)
        selectors = self.available_series(summary)
        if selector not in selectors:
            raise SelectorError(selector, list(selectors))
        text = self.series_csv(selectors[selector][1])
        if out_path is not None:
            out_path = Path(out_path)
            out_path.parent.mkdir(parents=True, exist_ok=True)
            out_path.write_text(text, encoding="utf-8", newline="\n")
        return text


# Create singleton instance
report_store = ReportStore()
