import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from multifield.core.exceptions import InputError
from multifield.core.settings import settings
from multifield.models.body import BodyGrid

logger = logging.getLogger(__name__)

INDEX_NAMES = ("i", "j", "k")


class FieldStore:
    """
    Nodal fields as CSV (one node per row) with a JSON header next to it.
    """

    def __init__(self, float_format: Optional[str] = None):
        self.float_format = float_format or settings.FLOAT_FORMAT

    def _format(self, value: float) -> str:
        return format(float(value), self.float_format)

    def save(self, path: Union[str, Path], grid: BodyGrid, values: np.ndarray, name: str = "value",
             manifold: Optional[str] = None) -> Tuple[Path, Path]:
        """
        Write ``<path>.csv`` and ``<path>.json``.

        Args:
            values: Shape ``grid.shape + comps``
            manifold: Manifold tag recorded in the header

        Returns:
            Tuple[Path, Path]: CSV and header paths
        """
        values = np.asarray(values, dtype=float)
        if values.shape[:grid.dim] != grid.shape:
            raise InputError(f"values of shape {values.shape} do not live on grid {grid.shape}", field="values")
        comps = values.reshape(grid.shape + (-1,)).shape[-1]
        flat = values.reshape(grid.node_count, comps)
        coords = grid.coordinates().reshape(grid.node_count, grid.dim)
        indices = np.array(list(np.ndindex(*grid.shape)))

        value_columns = [name] if comps == 1 else [f"{name}_{c}" for c in range(comps)]
        columns = list(INDEX_NAMES[:grid.dim]) + [f"X{a + 1}" for a in range(grid.dim)] + value_columns
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        csv_path, header_path = path.with_suffix(".csv"), path.with_suffix(".json")
        with csv_path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(columns)
            for index, X, row in zip(indices, coords, flat):
                writer.writerow([str(int(i)) for i in index] + [self._format(v) for v in X]
                                + [self._format(v) for v in row])

        rho = grid.rho0.flat[0]
        header = {
            "lower": list(grid.lower),
            "upper": list(grid.upper),
            "shape": list(grid.shape),
            "rho0": float(rho) if np.allclose(grid.rho0, rho) else None,
            "transverse_measure": grid.transverse_measure,
            "manifold": manifold,
            "name": name,
            "value_shape": list(values.shape[grid.dim:]),
            "columns": columns,
        }
        header_path.write_text(json.dumps(header, sort_keys=True, indent=2) + "\n", encoding="utf-8", newline="\n")
        logger.debug(f"Saved field '{name}' with {grid.node_count} nodes to {csv_path}")
        return csv_path, header_path

    def load(self, path: Union[str, Path]) -> Tuple[BodyGrid, np.ndarray, Dict[str, Any]]:
        """
        Read a field written by save().

        Raises:
            InputError: If either file is missing or the rows do not match the header
        """
        path = Path(path)
        csv_path, header_path = path.with_suffix(".csv"), path.with_suffix(".json")
        if not csv_path.is_file() or not header_path.is_file():
            raise InputError(f"field files {csv_path} / {header_path} not found", field="path")
        header = json.loads(header_path.read_text(encoding="utf-8"))
        grid = BodyGrid.box(header["lower"], header["upper"], tuple(header["shape"]),
                            rho0=header["rho0"] if header["rho0"] is not None else 1.0,
                            transverse_measure=header["transverse_measure"])
        with csv_path.open("r", encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            columns = next(reader)
            rows = [row for row in reader]
        if columns != header["columns"] or len(rows) != grid.node_count:
            raise InputError(f"{csv_path} does not match its header", field="path")
        skip = 2 * grid.dim
        values = np.array([[float(v) for v in row[skip:]] for row in rows], dtype=float)
        return grid, values.reshape(grid.shape + tuple(header["value_shape"])), header


# Create singleton instance
field_store = FieldStore()
