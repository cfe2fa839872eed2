"""
Utility functions for reading and writing records, CSV tables and radial tables.
"""
import csv
import json
import logging
import os
from typing import Dict, Iterable, List, Sequence, Type, TypeVar

import numpy as np
from pydantic import BaseModel, ValidationError

from ..geometry.errors import AdmissionError
from ..geometry.metric import RadialMetric
from ..schemas.models import RadialMetricHeader

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)


def save_record(record: BaseModel, path: str) -> str:
    """
    Write a pydantic record as indented JSON.

    Args:
        record: Any pydantic model
        path: Output file

    Returns:
        The path written
    """
    with open(path, "w") as handle:
        handle.write(record.model_dump_json(indent=2))
        handle.write("\n")
    logger.debug(f"Wrote record {path}")
    return path


def load_record(model: Type[ModelT], path: str) -> ModelT:
    """Read a JSON record back into ``model``."""
    with open(path) as handle:
        return model.model_validate_json(handle.read())


def write_csv(rows: Sequence[Dict[str, object]], path: str, columns: Sequence[str] = ()) -> str:
    """
    Write dict rows as RFC-4180 CSV (header from ``columns`` or the union of keys).

    Args:
        rows: Rows to write
        path: Output file
        columns: Explicit column order

    Returns:
        The path written
    """
    if not columns:
        seen: List[str] = []
        for row in rows:
            seen.extend(key for key in row if key not in seen)
        columns = seen
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(columns), extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _cell(row.get(key)) for key in columns})
    logger.debug(f"Wrote {len(rows)} rows to {path}")
    return path


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def read_csv(path: str) -> List[Dict[str, str]]:
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))


def _write_columns(path: str, header: Dict[str, object], columns: Iterable[np.ndarray]) -> str:
    with open(path, "w") as handle:
        handle.write("# " + json.dumps(header, sort_keys=True) + "\n")
        for values in zip(*columns):
            handle.write(" ".join(repr(float(v)) for v in values) + "\n")
    return path


def _read_columns(path: str, width: int):
    with open(path) as handle:
        first = handle.readline()
        if not first.startswith("#"):
            raise AdmissionError("table_header", f"{path} has no '#' header line")
        header = json.loads(first[1:])
        rows = [line.split() for line in handle if line.strip()]
    if any(len(row) != width for row in rows):
        raise AdmissionError("table_shape", f"{path}: every row needs {width} columns")
    try:
        data = np.array(rows, dtype=float).reshape(-1, width)
    except ValueError as e:
        raise AdmissionError("table_values", f"{path}: {e}") from e
    return header, data


def save_radial_metric(g: RadialMetric, path: str) -> str:
    """Columnar ``r A B`` table with a JSON header (n, R_flat, p, inner)."""
    return _write_columns(path, g.header().model_dump(), (g.r, g.A, g.B))


def load_radial_metric(path: str) -> RadialMetric:
    """
    Read a ``r A B`` table.

    Raises:
        AdmissionError: malformed header or samples violating a metric invariant
    """
    header, data = _read_columns(path, 3)
    try:
        meta = RadialMetricHeader.model_validate(header)
    except ValidationError as e:
        raise AdmissionError("table_header", f"{path}: {e}") from e
    return RadialMetric(n=meta.n, r=data[:, 0], A=data[:, 1], B=data[:, 2],
                        p=meta.p, R_flat=meta.R_flat, inner=meta.inner)


def save_radial_solution(r: np.ndarray, u: np.ndarray, path: str, **meta) -> str:
    """Columnar ``r u`` table."""
    return _write_columns(path, meta, (r, u))


def load_radial_solution(path: str):
    header, data = _read_columns(path, 2)
    return header, data[:, 0], data[:, 1]


def output_path(directory: str, *parts: str) -> str:
    os.makedirs(directory, exist_ok=True)
    return os.path.join(directory, *parts)
