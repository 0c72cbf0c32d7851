import logging
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from weakident.constants import FORMAT_VERSION, HEADER_SUFFIX, PAYLOAD_SUFFIX
from weakident.exceptions import (
    DatasetFormatError,
    InvalidGrid,
    NonFiniteData,
    SizeMismatch,
)
from weakident.models import GridSpec, ObservationSet
from weakident.types import DatasetPath
from weakident.utils import format_key_value, parse_key_value

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

PAYLOAD_DTYPE = "<f8"
required_keys = (
    "format_version",
    "num_vars",
    "spatial_dims",
    "nt",
    "dt",
    "variables",
)


def header_path(path: DatasetPath, name: Optional[str] = None) -> Path:
    """Resolve a header path from a header file or a directory."""
    path = Path(path)
    if path.suffix == HEADER_SUFFIX:
        return path
    return path / f"{name or 'data'}{HEADER_SUFFIX}"


def payload_path(header: Path, variable: str) -> Path:
    return header.with_name(f"{header.stem}.{variable}{PAYLOAD_SUFFIX}")


def _join(values) -> str:
    return ",".join(
        repr(float(v)) if isinstance(v, float) else str(v) for v in values
    )


def save_dataset(
    data: ObservationSet, path: DatasetPath, name: Optional[str] = None
) -> Path:
    """Write ``data`` as a WIDENT1 header plus one payload per variable.

    Args:
        data (ObservationSet): Observations to write.
        path (DatasetPath): Header file (``*.widh``) or a directory.
        name (str): Dataset name when ``path`` is a directory.

    Returns:
        Path: The header file written.
    """
    header = header_path(path, name)
    header.parent.mkdir(parents=True, exist_ok=True)
    grid = data.grid
    entries = {
        "format_version": FORMAT_VERSION,
        "name": header.stem,
        "num_vars": str(data.num_vars),
        "spatial_dims": str(grid.spatial_dims),
        "nt": str(grid.nt),
        "dt": repr(float(grid.dt)),
        "t0": repr(float(grid.t0)),
        "nx": _join(grid.nx),
        "dx": _join(grid.dx),
        "x0": _join(grid.x0),
        "variables": ",".join(data.names),
    }
    header.write_text(format_key_value(entries), encoding="utf-8")
    for variable, values in zip(data.names, data.values):
        np.ascontiguousarray(values, dtype=PAYLOAD_DTYPE).tofile(
            payload_path(header, variable)
        )
    logger.info(f"Wrote dataset {header}")
    return header


def _split(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _parse_header(header: Path) -> Dict[str, str]:
    try:
        entries = parse_key_value(header.read_text(encoding="utf-8"))
    except ValueError as e:
        raise DatasetFormatError(header, str(e)) from e
    except UnicodeDecodeError as e:
        raise DatasetFormatError(header, "header is not UTF-8 text") from e
    missing = [key for key in required_keys if key not in entries]
    if missing:
        raise DatasetFormatError(header, f"missing keys {missing}")
    if entries["format_version"] != FORMAT_VERSION:
        raise DatasetFormatError(
            header, f"unsupported format {entries['format_version']!r}"
        )
    return entries


def load_dataset(path: DatasetPath) -> ObservationSet:
    """Read a WIDENT1 dataset.

    Raises:
        DatasetFormatError: Malformed header.
        SizeMismatch: A payload length differs from the declared grid.
        NonFiniteData: A payload contains NaN or infinity.
    """
    header = header_path(path)
    if not header.is_file():
        raise FileNotFoundError(f"No dataset header at {header}")
    entries = _parse_header(header)
    try:
        num_vars = int(entries["num_vars"])
        spatial_dims = int(entries["spatial_dims"])
        names = _split(entries["variables"])
        grid = GridSpec(
            nt=int(entries["nt"]),
            dt=float(entries["dt"]),
            nx=tuple(int(v) for v in _split(entries.get("nx", ""))),
            dx=tuple(float(v) for v in _split(entries.get("dx", ""))),
            t0=float(entries.get("t0", 0.0)),
            x0=tuple(float(v) for v in _split(entries.get("x0", ""))),
        )
    except (ValueError, InvalidGrid) as e:
        raise DatasetFormatError(header, str(e)) from e
    if grid.spatial_dims != spatial_dims:
        raise DatasetFormatError(
            header,
            f"spatial_dims = {spatial_dims} but {grid.spatial_dims} axes",
        )
    if len(names) != num_vars:
        raise DatasetFormatError(
            header, f"num_vars = {num_vars} but {len(names)} variable names"
        )

    expected = int(np.prod(grid.shape))
    values = []
    for name in names:
        payload = payload_path(header, name)
        if not payload.is_file():
            raise DatasetFormatError(payload, "payload file is missing")
        if payload.stat().st_size % 8:
            raise SizeMismatch(payload, expected, payload.stat().st_size / 8)
        array = np.fromfile(payload, dtype=PAYLOAD_DTYPE)
        if array.size != expected:
            raise SizeMismatch(payload, expected, array.size)
        if not np.all(np.isfinite(array)):
            raise NonFiniteData(payload)
        values.append(array.reshape(grid.shape).astype(float))
    logger.info(f"Loaded dataset {header} with shape {grid.shape}")
    return ObservationSet(grid, values, names)
