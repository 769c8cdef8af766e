"""
CSV files written by tmdid.

Every file has a header row followed by one comment line:

    time,a1,a2
    # units: s,m/s^2,m/s^2; tmdid=0.1.0; config_sha256=...; seed=7; Ts=0.02

Floats are written with repr() so that reading them back is exact.
"""

import csv
import logging
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from tmdid import __version__
from tmdid.core.models import SignalSeries

logger = logging.getLogger(__name__)

COMMENT = "#"


def format_value(value: Any) -> str:
    """Round-trippable text for a table cell."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    return str(value)


def manifest_line(
    units: Optional[Sequence[str]] = None, manifest: Optional[dict[str, Any]] = None
) -> str:
    """Comment line with units and provenance (version first)."""
    parts = []
    if units:
        parts.append("units: " + ",".join(units))
    items = {"tmdid": __version__}
    items.update(manifest or {})
    parts.extend(f"{key}={format_value(value)}" for key, value in items.items())
    return f"{COMMENT} " + "; ".join(parts)


def parse_manifest(line: str) -> dict[str, str]:
    """Parse a manifest comment line; the units entry is returned under 'units'."""
    body = line.lstrip(COMMENT).strip()
    result: dict[str, str] = {}
    for part in body.split(";"):
        part = part.strip()
        if part.startswith("units:"):
            result["units"] = part[len("units:") :].strip()
        elif "=" in part:
            key, value = part.split("=", 1)
            result[key.strip()] = value.strip()
    return result


def write_table(
    path: Path,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    units: Optional[Sequence[str]] = None,
    manifest: Optional[dict[str, Any]] = None,
) -> Path:
    """
    Write a table with header, manifest comment and rows.

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        f.write(manifest_line(units, manifest) + "\n")
        count = 0
        for row in rows:
            writer.writerow([format_value(v) for v in row])
            count += 1
    logger.debug(f"wrote {count} row(s) to {path}")
    return path


def read_table(path: Path) -> tuple[list[str], list[dict[str, str]], dict[str, str]]:
    """
    Read a table written by `write_table`.

    Returns:
        (header, rows as dicts, manifest)
    """
    header: list[str] = []
    rows: list[dict[str, str]] = []
    manifest: dict[str, str] = {}
    with open(path, newline="") as f:
        for record in csv.reader(f):
            if not record or not "".join(record).strip():
                continue
            if record[0].lstrip().startswith(COMMENT):
                if not manifest:
                    manifest = parse_manifest(",".join(record))
                continue
            if not header:
                header = [h.strip() for h in record]
                continue
            rows.append(dict(zip(header, record)))
    return header, rows, manifest


def write_series(
    path: Path, series: SignalSeries, manifest: Optional[dict[str, Any]] = None
) -> Path:
    """Write a signal with a leading time column."""
    items = dict(manifest or {})
    items["Ts"] = series.ts
    rows = (
        [k * series.ts] + list(series.values[k]) for k in range(series.n_samples)
    )
    return write_table(
        path,
        ["time"] + list(series.labels),
        rows,
        units=["s"] + list(series.units),
        manifest=items,
    )
