"""
Accelerogram and signal records.

Two formats are read:

- "csv": header row `time,<channel>...`, optional `#` comment lines
  (units and manifest as written by tmdid), one sample per row.
- "single": a header line `Ts=<seconds>` (or `dt=`), then one value per
  line.
"""

import logging
import math
from pathlib import Path
from typing import Any, Optional

import numpy as np

from tmdid.core.csvio import COMMENT, parse_manifest, write_series
from tmdid.core.models import RecordFormatError, SignalSeries, ValidationError

logger = logging.getLogger(__name__)

FORMATS = ("csv", "single")
MAX_JITTER = 1e-6


def _parse_float(text: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise RecordFormatError(
            f"cannot parse '{text.strip()}' as a number", line
        ) from None
    if not math.isfinite(value):
        raise RecordFormatError(f"non-finite value '{text.strip()}'", line)
    return value


def _read_csv(
    path: Path,
) -> tuple[np.ndarray, float, list[str], list[str], dict[str, Any]]:
    header: list[str] = []
    manifest: dict[str, str] = {}
    times: list[float] = []
    rows: list[list[float]] = []
    lines: list[int] = []
    with open(path) as f:
        for number, raw in enumerate(f, start=1):
            text = raw.strip()
            if not text:
                continue
            if text.startswith(COMMENT):
                if not manifest:
                    manifest = parse_manifest(text)
                continue
            cells = [c.strip() for c in text.split(",")]
            if not header:
                try:
                    float(cells[0])
                except ValueError:
                    header = cells
                    continue
                header = ["time"] + [f"ch{i}" for i in range(1, len(cells))]
            if len(cells) != len(header):
                raise RecordFormatError(
                    f"expected {len(header)} column(s), got {len(cells)}", number
                )
            values = [_parse_float(c, number) for c in cells]
            times.append(values[0])
            rows.append(values[1:])
            lines.append(number)

    if len(header) < 2:
        raise RecordFormatError("record needs a time column and at least one channel")
    if len(times) < 2:
        raise RecordFormatError("record needs at least two samples")

    units = ["" for _ in header[1:]]
    if "units" in manifest:
        listed = [u.strip() for u in manifest["units"].split(",")]
        if len(listed) == len(header):
            units = listed[1:]

    time = np.array(times)
    ts_hint = manifest.get("Ts")
    ts = _check_uniform(time, lines, float(ts_hint) if ts_hint else None)
    meta: dict[str, Any] = {"source": str(path), "t0": float(time[0])}
    meta.update({k: v for k, v in manifest.items() if k != "units"})
    return np.array(rows), ts, header[1:], units, meta


def _check_uniform(
    time: np.ndarray, lines: list[int], ts_hint: Optional[float]
) -> float:
    steps = np.diff(time)
    if np.any(steps <= 0):
        bad = int(np.argmax(steps <= 0)) + 1
        raise RecordFormatError("time column is not strictly increasing", lines[bad])
    ts = (time[-1] - time[0]) / (len(time) - 1)
    if ts_hint is not None and math.isclose(ts_hint, ts, rel_tol=1e-9):
        ts = ts_hint
    grid = time[0] + np.arange(len(time)) * ts
    jitter = np.abs(time - grid)
    worst = int(np.argmax(jitter))
    if jitter[worst] > MAX_JITTER:
        raise RecordFormatError(
            f"non-uniform sampling: time {time[worst]!r} is {jitter[worst]:.3g} s "
            f"off the {ts:g} s grid",
            lines[worst],
        )
    return float(ts)


def _read_single(path: Path) -> tuple[np.ndarray, float]:
    ts: Optional[float] = None
    values: list[float] = []
    with open(path) as f:
        for number, raw in enumerate(f, start=1):
            text = raw.strip().lstrip(COMMENT).strip()
            if not text:
                continue
            if ts is None:
                key, sep, value = text.partition("=")
                if not sep or key.strip().lower() not in ("ts", "dt"):
                    raise RecordFormatError("expected a 'Ts=<seconds>' header", number)
                ts = _parse_float(value, number)
                if not ts > 0:
                    raise RecordFormatError(f"Ts must be > 0, got {ts}", number)
                continue
            values.append(_parse_float(text, number))
    if ts is None or not values:
        raise RecordFormatError("record is empty")
    return np.array(values)[:, np.newaxis], ts


def resample(series: SignalSeries, target_ts: float) -> SignalSeries:
    """Linear interpolation onto a new uniform grid over the same time span."""
    if not target_ts > 0:
        raise ValidationError(f"target ts must be > 0, got {target_ts}")
    if math.isclose(series.ts, target_ts, rel_tol=1e-12):
        return series
    end = (series.n_samples - 1) * series.ts
    count = int(math.floor(end / target_ts + 1e-9)) + 1
    new_time = np.arange(count) * target_ts
    values = np.column_stack(
        [
            np.interp(new_time, series.time, series.values[:, i])
            for i in range(series.n_channels)
        ]
    )
    meta = dict(series.meta)
    meta["resampled_from"] = series.ts
    return series.replace_values(values, ts=target_ts, meta=meta)


def load_record(
    path: Path, fmt: str = "csv", target_ts: Optional[float] = None
) -> SignalSeries:
    """
    Load a record and validate uniform sampling.

    Args:
        path: File to read
        fmt: "csv" (time column plus channels) or "single"
        target_ts: Resample to this sampling time when given

    Returns:
        SignalSeries (time offset of the first sample is kept in meta["t0"])

    Raises:
        RecordFormatError: Unparseable rows or non-uniform sampling,
            reported with the file line
        ValidationError: Unknown format
    """
    path = Path(path)
    if fmt not in FORMATS:
        raise ValidationError(
            f"unknown record format '{fmt}' (use {', '.join(FORMATS)})"
        )
    if not path.exists():
        raise ValidationError(f"record not found: {path}")

    if fmt == "csv":
        values, ts, labels, units, meta = _read_csv(path)
        series = SignalSeries(
            values=values, ts=ts, labels=tuple(labels), units=tuple(units), meta=meta
        )
    else:
        values, ts = _read_single(path)
        series = SignalSeries(
            values=values,
            ts=ts,
            labels=("ag",),
            units=("m/s^2",),
            meta={"source": str(path)},
        )

    logger.info(
        f"loaded {series.n_samples} sample(s) x {series.n_channels} channel(s) "
        f"at ts={series.ts:g} s from {path}"
    )
    if target_ts is not None:
        series = resample(series, target_ts)
    return series


def write_record(
    path: Path, series: SignalSeries, manifest: Optional[dict[str, Any]] = None
) -> Path:
    """Write a record in the csv format read by `load_record`."""
    return write_series(path, series, manifest)
