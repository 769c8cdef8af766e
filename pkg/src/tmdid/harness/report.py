"""
Human-readable summary of a run directory.
"""

import logging
from pathlib import Path
from typing import Optional

import yaml

from tmdid.core.csvio import read_table
from tmdid.core.models import ValidationError
from tmdid.harness.metrics import read_metrics

logger = logging.getLogger(__name__)

SWEEP_FILES = ("covariance_sweep.csv", "model_sweep.csv")


def _number(text: Optional[str]) -> Optional[float]:
    if text is None or text == "":
        return None
    return float(text)


def _format_manifest(run_dir: Path) -> list[str]:
    path = run_dir / "manifest.yaml"
    if not path.exists():
        return ["Simulation: (no manifest.yaml, identified from external records)"]
    with open(path) as f:
        document = yaml.safe_load(f) or {}
    lines = [
        f"Config: sha256 {str(document.get('config_sha256', '?'))[:12]}..., "
        f"seed {document.get('seed', '?')}",
        f"Samples: {document.get('samples', '?')} at Ts="
        f"{document.get('sampling_time', '?')} s",
        f"Sensors: {', '.join(document.get('sensors', [])) or '-'}",
    ]
    damage = document.get("damage", [])
    if damage:
        for event in damage:
            lines.append(
                f"Damage: story {event['story']} -> {event['stiffness']:.1f} N/m "
                f"at t={event['time']:.3f} s"
            )
    else:
        lines.append("Damage: none")
    return lines


def _format_detections(run_dir: Path) -> list[str]:
    path = run_dir / "detections.csv"
    if not path.exists():
        return []
    _, rows, manifest = read_table(path)
    lines = [f"Detections (threshold {float(manifest.get('threshold', 'nan')):.2f}):"]
    if not rows:
        lines.append("  none")
    for i, row in enumerate(rows, start=1):
        lines.append(
            f"  {i:2d}: t={float(row['time']):7.3f} s  gamma={float(row['gamma']):9.2f}"
            f"  story {row['story']}"
        )
    return lines


def _format_metrics(run_dir: Path) -> list[str]:
    path = run_dir / "metrics.csv"
    if not path.exists():
        return []
    rows = read_metrics(path)
    lines = []
    stiffness = {}
    for row in rows:
        if row["metric"] in ("final_stiffness", "true_stiffness", "deviation"):
            entry = stiffness.setdefault(row["story"], {})
            entry[row["metric"]] = _number(row["value"])
    for story, values in stiffness.items():
        lines.append(
            f"Story {story}: k_hat={values.get('final_stiffness', 0):.1f} N/m, "
            f"k={values.get('true_stiffness', 0):.1f} N/m, "
            f"deviation {values.get('deviation', 0):.4f}%"
        )

    events = [r for r in rows if r["metric"] == "latency"]
    localized = {r["story"]: r["value"] for r in rows if r["metric"] == "localized"}
    for row in events:
        latency = _number(row["value"])
        if latency is None:
            lines.append(f"Event story {row['story']}: MISSED")
        else:
            correct = localized.get(row["story"]) == "true"
            status = "localized" if correct else "WRONG STORY"
            lines.append(
                f"Event story {row['story']}: detected after {latency:.2f} s, {status}"
            )
    for row in rows:
        if row["metric"] == "false_positives":
            lines.append(f"False positives: {row['value']}")
    return lines


def _format_sweeps(run_dir: Path) -> list[str]:
    lines = []
    for name in SWEEP_FILES:
        path = run_dir / name
        if not path.exists():
            continue
        _, rows, _ = read_table(path)
        lines.append(f"{name}:")
        lines.append(
            f"  {'variant':8s} {'p0':>8s} {'q':>8s} {'order':>5s} {'story':>5s} "
            f"{'k_final':>10s} {'dev %':>10s}"
        )
        for row in rows:
            final = _number(row["final_stiffness"])
            deviation = _number(row["deviation"])
            lines.append(
                f"  {row['variant']:8s} {float(row['p0']):8.0e} {float(row['q']):8.0e} "
                f"{row['order']:>5s} {row['story']:>5s} "
                + (
                    f"{final:10.1f} {deviation:10.5f}"
                    if final is not None
                    else f"{'-':>10s} {row['status']:>10s}"
                )
            )
    return lines


def render_report(run_dir: Path) -> str:
    """
    Format a run directory as a summary.

    Raises:
        ValidationError: If the directory holds no tmdid output
    """
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise ValidationError(f"run directory not found: {run_dir}")

    lines = [f"Run Report: {run_dir.name}", "=" * 40]
    lines.extend(_format_manifest(run_dir))

    sections = [_format_detections(run_dir), _format_metrics(run_dir)]
    sections.append(_format_sweeps(run_dir))
    found = [s for s in sections if s]
    if not found and not (run_dir / "manifest.yaml").exists():
        raise ValidationError(f"no tmdid output in {run_dir}")
    for section in found:
        lines.append("")
        lines.extend(section)
    return "\n".join(lines)
