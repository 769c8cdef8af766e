"""
Scoring of an identification run against the true response.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from tmdid.core.csvio import read_table, write_table
from tmdid.core.models import ValidationError
from tmdid.estimation.adaptive import IdentificationResult

logger = logging.getLogger(__name__)

# Detections later than this after an event count as false positives
DEFAULT_MATCH_WINDOW = 2.0


def stiffness_deviation(true: float, estimate: float) -> float:
    """|k - k_hat| / k in percent."""
    if not true > 0:
        raise ValidationError(f"true stiffness must be > 0, got {true}")
    return abs(true - estimate) / true * 100.0


@dataclass
class EventOutcome:
    """One realized damage event and the detection matched to it."""

    story: int
    damage_time: float
    detection_time: Optional[float] = None
    localized_story: Optional[int] = None

    @property
    def detected(self) -> bool:
        return self.detection_time is not None

    @property
    def latency(self) -> Optional[float]:
        if self.detection_time is None:
            return None
        return self.detection_time - self.damage_time

    @property
    def localized(self) -> bool:
        return self.localized_story == self.story


@dataclass
class Metrics:
    """Scores of one run.

    Attributes:
        true_stiffness: Final true stiffness per identified story [N/m]
        final_stiffness: Final estimate per identified story [N/m]
        deviations: Final deviation per identified story [%]
        events: Realized events with their matched detections
        false_positives: Detections not explained by any event
        repeats: Extra detections within the window of a matched event
        innovation_rms: RMS of the innovation per sensor channel
    """

    true_stiffness: dict[int, float]
    final_stiffness: dict[int, float]
    deviations: dict[int, float]
    events: list[EventOutcome] = field(default_factory=list)
    false_positives: int = 0
    repeats: int = 0
    innovation_rms: tuple[float, ...] = ()

    @property
    def all_detected(self) -> bool:
        return all(e.detected for e in self.events)

    @property
    def all_localized(self) -> bool:
        return all(e.localized for e in self.events)

    def rows(self) -> list[tuple[str, Any, Any, str]]:
        """Tidy rows (metric, story, value, unit); stories are 1-based."""
        rows: list[tuple[str, Any, Any, str]] = []
        for story, value in self.deviations.items():
            number = story + 1
            rows.append(("final_stiffness", number, self.final_stiffness[story], "N/m"))
            rows.append(("true_stiffness", number, self.true_stiffness[story], "N/m"))
            rows.append(("deviation", number, value, "%"))
        for event in self.events:
            rows.append(("damage_time", event.story + 1, event.damage_time, "s"))
            rows.append(("latency", event.story + 1, event.latency, "s"))
            rows.append(("localized", event.story + 1, event.localized, ""))
        rows.append(("false_positives", None, self.false_positives, ""))
        rows.append(("repeats", None, self.repeats, ""))
        for i, value in enumerate(self.innovation_rms):
            rows.append((f"innovation_rms_{i + 1}", None, value, ""))
        return rows

    def write(self, path: Path, manifest: Optional[dict[str, Any]] = None) -> Path:
        return write_table(
            path,
            ["metric", "story", "value", "unit"],
            self.rows(),
            manifest=manifest,
        )


def read_metrics(path: Path) -> list[dict[str, str]]:
    """Rows of a metrics.csv written by `Metrics.write`."""
    _, rows, _ = read_table(path)
    return rows


def compute_metrics(
    result: IdentificationResult,
    true_final: Sequence[float],
    damage_times: Sequence[tuple[int, float]] = (),
    window: float = DEFAULT_MATCH_WINDOW,
) -> Metrics:
    """
    Score an identification run.

    Args:
        result: Identification histories and detection log
        true_final: Final true stiffness of every story [N/m]
        damage_times: (story, time) of the realized events, in firing order
        window: Matching window after each event [s]

    Returns:
        Metrics

    Raises:
        ValidationError: If true_final does not cover the identified stories
    """
    true_final = np.asarray(true_final, dtype=float)
    if any(s >= true_final.size for s in result.identified):
        raise ValidationError(
            f"true stiffness has {true_final.size} entries, identified stories "
            f"are {tuple(s + 1 for s in result.identified)}"
        )
    estimates = result.final_stiffness
    true_k = {s: float(true_final[s]) for s in result.identified}
    final_k = {s: float(estimates[i]) for i, s in enumerate(result.identified)}
    deviations = {
        s: stiffness_deviation(true_k[s], final_k[s]) for s in result.identified
    }

    # half a sample of slack for events that fire between samples
    slack = result.ts / 2.0
    outcomes = [EventOutcome(story=s, damage_time=t) for s, t in damage_times]
    false_positives = 0
    repeats = 0
    for detection in result.log.events:
        story = result.identified[detection.index]
        preceding = [
            o for o in outcomes if o.damage_time - slack <= detection.time
        ]
        recent = [
            o for o in preceding if detection.time - o.damage_time <= window
        ]
        pending = [o for o in recent if not o.detected]
        if pending:
            # prefer an unmatched event on the localized story
            match = next((o for o in pending if o.story == story), pending[0])
            match.detection_time = detection.time
            match.localized_story = story
        elif recent:
            repeats += 1
        else:
            false_positives += 1

    valid = result.innovations[1:]
    innovation_rms = (
        tuple(np.sqrt(np.mean(valid**2, axis=0)).tolist()) if len(valid) else ()
    )
    metrics = Metrics(
        true_stiffness=true_k,
        final_stiffness=final_k,
        deviations=deviations,
        events=outcomes,
        false_positives=false_positives,
        repeats=repeats,
        innovation_rms=innovation_rms,
    )
    logger.info(
        "metrics: deviations %s %%, %d/%d event(s) detected, %d false positive(s)",
        {s + 1: round(v, 4) for s, v in deviations.items()},
        sum(e.detected for e in outcomes),
        len(outcomes),
        false_positives,
    )
    return metrics
