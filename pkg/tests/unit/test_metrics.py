"""Unit tests for run scoring."""

import numpy as np
import pytest

from tmdid.core.csvio import read_table
from tmdid.core.models import ValidationError
from tmdid.estimation.adaptive import (
    DetectionEvent,
    DetectionLog,
    IdentificationResult,
)
from tmdid.harness.metrics import compute_metrics, read_metrics, stiffness_deviation

TS = 0.02


def make_result(final=(10908.0, 10000.0), detections=(), n_steps=600):
    """A two-story result holding the nominal prior and a given final estimate."""
    means = np.zeros((n_steps, 6))
    means[:, 4:] = [12000.0, 10000.0]
    means[-1, 4:] = final
    log = DetectionLog(threshold=72.0)
    for step, index in detections:
        log.record(DetectionEvent(step, step * TS, 100.0, index, (10.0, 200.0)))
    innovations = np.full((n_steps, 2), 0.01)
    innovations[0] = 0.0
    return IdentificationResult(
        ts=TS,
        means=means,
        parameter_variances=np.ones((n_steps, 2)),
        gammas=np.zeros(n_steps),
        innovations=innovations,
        log=log,
        identified=(0, 1),
        n_dof=2,
    )


class TestStiffnessDeviation:
    """Tests for stiffness_deviation()."""

    def test_percent(self):
        """Test the deviation is relative to the true value."""
        assert stiffness_deviation(10800.0, 10908.0) == pytest.approx(1.0)
        assert stiffness_deviation(10800.0, 10692.0) == pytest.approx(1.0)

    def test_non_positive_truth(self):
        """Test a non-positive true stiffness is rejected."""
        with pytest.raises(ValidationError):
            stiffness_deviation(0.0, 1.0)


class TestComputeMetrics:
    """Tests for compute_metrics()."""

    def test_deviations(self):
        """Test final deviations per identified story."""
        metrics = compute_metrics(make_result(), [10800.0, 10000.0])
        assert metrics.deviations[0] == pytest.approx(1.0)
        assert metrics.deviations[1] == pytest.approx(0.0)
        assert metrics.true_stiffness == {0: 10800.0, 1: 10000.0}

    def test_latency_and_localization(self):
        """Test a detection after the event is matched with its latency."""
        result = make_result(detections=[(460, 0)])
        metrics = compute_metrics(result, [10800.0, 10000.0], [(0, 9.0)])
        event = metrics.events[0]
        assert event.detected
        assert event.latency == pytest.approx(0.2)
        assert event.localized
        assert metrics.all_detected and metrics.all_localized
        assert metrics.false_positives == 0

    def test_wrong_story(self):
        """Test a detection on the other story is matched but not localized."""
        result = make_result(detections=[(460, 1)])
        metrics = compute_metrics(result, [10800.0, 10000.0], [(0, 9.0)])
        assert metrics.events[0].detected
        assert not metrics.all_localized

    def test_repeats_and_false_positives(self):
        """Test extra detections near an event are repeats, others false positives."""
        result = make_result(detections=[(100, 0), (460, 0), (480, 0), (590, 0)])
        metrics = compute_metrics(result, [10800.0, 10000.0], [(0, 9.0)])
        assert metrics.events[0].detection_time == pytest.approx(9.2)
        assert metrics.repeats == 1
        assert metrics.false_positives == 2

    def test_missed_event(self):
        """Test an event without detections is reported as missed."""
        metrics = compute_metrics(make_result(), [10800.0, 10000.0], [(0, 9.0)])
        assert not metrics.all_detected
        assert metrics.events[0].latency is None

    def test_innovation_rms(self):
        """Test the prior row is excluded from the innovation RMS."""
        metrics = compute_metrics(make_result(), [10800.0, 10000.0])
        assert metrics.innovation_rms == pytest.approx((0.01, 0.01))

    def test_short_truth(self):
        """Test the true stiffness must cover the identified stories."""
        with pytest.raises(ValidationError, match="true stiffness"):
            compute_metrics(make_result(), [10800.0])

    def test_write(self, tmp_path):
        """Test the metrics table uses 1-based story numbers."""
        result = make_result(detections=[(460, 0)])
        metrics = compute_metrics(result, [10800.0, 10000.0], [(0, 9.0)])
        path = metrics.write(tmp_path / "metrics.csv", {"seed": 1})
        header, rows, manifest = read_table(path)
        assert header == ["metric", "story", "value", "unit"]
        deviation = [r for r in rows if r["metric"] == "deviation"]
        assert [r["story"] for r in deviation] == ["1", "2"]
        localized = [r for r in rows if r["metric"] == "localized"]
        assert localized[0]["value"] == "true"
        assert manifest["seed"] == "1"

    def test_read_back(self, tmp_path):
        """Test read_metrics returns the rows Metrics.write produced."""
        metrics = compute_metrics(make_result(), [10800.0, 10000.0])
        path = metrics.write(tmp_path / "metrics.csv")
        rows = read_metrics(path)
        assert len(rows) == len(metrics.rows())
        assert [r["metric"] for r in rows] == [str(row[0]) for row in metrics.rows()]
