"""Full-length study runs on the shipped configs.

These take tens of seconds each; deselect with -m "not slow".
"""

from pathlib import Path

import pytest

from tmdid.core.config import load_config
from tmdid.harness.runner import run_identify
from tmdid.harness.sweeps import SweepCell, run_cell, sweep_model

STUDY_DIR = Path(__file__).resolve().parents[2] / "config" / "studies"

pytestmark = pytest.mark.slow


def load_study(name, tmp_path, monkeypatch):
    monkeypatch.delenv("TMDID_LOG_LEVEL", raising=False)
    monkeypatch.delenv("TMDID_WORKERS", raising=False)
    config = load_config(STUDY_DIR / name)
    config.output_dir = tmp_path / Path(name).stem
    return config


@pytest.fixture
def study1(tmp_path, monkeypatch):
    return load_study("study1_white_noise.yaml", tmp_path, monkeypatch)


@pytest.fixture
def study2(tmp_path, monkeypatch):
    return load_study("study2_covariance.yaml", tmp_path, monkeypatch)


@pytest.fixture(scope="module")
def model_deviations(tmp_path_factory):
    """k1 deviation [%] of the model study keyed by (variant, order, q)."""
    with pytest.MonkeyPatch.context() as mp:
        tmp_path = tmp_path_factory.mktemp("study3")
        rows = sweep_model(load_study("study3_model.yaml", tmp_path, mp))
    return {(row[0], row[3], row[2]): row[8] for row in rows if row[4] == 1}


class TestWhiteNoiseDamage:
    """Tests for the white-noise damage study."""

    def test_both_drops(self, study1):
        """Test both 10% drops are found quickly on their stories and tracked."""
        metrics = run_identify(study1).metrics
        assert metrics.all_detected
        assert metrics.all_localized
        assert all(event.latency <= 0.5 for event in metrics.events)
        assert metrics.false_positives == 0
        assert max(metrics.deviations.values()) <= 2.0

    @pytest.mark.parametrize("event", [0, 1])
    def test_single_drop(self, study1, event):
        """Test a drop on one story alone is flagged on that story."""
        config = study1.copy(damage=[study1.damage[event]])
        metrics = run_identify(config).metrics
        assert len(metrics.events) == 1
        outcome = metrics.events[0]
        assert outcome.story == event
        assert outcome.localized
        assert outcome.latency <= 0.5

    @pytest.mark.parametrize("seed", range(11, 21))
    def test_undamaged_runs_stay_quiet(self, study1, seed):
        """Test undamaged runs never exceed the threshold."""
        config = study1.copy(seed=seed, damage=[])
        output = run_identify(config)
        assert output.result.gammas.max() < output.result.threshold
        assert len(output.result.log) == 0
        assert max(output.metrics.deviations.values()) < 1.0


def k1_deviation(rows):
    """Deviation [%] of the first story from the rows of one cell."""
    return next(row[8] for row in rows if row[4] == 1)


class TestCovarianceStudy:
    """Tests for the initial covariance study."""

    def cell(self, config, variant, p0):
        cell = SweepCell(variant, p0, config.filter.q, config.filter.taylor_order)
        return k1_deviation(run_cell(config, cell))

    def test_tmd_needs_large_covariance(self, study2):
        """Test the TMD frame is still far off after 60 s at P0 = 1e-8."""
        assert self.cell(study2, "tmd", 1e-8) > 10.0

    def test_tmd_converges(self, study2):
        """Test the TMD frame converges from P0 = 1e-4."""
        assert self.cell(study2, "tmd", 1e-4) < 2.0

    def test_bare_converges_from_small_covariance(self, study2):
        """Test the bare frame converges even from P0 = 1e-8."""
        assert self.cell(study2, "bare", 1e-8) < 5.0


class TestModelStudy:
    """Tests for the Taylor order and process noise study."""

    def test_first_order_bare_large_q(self, model_deviations):
        """Test the first-order bare model is accurate for Q >= 1e-9."""
        for q in (1e-8, 1e-9):
            assert model_deviations[("bare", 1, q)] < 0.001

    @pytest.mark.parametrize("variant", ["bare", "tmd"])
    @pytest.mark.parametrize("order", [2, 3, 4])
    def test_higher_orders_ignore_q(self, model_deviations, variant, order):
        """Test higher orders give the same deviation for every Q."""
        values = [
            value
            for (var, o, _), value in model_deviations.items()
            if (var, o) == (variant, order)
        ]
        assert len(values) == 8
        assert max(values) - min(values) < 0.01

    def test_first_order_tmd_needs_q(self, model_deviations):
        """Test the first-order TMD model is worse with too little process noise."""
        assert model_deviations[("tmd", 1, 1e-14)] > model_deviations[("tmd", 1, 1e-9)]
