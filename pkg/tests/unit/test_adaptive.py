"""Unit tests for detection, localization and covariance adaptation."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from tmdid.core.models import Sensor, SensorLayout, SensorType, ValidationError
from tmdid.estimation.adaptive import (
    DEFAULT_Z0,
    AdaptationConfig,
    DetectionEvent,
    DetectionLog,
    adapt_covariance,
    localize,
    run_identification,
    threshold,
    trigger,
    z0_from_probability,
)
from tmdid.estimation.model import StructuralFilterModel
from tmdid.estimation.ukf import AugmentedState, FilterConfig, Innovation
from tmdid.simulation.excitation import NoiseSpec, add_noise, white_noise
from tmdid.simulation.truth import DamageEvent, DamageSchedule, simulate_truth

TS = 0.02


def innovation(e):
    e = np.asarray(e, dtype=float)
    m = len(e)
    return Innovation(
        e=e, Pyy=np.eye(m), Pxy=np.zeros((1, m)), K_gain=np.zeros((1, m)), y_hat=e
    )


class TestThreshold:
    """Tests for the detection threshold."""

    def test_default_threshold(self):
        """Test two accelerometers with z0 = 3 sqrt(2) give 72."""
        cfg = AdaptationConfig(delta=2, m=2)
        assert cfg.z0 == pytest.approx(DEFAULT_Z0)
        assert threshold(cfg) == pytest.approx(72.0)

    @pytest.mark.parametrize(
        "probability,z0,gamma0",
        [(0.99, 2.576, 26.54), (0.90, 1.645, 10.82)],
    )
    def test_from_probability(self, probability, z0, gamma0):
        """Test thresholds from non-exceedance probabilities."""
        quantile = z0_from_probability(probability)
        assert quantile == pytest.approx(z0, abs=1e-3)
        cfg = AdaptationConfig(delta=2, m=2, z0=quantile)
        assert threshold(cfg) == pytest.approx(gamma0, abs=0.05)

    @pytest.mark.parametrize("probability", [0.0, 1.0, 1.5])
    def test_probability_range(self, probability):
        """Test probabilities outside (0, 1) are rejected."""
        with pytest.raises(ValidationError):
            z0_from_probability(probability)

    def test_displacement_sensors(self):
        """Test displacement sensors use delta = 1."""
        sensors = SensorLayout(
            (Sensor(0, SensorType.DISPLACEMENT), Sensor(1, SensorType.DISPLACEMENT))
        )
        cfg = AdaptationConfig(delta=sensors.delta(), m=sensors.count)
        assert threshold(cfg) == pytest.approx(36.0)

    def test_for_model(self, two_story, accelerometers):
        """Test delta and m are read from the model's sensors."""
        model = StructuralFilterModel(two_story, accelerometers, TS)
        cfg = AdaptationConfig.for_model(model, p_adapt=1e6)
        assert (cfg.delta, cfg.m) == (2, 2)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"delta": 3, "m": 2},
            {"delta": 2, "m": 0},
            {"delta": 2, "m": 2, "z0": 0.0},
            {"delta": 2, "m": 2, "p_adapt": 0.0},
            {"delta": 2, "m": 2, "probe_reduction": 0.6},
            {"delta": 2, "m": 2, "cooldown": -1},
        ],
    )
    def test_invalid(self, kwargs):
        """Test invalid adaptation settings are rejected."""
        with pytest.raises(ValidationError):
            AdaptationConfig(**kwargs)


class TestTrigger:
    """Tests for trigger()."""

    def test_value(self):
        """Test gamma = e^T R^-1 e."""
        gamma = trigger(innovation([0.01, 0.02]), 1e-4 * np.eye(2))
        assert gamma == pytest.approx(5.0)

    def test_scale_invariance(self, rng):
        """Test scaling e by c and R by c^2 leaves gamma unchanged."""
        e = rng.normal(size=2)
        R = np.array([[2e-4, 5e-5], [5e-5, 1e-4]])
        base = trigger(innovation(e), R)
        scaled = trigger(innovation(1000.0 * e), 1e6 * R)
        assert scaled == pytest.approx(base, rel=1e-12)

    def test_indefinite_r(self):
        """Test a non-definite R is rejected."""
        with pytest.raises(ValidationError, match="R is not positive definite"):
            trigger(innovation([1.0, 1.0]), np.diag([1.0, -1.0]))

    @pytest.mark.parametrize("m", [1, 2])
    def test_null_exceedance_rate(self, rng, m):
        """Test undamaged innovations exceed the threshold at most 1 - p of steps."""
        probability = 0.90
        cfg = AdaptationConfig(delta=2, m=m, z0=z0_from_probability(probability))
        R = 1e-4 * np.eye(m)
        # sensor and input noise each contribute R
        samples = rng.multivariate_normal(np.zeros(m), 2.0 * R, size=20000)
        gammas = np.array([trigger(innovation(e), R) for e in samples])
        rate = np.mean(gammas > threshold(cfg))
        if m == 1:
            assert rate == pytest.approx(1.0 - probability, abs=0.01)
        else:
            assert rate <= 1.0 - probability


class TestDetectionLog:
    """Tests for DetectionLog."""

    def test_record(self):
        """Test events above the threshold are kept in order."""
        log = DetectionLog(threshold=72.0)
        log.record(DetectionEvent(10, 0.2, 80.0, 1, (90.0, 30.0)))
        log.record(DetectionEvent(50, 1.0, 72.0, 0, (20.0, 75.0)))
        assert len(log) == 2
        assert log.indices == [1, 0]
        assert log.first_after(0.5).step == 50
        assert log.first_after(2.0) is None

    def test_below_threshold(self):
        """Test an event below the threshold is refused."""
        log = DetectionLog(threshold=72.0)
        with pytest.raises(ValidationError, match="below threshold"):
            log.record(DetectionEvent(10, 0.2, 71.9, 0, ()))


class TestAdaptCovariance:
    """Tests for adapt_covariance()."""

    def test_single_entry(self, rng):
        """Test only the chosen parameter variance changes."""
        root = rng.normal(size=(6, 6))
        cov = root @ root.T
        state = AugmentedState(np.zeros(6), cov, 3, 2, 2)
        adapted = adapt_covariance(state, 1, AdaptationConfig(2, 2, p_adapt=1e6))

        changed = np.argwhere(adapted.covariance != state.covariance)
        assert changed.tolist() == [[5, 5]]
        assert adapted.covariance[5, 5] == 1e6
        assert_allclose(adapted.mean, state.mean)
        assert adapted.step == 3


class TestLocalize:
    """Tests for localize()."""

    @pytest.mark.parametrize("story", [0, 1])
    def test_finds_damaged_story(self, two_story, accelerometers, story):
        """Test the probe on the damaged story explains the measurement best."""
        model = StructuralFilterModel(two_story, accelerometers, TS, "exact")
        filter_cfg = FilterConfig.from_scalars(2, 2, 2, 1e-6, 1e-9, 1e-4)
        adapt_cfg = AdaptationConfig.for_model(model, p_adapt=1e6)

        # equal floor displacements load one story at a time
        kinematic = [0.1, 0.1, 0.0, 0.0] if story == 0 else [0.0, 0.1, 0.0, 0.0]
        nominal = model.nominal_stiffness
        state = AugmentedState(
            np.concatenate([kinematic, nominal]), filter_cfg.P0, 0, 2, 2
        )
        damaged = np.array(nominal)
        damaged[story] *= 0.9
        truth = np.concatenate([kinematic, damaged])[np.newaxis]
        u = np.zeros(2)
        y = model.observe(model.transition(truth, u), u)[0]

        index, gammas = localize(
            state, u, y, u, filter_cfg, adapt_cfg, model.transition, model.observe
        )
        assert index == story
        assert len(gammas) == 2
        assert gammas[story] < gammas[1 - story]

    @pytest.mark.parametrize("story", [0, 1])
    def test_mode_shaped_state(self, two_story, accelerometers, story):
        """Test localization when both stories are strained as in the first mode."""
        model = StructuralFilterModel(two_story, accelerometers, TS, "exact")
        filter_cfg = FilterConfig.from_scalars(2, 2, 2, 1e-6, 1e-9, 1e-4)
        adapt_cfg = AdaptationConfig.for_model(model, p_adapt=1e6)

        kinematic = [0.1, 0.1766, 0.0, 0.0]
        nominal = model.nominal_stiffness
        state = AugmentedState(
            np.concatenate([kinematic, nominal]), filter_cfg.P0, 0, 2, 2
        )
        damaged = np.array(nominal)
        damaged[story] *= 0.9
        truth = np.concatenate([kinematic, damaged])[np.newaxis]
        u = np.zeros(2)
        y = model.observe(model.transition(truth, u), u)[0]

        index, _ = localize(
            state, u, y, u, filter_cfg, adapt_cfg, model.transition, model.observe
        )
        assert index == story


class TestRunIdentification:
    """Tests for run_identification()."""

    @pytest.fixture
    def records(self, two_story, accelerometers):
        excitation = white_noise(10.0, TS, 0.57, seed=3)
        truth = simulate_truth(two_story, DamageSchedule(), excitation)
        measurements = add_noise(truth.outputs, NoiseSpec(0.01, seed=4))
        inputs = add_noise(excitation, NoiseSpec(0.01, seed=5))
        return measurements, inputs

    @pytest.fixture
    def model(self, two_story, accelerometers):
        return StructuralFilterModel(two_story, accelerometers, TS, 3)

    @pytest.fixture
    def filter_cfg(self):
        return FilterConfig.from_scalars(2, 2, 2, 1e-6, 1e-9, 1e-4, taylor_order=3)

    def test_histories(self, records, model, filter_cfg):
        """Test histories have one row per sample with the prior in row 0."""
        measurements, inputs = records
        adapt_cfg = AdaptationConfig.for_model(model, enabled=False)
        result = run_identification(measurements, inputs, model, filter_cfg, adapt_cfg)

        assert result.completed
        assert result.n_steps == measurements.n_samples
        assert result.means.shape == (500, 6)
        assert result.parameter_variances.shape == (500, 2)
        assert result.gammas[0] == 0.0
        assert_allclose(result.stiffness[0], [12000.0, 10000.0])
        assert_allclose(result.parameter_variances[0], [1.0, 1.0])
        assert result.time[-1] == pytest.approx(9.98)
        assert result.threshold == pytest.approx(72.0)
        assert len(result.log) == 0

    def test_undamaged_stays_nominal(self, records, model, filter_cfg):
        """Test no detections and nominal estimates without damage."""
        measurements, inputs = records
        adapt_cfg = AdaptationConfig.for_model(model, p_adapt=1e6)
        result = run_identification(measurements, inputs, model, filter_cfg, adapt_cfg)

        assert len(result.log) == 0
        assert_allclose(result.final_stiffness, [12000.0, 10000.0], rtol=0.01)
        assert np.all(np.isfinite(result.gammas))

    def test_initial_stiffness(self, records, model, filter_cfg):
        """Test an explicit starting estimate is used for the prior."""
        measurements, inputs = records
        adapt_cfg = AdaptationConfig.for_model(model, enabled=False)
        result = run_identification(
            measurements,
            inputs,
            model,
            filter_cfg,
            adapt_cfg,
            initial_stiffness=np.array([14400.0, 12000.0]),
        )
        assert_allclose(result.stiffness[0], [14400.0, 12000.0])

    def test_misaligned_series(self, records, model, filter_cfg):
        """Test series of different lengths are rejected."""
        measurements, inputs = records
        short = inputs.replace_values(inputs.values[:-1])
        adapt_cfg = AdaptationConfig.for_model(model)
        with pytest.raises(ValidationError, match="input sample"):
            run_identification(measurements, short, model, filter_cfg, adapt_cfg)

    def test_dimension_mismatch(self, records, model):
        """Test a filter sized for another model is rejected."""
        measurements, inputs = records
        cfg = FilterConfig.from_scalars(3, 2, 2, 1e-6, 1e-9, 1e-4)
        adapt_cfg = AdaptationConfig.for_model(model)
        with pytest.raises(ValidationError, match="filter has dimension"):
            run_identification(measurements, inputs, model, cfg, adapt_cfg)

    def test_deterministic_log(self, two_story, model, filter_cfg):
        """Test repeated runs on the same records give identical logs and means."""
        excitation = white_noise(10.0, TS, 1.5, seed=3)
        schedule = DamageSchedule((DamageEvent(0, 6000.0, time=5.0),))
        truth = simulate_truth(two_story, schedule, excitation)
        measurements = add_noise(truth.outputs, NoiseSpec(0.01, seed=4))
        inputs = add_noise(excitation, NoiseSpec(0.01, seed=5))
        adapt_cfg = AdaptationConfig.for_model(model, p_adapt=1e6)

        first = run_identification(measurements, inputs, model, filter_cfg, adapt_cfg)
        second = run_identification(measurements, inputs, model, filter_cfg, adapt_cfg)
        assert len(first.log) >= 1
        assert first.log.events == second.log.events
        assert np.array_equal(first.means, second.means)
        assert np.array_equal(first.gammas, second.gammas)


class TestSingleStoryDamage:
    """Tests for detecting and locating a drop on one story."""

    @pytest.mark.parametrize("story,drift", [(0, 0.10), (1, 0.09)])
    def test_detects_and_locates(self, two_story, accelerometers, story, drift):
        """Test a 10% drop is flagged on its own story within 0.5 s."""
        excitation = white_noise(20.0, TS, 1.5, seed=7)
        stiffness = 0.9 * two_story.story_stiffness[story]
        schedule = DamageSchedule(
            (DamageEvent(story, stiffness, time=3.0, drift=drift),)
        )
        truth = simulate_truth(two_story, schedule, excitation)
        assert len(truth.damage_times) == 1
        fired = truth.damage_times[0][1]

        measurements = add_noise(truth.outputs, NoiseSpec(0.01, seed=8))
        inputs = add_noise(excitation, NoiseSpec(0.01, seed=9))
        model = StructuralFilterModel(two_story, accelerometers, TS, "exact")
        filter_cfg = FilterConfig.from_scalars(2, 2, 2, 1e-6, 1e-9, 1e-4)
        adapt_cfg = AdaptationConfig.for_model(model, p_adapt=1e6)
        result = run_identification(measurements, inputs, model, filter_cfg, adapt_cfg)

        detection = result.log.first_after(fired)
        assert detection is not None
        assert result.log.events[0] == detection
        assert detection.time - fired <= 0.5
        assert detection.index == story
