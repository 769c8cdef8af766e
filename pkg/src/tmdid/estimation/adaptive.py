"""
Adaptive identification: damage detection, localization and covariance
adaptation around the UKF.

Each step the normalized innovation gamma = e^T R^-1 e is compared with
the constant threshold gamma0 = delta * m * z0^2. When it is exceeded,
every identified stiffness is probed by re-running the step with that
stiffness slightly reduced and its variance raised; the probe with the
smallest gamma names the damaged story. Its variance in the corrected
covariance is then raised so the estimate can follow the drop.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg, stats

from tmdid.core.models import FilterDivergenceError, SignalSeries, ValidationError
from tmdid.estimation.linalg import solve_spd
from tmdid.estimation.model import StructuralFilterModel
from tmdid.estimation.ukf import (
    AugmentedState,
    FilterConfig,
    Innovation,
    Observation,
    Transition,
    ukf_step,
)

logger = logging.getLogger(__name__)

DEFAULT_Z0 = 3.0 * math.sqrt(2.0)


def z0_from_probability(probability: float) -> float:
    """
    Two-sided standard-normal quantile for a non-exceedance probability.

    0.90 -> 1.645, 0.99 -> 2.576.
    """
    if not 0 < probability < 1:
        raise ValidationError(f"probability must be in (0, 1), got {probability}")
    return float(stats.norm.ppf((1.0 + probability) / 2.0))


@dataclass(frozen=True)
class AdaptationConfig:
    """Detection threshold and adaptation settings.

    Attributes:
        delta: Sensor-type factor (1 displacement/velocity, 2 acceleration)
        m: Number of sensors
        z0: Standard-normal quantile of the threshold
        p_adapt: Variance written on detection [(N/m)^2]
        probe_reduction: Fractional stiffness decrease of each probe
        cooldown: Steps after an adaptation during which detection is off
        enabled: False runs the plain UKF (gamma is still recorded)
    """

    delta: int
    m: int
    z0: float = DEFAULT_Z0
    p_adapt: float = 1e6
    probe_reduction: float = 0.05
    cooldown: int = 25
    enabled: bool = True

    def __post_init__(self):
        if self.delta not in (1, 2):
            raise ValidationError(f"delta must be 1 or 2, got {self.delta}")
        if self.m < 1:
            raise ValidationError(f"sensor count must be >= 1, got {self.m}")
        if not self.z0 > 0:
            raise ValidationError(f"z0 must be > 0, got {self.z0}")
        if not self.p_adapt > 0:
            raise ValidationError(f"p_adapt must be > 0, got {self.p_adapt}")
        if not 0 < self.probe_reduction < 0.5:
            raise ValidationError(
                f"probe_reduction must be in (0, 0.5), got {self.probe_reduction}"
            )
        if self.cooldown < 0:
            raise ValidationError(f"cooldown must be >= 0, got {self.cooldown}")

    @classmethod
    def for_model(cls, model: StructuralFilterModel, **kwargs) -> "AdaptationConfig":
        """Settings with delta and m taken from the model's sensor layout."""
        return cls(delta=model.sensors.delta(), m=model.sensors.count, **kwargs)


@dataclass(frozen=True)
class DetectionEvent:
    """One threshold exceedance that led to an adaptation."""

    step: int
    time: float
    gamma: float
    index: int
    probe_gammas: tuple[float, ...]


@dataclass
class DetectionLog:
    """Detection events of one run, in step order."""

    threshold: float
    events: list[DetectionEvent] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.events)

    def record(self, event: DetectionEvent) -> None:
        if event.gamma < self.threshold:
            raise ValidationError(
                f"event gamma {event.gamma:.3f} below threshold {self.threshold:.3f}"
            )
        self.events.append(event)

    @property
    def indices(self) -> list[int]:
        return [e.index for e in self.events]

    def first_after(self, time: float) -> Optional[DetectionEvent]:
        """First event at or after `time` [s]."""
        for event in self.events:
            if event.time >= time - 1e-12:
                return event
        return None


def trigger(innov: Innovation, R: np.ndarray) -> float:
    """
    Normalized innovation gamma = e^T R^-1 e.

    Raises:
        ValidationError: If R is not positive definite
    """
    e = np.asarray(innov.e, dtype=float)
    try:
        return float(e @ solve_spd(np.atleast_2d(R), e))
    except linalg.LinAlgError as err:
        raise ValidationError(f"R is not positive definite: {err}") from err


def threshold(cfg: AdaptationConfig) -> float:
    """gamma0 = delta * m * z0^2."""
    return cfg.delta * cfg.m * cfg.z0**2


def localize(
    state: AugmentedState,
    u_k: np.ndarray,
    y_k1: np.ndarray,
    u_k1: np.ndarray,
    filter_cfg: FilterConfig,
    cfg: AdaptationConfig,
    model: Transition,
    obs: Observation,
) -> tuple[int, list[float]]:
    """
    Find the stiffness whose reduction best explains step k -> k+1.

    Every probe starts from the corrected state at k, reduces one
    stiffness by `probe_reduction`, sets its variance to `p_adapt` and
    repeats the step. Probes are discarded afterwards.

    Returns:
        (index of the smallest probe gamma, probe gammas); the lowest
        index wins ties

    Raises:
        FilterDivergenceError: If every probe diverges
    """
    gammas = []
    for index in range(state.n_params):
        slot = state.parameter_slot(index)
        mean = np.array(state.mean)
        cov = np.array(state.covariance)
        mean[slot] *= 1.0 - cfg.probe_reduction
        cov[slot, slot] = cfg.p_adapt
        probe = state.evolve(mean=mean, covariance=cov)
        try:
            _, innov = ukf_step(probe, u_k, y_k1, u_k1, filter_cfg, model, obs)
            gamma = trigger(innov, filter_cfg.R)
        except FilterDivergenceError as e:
            logger.warning(f"probe {index} diverged: {e}")
            gamma = math.inf
        gammas.append(gamma if math.isfinite(gamma) else math.inf)

    if not any(math.isfinite(g) for g in gammas):
        raise FilterDivergenceError("all localization probes diverged", state.step + 1)
    return int(np.argmin(gammas)), gammas


def adapt_covariance(
    state: AugmentedState, index: int, cfg: AdaptationConfig
) -> AugmentedState:
    """Set the variance of parameter `index` to p_adapt; nothing else changes."""
    slot = state.parameter_slot(index)
    cov = np.array(state.covariance)
    cov[slot, slot] = cfg.p_adapt
    return state.evolve(covariance=cov)


@dataclass
class IdentificationResult:
    """Histories of one identification run.

    Row k of every history belongs to step k; row 0 is the prior.
    """

    ts: float
    means: np.ndarray
    parameter_variances: np.ndarray
    gammas: np.ndarray
    innovations: np.ndarray
    log: DetectionLog
    identified: tuple[int, ...]
    n_dof: int
    completed: bool = True

    @property
    def n_steps(self) -> int:
        return self.means.shape[0]

    @property
    def time(self) -> np.ndarray:
        return np.arange(self.n_steps) * self.ts

    @property
    def stiffness(self) -> np.ndarray:
        """Stiffness estimates (n_steps, n_params) [N/m]."""
        return self.means[:, 2 * self.n_dof :]

    @property
    def final_stiffness(self) -> np.ndarray:
        return self.stiffness[-1]

    @property
    def threshold(self) -> float:
        return self.log.threshold


def _check_series(
    measurements: SignalSeries, inputs: SignalSeries, model: StructuralFilterModel
) -> None:
    if measurements.n_samples != inputs.n_samples:
        raise ValidationError(
            f"{measurements.n_samples} measurement sample(s) but "
            f"{inputs.n_samples} input sample(s)"
        )
    if measurements.n_samples < 2:
        raise ValidationError("at least two samples are needed")
    for name, series in (("measurement", measurements), ("input", inputs)):
        if not math.isclose(series.ts, model.ts, rel_tol=1e-9):
            raise ValidationError(
                f"{name} sampling time {series.ts} differs from model {model.ts}"
            )
    if measurements.n_channels != model.output_dim:
        raise ValidationError(
            f"{measurements.n_channels} measurement channel(s) but "
            f"{model.output_dim} sensor(s)"
        )
    if inputs.n_channels != 1:
        raise ValidationError(
            f"input must be a single ground-acceleration channel, "
            f"got {inputs.n_channels}"
        )


def run_identification(
    measurements: SignalSeries,
    inputs: SignalSeries,
    model: StructuralFilterModel,
    filter_cfg: FilterConfig,
    adapt_cfg: AdaptationConfig,
    initial_stiffness: Optional[np.ndarray] = None,
) -> IdentificationResult:
    """
    Run the adaptive UKF over a measured record.

    Args:
        measurements: Sensor outputs, one channel per sensor
        inputs: Ground acceleration [m/s^2], one channel
        model: Filter model (structure, sensors, discretization)
        filter_cfg: UKF setup matching the model dimensions
        adapt_cfg: Detection and adaptation settings
        initial_stiffness: Starting stiffness estimates [N/m]
            (default: nominal values of the model)

    Returns:
        IdentificationResult with full histories and the detection log

    Raises:
        ValidationError: On misaligned series or dimensions
        FilterDivergenceError: On divergence; `partial` holds the
            histories up to the failing step
    """
    _check_series(measurements, inputs, model)
    if filter_cfg.state_dim != model.state_dim:
        raise ValidationError(
            f"filter has dimension {filter_cfg.state_dim}, model {model.state_dim}"
        )
    if filter_cfg.output_dim != model.output_dim:
        raise ValidationError(
            f"R is {filter_cfg.output_dim}x{filter_cfg.output_dim} "
            f"for {model.output_dim} sensor(s)"
        )
    if adapt_cfg.m != model.output_dim:
        raise ValidationError(
            f"adaptation configured for {adapt_cfg.m} sensor(s), "
            f"model has {model.output_dim}"
        )

    theta0 = model.nominal_stiffness if initial_stiffness is None else initial_stiffness
    state = AugmentedState.initial(model.n_dof, theta0, filter_cfg.P0)
    gamma0 = threshold(adapt_cfg)
    log = DetectionLog(threshold=gamma0)

    n_steps = measurements.n_samples
    ts = model.ts
    y = measurements.values
    u = np.array([model.input_vector(a) for a in inputs.values[:, 0]])

    means = np.zeros((n_steps, model.state_dim))
    variances = np.zeros((n_steps, model.n_params))
    gammas = np.zeros(n_steps)
    innovations = np.zeros((n_steps, model.output_dim))
    means[0] = state.mean
    variances[0] = state.parameter_variances

    def result(completed: bool, last: int) -> IdentificationResult:
        return IdentificationResult(
            ts=ts,
            means=means[: last + 1],
            parameter_variances=variances[: last + 1],
            gammas=gammas[: last + 1],
            innovations=innovations[: last + 1],
            log=log,
            identified=model.identified,
            n_dof=model.n_dof,
            completed=completed,
        )

    debug = logger.isEnabledFor(logging.DEBUG)
    last_adaptation: Optional[int] = None
    k = 0
    try:
        for k in range(n_steps - 1):
            previous = state
            state, innov = ukf_step(
                previous,
                u[k],
                y[k + 1],
                u[k + 1],
                filter_cfg,
                model.transition,
                model.observe,
            )
            gamma = trigger(innov, filter_cfg.R)
            step = k + 1

            in_cooldown = (
                last_adaptation is not None
                and step - last_adaptation <= adapt_cfg.cooldown
            )
            if adapt_cfg.enabled and gamma >= gamma0 and not in_cooldown:
                index, probes = localize(
                    previous,
                    u[k],
                    y[k + 1],
                    u[k + 1],
                    filter_cfg,
                    adapt_cfg,
                    model.transition,
                    model.observe,
                )
                state = adapt_covariance(state, index, adapt_cfg)
                last_adaptation = step
                event = DetectionEvent(
                    step=step,
                    time=step * ts,
                    gamma=gamma,
                    index=index,
                    probe_gammas=tuple(probes),
                )
                log.record(event)
                logger.info(
                    f"detection at t={event.time:.3f} s (step {step}): "
                    f"gamma={gamma:.2f} >= {gamma0:.2f}, "
                    f"localized story {model.identified[index] + 1}"
                )

            means[step] = state.mean
            variances[step] = state.parameter_variances
            gammas[step] = gamma
            innovations[step] = innov.e
            if debug:
                logger.debug(
                    f"step {step}: gamma={gamma:.3f} "
                    f"theta={np.array2string(state.parameters, precision=1)}"
                )
    except FilterDivergenceError as e:
        if e.step is None:
            e.step = k + 1
        e.partial = result(completed=False, last=k)
        logger.error(f"identification diverged at step {e.step}: {e}")
        raise

    logger.info(
        f"identification finished: {n_steps} steps, {len(log)} detection(s), "
        f"final stiffness {np.array2string(state.parameters, precision=1)} N/m"
    )
    return result(completed=True, last=n_steps - 1)
