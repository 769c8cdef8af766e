"""
Ground-truth response of the shear frame under abrupt stiffness loss.

The structure is integrated with the exact discretizer at ts/oversample.
The ground acceleration is held constant over each sampling interval.
Damage events swap a story stiffness between two fine steps; the state
carries over unchanged.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from tmdid.core.models import SensorLayout, SignalSeries, ValidationError
from tmdid.dynamics.discretization import DiscreteStateSpace, exact_discretize
from tmdid.structure.matrices import StructureSpec, assemble_matrices
from tmdid.structure.state_space import build_state_space

logger = logging.getLogger(__name__)

TIME_EPS = 1e-9


@dataclass(frozen=True)
class DamageEvent:
    """Drop of one story stiffness to a new value.

    The event fires at a fixed time [s], on an interstory drift [m], or,
    with both given, on the first drift exceedance at or after the time.
    """

    story: int
    stiffness: float
    time: Optional[float] = None
    drift: Optional[float] = None

    def __post_init__(self):
        if self.story < 0:
            raise ValidationError(f"story index must be >= 0, got {self.story}")
        if not self.stiffness > 0:
            raise ValidationError(
                f"damaged stiffness must be > 0, got {self.stiffness}"
            )
        if self.time is None and self.drift is None:
            raise ValidationError("damage event needs a time, a drift or both")
        if self.time is not None and self.time < 0:
            raise ValidationError(f"damage time must be >= 0, got {self.time}")
        if self.drift is not None and not self.drift > 0:
            raise ValidationError(f"drift threshold must be > 0, got {self.drift}")

    @property
    def trigger(self) -> str:
        if self.drift is None:
            return "time"
        return "drift" if self.time is None else "armed drift"

    def due(self, t: float, drift: np.ndarray) -> bool:
        """True once the event's time has come and its drift is reached."""
        if self.time is not None and t < self.time - TIME_EPS:
            return False
        return self.drift is None or drift[self.story] >= self.drift


@dataclass(frozen=True)
class DamageSchedule:
    """Damage events; per story they fire in list order."""

    events: tuple[DamageEvent, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        by_story: dict[int, list[DamageEvent]] = {}
        for event in self.events:
            by_story.setdefault(event.story, []).append(event)
        for story, events in by_story.items():
            for before, after in zip(events, events[1:]):
                if not after.stiffness < before.stiffness:
                    raise ValidationError(
                        f"story {story + 1}: stiffness must decrease from event to "
                        f"event ({before.stiffness} -> {after.stiffness})"
                    )
                if (
                    before.time is not None
                    and after.time is not None
                    and not after.time > before.time
                ):
                    raise ValidationError(
                        f"story {story + 1}: event times must be strictly increasing"
                    )

    def __len__(self) -> int:
        return len(self.events)

    def validate_for(self, structure: StructureSpec) -> None:
        """Check story indices and that every event degrades the nominal value."""
        for event in self.events:
            if event.story >= structure.n_stories:
                raise ValidationError(
                    f"damage on story {event.story + 1} but structure has "
                    f"{structure.n_stories}"
                )
        first: dict[int, DamageEvent] = {}
        for event in self.events:
            first.setdefault(event.story, event)
        for story, event in first.items():
            nominal = structure.story_stiffness[story]
            if not event.stiffness < nominal:
                raise ValidationError(
                    f"story {story + 1}: damaged stiffness {event.stiffness} must be "
                    f"below the nominal {nominal}"
                )


@dataclass
class TruthResult:
    """True response sampled at ts.

    Attributes:
        states: Displacements and velocities, channels x1.. v1..
        outputs: Noise-free sensor outputs
        stiffness: Story stiffness at every sample (n_samples, n_stories)
        damage_times: (story, time) of every realized event, in firing order
        damage_stiffness: Stiffness [N/m] each realized event set, same order
    """

    states: SignalSeries
    outputs: SignalSeries
    stiffness: np.ndarray
    damage_times: list[tuple[int, float]] = field(default_factory=list)
    damage_stiffness: list[float] = field(default_factory=list)

    @property
    def final_stiffness(self) -> np.ndarray:
        return self.stiffness[-1]


class _Integrator:
    """Exact fine-step models, cached per stiffness state."""

    def __init__(self, structure: StructureSpec, sensors: SensorLayout, dt: float):
        self.sensors = sensors
        self.dt = dt
        self._cache: dict[tuple[float, ...], tuple[DiscreteStateSpace, np.ndarray]] = {}
        self.structure = structure
        self._select(structure)

    def _select(self, structure: StructureSpec) -> None:
        key = structure.story_stiffness
        if key not in self._cache:
            space = build_state_space(
                assemble_matrices(structure), self.sensors, structure=structure
            )
            self._cache[key] = (exact_discretize(space, self.dt), space.C_out)
        self.structure = structure
        self.model, self.C_out = self._cache[key]

    def swap(self, story: int, stiffness: float) -> None:
        values = list(self.structure.story_stiffness)
        values[story] = stiffness
        self._select(self.structure.with_stiffness(values))


def default_sensors(structure: StructureSpec) -> SensorLayout:
    """Accelerometers on every story (not on the TMD)."""
    return SensorLayout.accelerometers(range(structure.n_stories))


def interstory_drift(x: np.ndarray, n_stories: int) -> np.ndarray:
    """|x_i - x_(i-1)| per story with x_(-1) = 0 (ground)."""
    stories = x[:n_stories]
    return np.abs(np.diff(np.concatenate([[0.0], stories])))


def simulate_truth(
    structure: StructureSpec,
    schedule: DamageSchedule,
    excitation: SignalSeries,
    oversample: int = 10,
    sensors: Optional[SensorLayout] = None,
    x0: Optional[Sequence[float]] = None,
) -> TruthResult:
    """
    Simulate the true response with damage.

    Args:
        structure: Undamaged structure
        schedule: Damage events
        excitation: Ground acceleration [m/s^2], one channel
        oversample: Fine steps per sample (>= 10)
        sensors: Output sensors (default: accelerometers on every story)
        x0: Initial [displacements; velocities] (default: at rest)

    Returns:
        TruthResult sampled at the excitation's ts

    Raises:
        ValidationError: On invalid inputs or a non-finite response
    """
    if excitation.n_channels != 1:
        raise ValidationError(
            f"excitation must have one channel, got {excitation.n_channels}"
        )
    if int(oversample) != oversample or oversample < 10:
        raise ValidationError(f"oversample must be an integer >= 10, got {oversample}")
    oversample = int(oversample)
    schedule.validate_for(structure)
    sensors = default_sensors(structure) if sensors is None else sensors

    n = structure.n_dof
    ts = excitation.ts
    dt = ts / oversample
    count = excitation.n_samples
    influence = np.array(structure.influence)

    state = np.zeros(2 * n) if x0 is None else np.array(x0, dtype=float)
    if state.shape != (2 * n,):
        raise ValidationError(f"x0 must have {2 * n} entries, got {state.shape}")

    integrator = _Integrator(structure, sensors, dt)
    pending = list(schedule.events)
    fired: list[tuple[int, float]] = []
    fired_stiffness: list[float] = []

    def fire(t: float, x: np.ndarray) -> None:
        drift = interstory_drift(x, structure.n_stories)
        # at most one event per story per instant, in schedule order
        busy: set[int] = set()
        for event in list(pending):
            if event.story in busy:
                continue
            busy.add(event.story)
            if not event.due(t, drift):
                continue
            integrator.swap(event.story, event.stiffness)
            pending.remove(event)
            fired.append((event.story, t))
            fired_stiffness.append(event.stiffness)
            logger.info(
                f"damage at t={t:.4f} s: story {event.story + 1} stiffness "
                f"-> {event.stiffness:g} N/m ({event.trigger} trigger)"
            )

    states = np.zeros((count, 2 * n))
    outputs = np.zeros((count, sensors.count))
    stiffness = np.zeros((count, structure.n_stories))
    ground = excitation.values[:, 0]

    for k in range(count):
        t_k = k * ts
        u = influence * ground[k]
        if pending:
            fire(t_k, state)
        states[k] = state
        outputs[k] = integrator.C_out @ state + integrator.model.D @ u
        stiffness[k] = integrator.structure.story_stiffness
        if k == count - 1:
            break
        for j in range(oversample):
            if j > 0 and pending:
                fire(t_k + j * dt, state)
            state = integrator.model.A_d @ state + integrator.model.B_d @ u
        if not np.all(np.isfinite(state)):
            raise ValidationError(f"non-finite response at t={t_k + ts:.4f} s")

    labels = tuple(f"x{i + 1}" for i in range(n)) + tuple(f"v{i + 1}" for i in range(n))
    units = ("m",) * n + ("m/s",) * n
    logger.info(
        f"truth simulation finished: {count} samples at ts={ts:g} s, "
        f"oversample {oversample}, {len(fired)} damage event(s)"
    )
    return TruthResult(
        states=SignalSeries(values=states, ts=ts, labels=labels, units=units),
        outputs=SignalSeries(
            values=outputs,
            ts=ts,
            labels=tuple(sensors.labels),
            units=tuple(sensors.units),
        ),
        stiffness=stiffness,
        damage_times=fired,
        damage_stiffness=fired_stiffness,
    )
