"""
Shared data models for tmdid.

Defines the error hierarchy, sensor types and the uniformly sampled
signal container passed between simulation, estimation and the harness.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Sequence

import numpy as np


class TmdidError(Exception):
    """Base class for all tmdid errors."""


class ValidationError(TmdidError):
    """Invalid structure, configuration, dimensions or schedule."""


class RecordFormatError(ValidationError):
    """Unparseable or non-uniformly sampled signal record."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FilterDivergenceError(TmdidError):
    """The filter produced non-finite or non-factorizable quantities."""

    def __init__(self, message: str, step: Optional[int] = None):
        self.step = step
        # Filled in by run_identification with the history up to the failure
        self.partial: Any = None
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)


class SensorType(str, Enum):
    """Motion quantity observed by a sensor."""

    DISPLACEMENT = "displacement"
    VELOCITY = "velocity"
    ACCELERATION = "acceleration"

    @property
    def delta(self) -> int:
        """Sensor-type factor of the adaptation threshold."""
        return 2 if self is SensorType.ACCELERATION else 1

    @property
    def unit(self) -> str:
        return {
            SensorType.DISPLACEMENT: "m",
            SensorType.VELOCITY: "m/s",
            SensorType.ACCELERATION: "m/s^2",
        }[self]


@dataclass(frozen=True)
class Sensor:
    """One sensor placed on a degree of freedom (0-based)."""

    dof: int
    kind: SensorType = SensorType.ACCELERATION

    @property
    def label(self) -> str:
        prefix = {
            SensorType.DISPLACEMENT: "x",
            SensorType.VELOCITY: "v",
            SensorType.ACCELERATION: "a",
        }[self.kind]
        return f"{prefix}{self.dof + 1}"


@dataclass(frozen=True)
class SensorLayout:
    """Ordered list of sensors; defines the output vector of the model."""

    sensors: tuple[Sensor, ...]

    def __post_init__(self):
        if not self.sensors:
            raise ValidationError("sensor layout must contain at least one sensor")
        dofs = [s.dof for s in self.sensors]
        if any(d < 0 for d in dofs):
            raise ValidationError(f"sensor DoF indices must be >= 0, got {dofs}")

    @classmethod
    def accelerometers(cls, dofs: Sequence[int]) -> "SensorLayout":
        """Accelerometers on the given DoFs."""
        return cls(tuple(Sensor(int(d), SensorType.ACCELERATION) for d in dofs))

    @property
    def count(self) -> int:
        return len(self.sensors)

    @property
    def kinds(self) -> set[SensorType]:
        return {s.kind for s in self.sensors}

    @property
    def labels(self) -> list[str]:
        return [s.label for s in self.sensors]

    @property
    def units(self) -> list[str]:
        return [s.kind.unit for s in self.sensors]

    def delta(self) -> int:
        """Threshold factor for a homogeneous suite.

        Raises:
            ValidationError: If the suite mixes accelerometers with
                displacement or velocity sensors.
        """
        deltas = {k.delta for k in self.kinds}
        if len(deltas) != 1:
            raise ValidationError(
                "mixed sensor suites are not supported by the constant threshold: "
                + ", ".join(sorted(k.value for k in self.kinds))
            )
        return deltas.pop()


@dataclass(frozen=True)
class SignalSeries:
    """Uniformly sampled multi-channel signal.

    `values` has shape (n_samples, n_channels); sample k is at time k * ts.
    """

    values: np.ndarray
    ts: float
    labels: tuple[str, ...] = ()
    units: tuple[str, ...] = ()
    noise_rms: Optional[tuple[float, ...]] = None
    meta: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, np.newaxis]
        if values.ndim != 2:
            raise ValidationError(
                f"signal values must be 1-D or 2-D, got shape {values.shape}"
            )
        if not self.ts > 0:
            raise ValidationError(f"sampling time must be > 0, got {self.ts}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("signal contains non-finite values")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ts", float(self.ts))

        n_channels = values.shape[1]
        labels = tuple(self.labels) or tuple(f"ch{i + 1}" for i in range(n_channels))
        units = tuple(self.units) or ("",) * n_channels
        if len(labels) != n_channels or len(units) != n_channels:
            raise ValidationError(
                f"{n_channels} channel(s) but {len(labels)} label(s) and "
                f"{len(units)} unit(s)"
            )
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "units", units)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples * self.ts

    @property
    def time(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.ts

    def channel(self, label: str) -> np.ndarray:
        """Return one channel by label."""
        try:
            return self.values[:, self.labels.index(label)]
        except ValueError:
            raise ValidationError(
                f"no channel '{label}' (have {', '.join(self.labels)})"
            ) from None

    def rms(self) -> np.ndarray:
        """Per-channel root mean square."""
        return np.sqrt(np.mean(self.values**2, axis=0))

    def replace_values(self, values: np.ndarray, **changes: Any) -> "SignalSeries":
        """Copy with new values (same sampling), optionally overriding fields."""
        fields = {
            "ts": self.ts,
            "labels": self.labels,
            "units": self.units,
            "noise_rms": self.noise_rms,
            "meta": dict(self.meta),
        }
        fields.update(changes)
        return SignalSeries(values=values, **fields)
