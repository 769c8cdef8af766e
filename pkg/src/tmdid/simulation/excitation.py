"""
Ground-acceleration excitations and measurement noise.

All generators are seed-deterministic and return a single-channel
SignalSeries labelled "ag" in m/s^2.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import signal

from tmdid.core.models import SignalSeries, ValidationError

logger = logging.getLogger(__name__)

GROUND_LABEL = "ag"
GROUND_UNIT = "m/s^2"


def _sample_count(duration: float, ts: float) -> int:
    if not ts > 0:
        raise ValidationError(f"sampling time must be > 0, got {ts}")
    if not duration > 0:
        raise ValidationError(f"duration must be > 0, got {duration}")
    count = int(round(duration / ts))
    if count < 1:
        raise ValidationError(f"duration {duration} s is shorter than ts={ts} s")
    return count


def _ground(values: np.ndarray, ts: float, **meta) -> SignalSeries:
    return SignalSeries(
        values=values, ts=ts, labels=(GROUND_LABEL,), units=(GROUND_UNIT,), meta=meta
    )


def white_noise(
    duration: float, ts: float, rms: float, seed: Optional[int] = None
) -> SignalSeries:
    """
    Zero-mean Gaussian white noise.

    The samples are de-meaned and rescaled so that the sample RMS equals
    `rms` exactly.
    """
    n = _sample_count(duration, ts)
    if rms < 0:
        raise ValidationError(f"rms must be >= 0, got {rms}")
    if rms == 0 or n < 2:
        return _ground(np.zeros(n), ts, kind="white_noise", rms=rms, seed=seed)
    rng = np.random.default_rng(seed)
    values = rng.standard_normal(n)
    values -= values.mean()
    values *= rms / math.sqrt(np.mean(values**2))
    return _ground(values, ts, kind="white_noise", rms=rms, seed=seed)


def impulse(duration: float, ts: float, amplitude: float, t_hit: float) -> SignalSeries:
    """Single sample of `amplitude` at the step nearest `t_hit`."""
    n = _sample_count(duration, ts)
    if not 0 <= t_hit < duration:
        raise ValidationError(f"t_hit must be in [0, {duration}), got {t_hit}")
    values = np.zeros(n)
    values[min(int(round(t_hit / ts)), n - 1)] = amplitude
    return _ground(values, ts, kind="impulse", amplitude=amplitude, t_hit=t_hit)


@dataclass(frozen=True)
class QuakeProfile:
    """Kanai-Tajimi ground filter under a trapezoidal envelope.

    Attributes:
        name: Profile name
        ground_frequency: Ground filter frequency [Hz]
        ground_damping: Ground filter damping ratio
        rise: Linear build-up time [s]
        strong: Duration of the strong phase [s]
        decay: Linear decay time [s]
    """

    name: str
    ground_frequency: float
    ground_damping: float
    rise: float
    strong: float
    decay: float

    def __post_init__(self):
        if not self.ground_frequency > 0 or not self.ground_damping > 0:
            raise ValidationError(f"invalid ground filter in profile '{self.name}'")
        if self.rise < 0 or self.strong < 0 or self.decay < 0:
            raise ValidationError(f"negative envelope time in profile '{self.name}'")

    def envelope(self, time: np.ndarray) -> np.ndarray:
        """Trapezoid rising over `rise`, flat for `strong`, falling over `decay`."""
        t_strong = self.rise
        t_decay = self.rise + self.strong
        t_end = t_decay + self.decay
        return np.interp(
            time,
            [0.0, t_strong, t_decay, t_end],
            [0.0 if self.rise > 0 else 1.0, 1.0, 1.0, 0.0 if self.decay > 0 else 1.0],
            right=0.0,
        )


# El Centro-class: moderate frequency, long strong phase, slow decay
FAR_FIELD = QuakeProfile(
    name="far_field",
    ground_frequency=2.5,
    ground_damping=0.6,
    rise=1.5,
    strong=10.0,
    decay=18.0,
)

# Northridge-class: short and intense pulse-like phase
NEAR_FIELD = QuakeProfile(
    name="near_field",
    ground_frequency=1.5,
    ground_damping=0.4,
    rise=0.5,
    strong=4.0,
    decay=8.0,
)

PROFILES = {p.name: p for p in (FAR_FIELD, NEAR_FIELD)}


def get_profile(name: str) -> QuakeProfile:
    try:
        return PROFILES[name]
    except KeyError:
        raise ValidationError(
            f"unknown quake profile '{name}' (have {', '.join(sorted(PROFILES))})"
        ) from None


def quake_like(
    duration: float,
    ts: float,
    profile: Union[str, QuakeProfile] = FAR_FIELD,
    peak: float = 3.0,
    seed: Optional[int] = None,
) -> SignalSeries:
    """
    Synthetic earthquake-like ground acceleration.

    White noise is shaped by the Kanai-Tajimi filter, modulated by the
    profile envelope and scaled to the given peak ground acceleration.

    Args:
        duration: Record length [s]
        ts: Sampling time [s]
        profile: Profile or its name ("far_field", "near_field")
        peak: Peak ground acceleration [m/s^2]
        seed: Random seed
    """
    if isinstance(profile, str):
        profile = get_profile(profile)
    if peak < 0:
        raise ValidationError(f"peak must be >= 0, got {peak}")
    n = _sample_count(duration, ts)
    time = np.arange(n) * ts

    omega = 2.0 * math.pi * profile.ground_frequency
    two_zw = 2.0 * profile.ground_damping * omega
    ground_filter = signal.lti([two_zw, omega**2], [1.0, two_zw, omega**2])

    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(n)
    if n > 1:
        _, filtered, _ = signal.lsim(ground_filter, noise, time)
    else:
        filtered = noise
    values = np.asarray(filtered) * profile.envelope(time)

    largest = np.max(np.abs(values))
    values = values * (peak / largest) if largest > 0 else np.zeros(n)
    return _ground(
        values, ts, kind="quake_like", profile=profile.name, peak=peak, seed=seed
    )


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white Gaussian noise, RMS per channel (or one for all)."""

    rms: Union[float, tuple[float, ...]]
    seed: Optional[int] = None

    def __post_init__(self):
        values = np.atleast_1d(np.asarray(self.rms, dtype=float))
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValidationError(f"noise rms must be finite and >= 0, got {self.rms}")

    def per_channel(self, n_channels: int) -> np.ndarray:
        values = np.atleast_1d(np.asarray(self.rms, dtype=float))
        if values.size == 1:
            return np.full(n_channels, values[0])
        if values.size != n_channels:
            raise ValidationError(
                f"noise rms has {values.size} entries for {n_channels} channel(s)"
            )
        return values


def add_noise(clean: SignalSeries, noise: NoiseSpec) -> SignalSeries:
    """clean + iid N(0, rms^2) per channel and step, from one seeded stream."""
    rms = noise.per_channel(clean.n_channels)
    if not np.any(rms):
        return clean.replace_values(clean.values, noise_rms=tuple(rms.tolist()))
    rng = np.random.default_rng(noise.seed)
    values = clean.values + rng.standard_normal(clean.values.shape) * rms
    return clean.replace_values(values, noise_rms=tuple(rms.tolist()))


def series_from_samples(samples: Sequence[float], ts: float, **meta) -> SignalSeries:
    """Ground-acceleration series from raw samples."""
    return _ground(np.asarray(samples, dtype=float), ts, **meta)
