"""
Configuration management for tmdid.

Loads structure and run documents from YAML files with environment
variable overrides. Values are converted to SI units on load; story and
DoF numbers are 1-based in the documents and 0-based in code.
"""

import copy
import hashlib
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import yaml

from tmdid.core.models import Sensor, SensorLayout, SensorType, ValidationError
from tmdid.dynamics.discretization import Order, check_order
from tmdid.structure.matrices import StructureSpec, TmdSpec, assemble_matrices
from tmdid.structure.modal import (
    WarburtonTuning,
    modal_analysis,
    warburton_parameters,
)

logger = logging.getLogger(__name__)

DEFAULT_OUTPUT_ROOT = Path("tmdid-runs")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
EXCITATION_KINDS = ("white_noise", "impulse", "quake_like", "record", "none")
VARIANTS = ("bare", "tmd")

UNIT_FACTORS = {
    "mass": {"kg": 1.0, "t": 1000.0},
    "stiffness": {"N/m": 1.0, "kN/m": 1000.0},
    "damping": {"N*s/m": 1.0, "Ns/m": 1.0, "kN*s/m": 1000.0, "kNs/m": 1000.0},
}


def _default_config_dir() -> Path:
    """Return the user config dir, honoring XDG_CONFIG_HOME when set."""
    base = os.environ.get("XDG_CONFIG_HOME")
    if base:
        return Path(base).expanduser() / "tmdid"
    return Path.home() / ".config" / "tmdid"


def _default_config_file() -> Path:
    return _default_config_dir() / "config.yaml"


def _expand_path(value: Union[str, Path]) -> Path:
    """Expand env vars and ~ in config-provided path values."""
    return Path(os.path.expandvars(str(value))).expanduser()


def _path_exists(path: Path) -> bool:
    """Best-effort existence check that tolerates unreadable paths."""
    try:
        return path.exists()
    except OSError as e:
        logger.warning("Failed to access config path %s: %s", path, e)
        return False


def _unit_factor(quantity: str, unit: str) -> float:
    try:
        return UNIT_FACTORS[quantity][unit]
    except KeyError:
        known = ", ".join(UNIT_FACTORS[quantity])
        raise ValidationError(
            f"unknown {quantity} unit '{unit}' (use one of {known})"
        ) from None


def _float_list(data: dict[str, Any], key: str, factor: float = 1.0) -> list[float]:
    values = data.get(key)
    if values is None:
        raise ValidationError(f"structure is missing '{key}'")
    if not isinstance(values, (list, tuple)):
        values = [values]
    try:
        return [float(v) * factor for v in values]
    except (TypeError, ValueError):
        raise ValidationError(f"'{key}' must be a list of numbers") from None


def read_yaml(path: Path) -> dict[str, Any]:
    """Read a YAML mapping; empty files give {}."""
    try:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}") from None
    except yaml.YAMLError as e:
        raise ValidationError(f"invalid YAML in {path}: {e}") from e
    if not isinstance(data, dict):
        raise ValidationError(f"{path} must contain a mapping at the top level")
    return data


@dataclass
class TmdConfig:
    """TMD definition: explicit parameters or Warburton auto-tuning by mass."""

    mass: float
    stiffness: Optional[float] = None
    damping: Optional[float] = None
    auto_tune: bool = False

    def validate(self) -> None:
        if not self.mass > 0:
            raise ValidationError(f"TMD mass must be > 0, got {self.mass}")
        if not self.auto_tune and (self.stiffness is None or self.damping is None):
            raise ValidationError("TMD needs stiffness and damping unless auto_tune")


@dataclass
class StructureConfig:
    """Shear frame document (all values SI).

    Attributes:
        masses: Floor masses [kg], bottom to top
        stiffnesses: Interstory stiffnesses [N/m]
        dampings: Interstory damping [N*s/m]
        tmd: Optional TMD on the top story
        influence: Optional influence vector (one entry per DoF)
        name: Label used in reports
    """

    masses: list[float]
    stiffnesses: list[float]
    dampings: list[float]
    tmd: Optional[TmdConfig] = None
    influence: list[float] = field(default_factory=list)
    name: str = ""

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "StructureConfig":
        """Create StructureConfig from a document, converting to SI."""
        if not isinstance(data, dict):
            raise ValidationError("structure must be a mapping")
        units = data.get("units", {}) or {}
        f_mass = _unit_factor("mass", units.get("mass", "kg"))
        f_stiff = _unit_factor("stiffness", units.get("stiffness", "N/m"))
        f_damp = _unit_factor("damping", units.get("damping", "N*s/m"))

        tmd = None
        tmd_data = data.get("tmd")
        if tmd_data:
            auto = tmd_data.get("auto_tune")
            if auto:
                source = auto if isinstance(auto, dict) else tmd_data
                mass = source.get("mass")
                if mass is None:
                    raise ValidationError("tmd.auto_tune needs a mass")
                tmd = TmdConfig(mass=float(mass) * f_mass, auto_tune=True)
            else:
                try:
                    tmd = TmdConfig(
                        mass=float(tmd_data["mass"]) * f_mass,
                        stiffness=float(tmd_data["stiffness"]) * f_stiff,
                        damping=float(tmd_data["damping"]) * f_damp,
                    )
                except KeyError as e:
                    raise ValidationError(f"tmd is missing {e}") from None
            tmd.validate()

        return cls(
            masses=_float_list(data, "masses", f_mass),
            stiffnesses=_float_list(data, "stiffnesses", f_stiff),
            dampings=_float_list(data, "dampings", f_damp),
            tmd=tmd,
            influence=[float(v) for v in data.get("influence", []) or []],
            name=str(data.get("name", "")),
        )

    def to_dict(self) -> dict[str, Any]:
        """Convert to a document in SI units."""
        data: dict[str, Any] = {
            "name": self.name,
            "units": {"mass": "kg", "stiffness": "N/m", "damping": "N*s/m"},
            "masses": list(self.masses),
            "stiffnesses": list(self.stiffnesses),
            "dampings": list(self.dampings),
        }
        if self.influence:
            data["influence"] = list(self.influence)
        if self.tmd is not None:
            if self.tmd.auto_tune:
                data["tmd"] = {"auto_tune": {"mass": self.tmd.mass}}
            else:
                data["tmd"] = {
                    "mass": self.tmd.mass,
                    "stiffness": self.tmd.stiffness,
                    "damping": self.tmd.damping,
                }
        return data

    def bare_spec(self) -> StructureSpec:
        """The structure without TMD."""
        influence = self.influence[: len(self.masses)] if self.influence else ()
        return StructureSpec(
            story_masses=tuple(self.masses),
            story_damping=tuple(self.dampings),
            story_stiffness=tuple(self.stiffnesses),
            influence=tuple(influence),
        )

    def tuning(self) -> Optional[WarburtonTuning]:
        """Warburton parameters when the TMD is auto-tuned."""
        if self.tmd is None or not self.tmd.auto_tune:
            return None
        bare = self.bare_spec()
        modal = modal_analysis(assemble_matrices(bare), reference_dof=bare.top_dof)
        return warburton_parameters(modal, self.tmd.mass)

    def to_spec(self, with_tmd: bool = True) -> StructureSpec:
        """
        Build the StructureSpec.

        Args:
            with_tmd: False drops the TMD (the "bare" variant)
        """
        bare = self.bare_spec()
        if self.tmd is None or not with_tmd:
            return bare
        if self.tmd.auto_tune:
            tmd = self.tuning().tmd
            logger.info(
                f"auto-tuned TMD: m_d={tmd.mass:g} kg, k_d={tmd.stiffness:.2f} N/m, "
                f"c_d={tmd.damping:.3f} N*s/m"
            )
        else:
            tmd = TmdSpec(self.tmd.mass, self.tmd.stiffness, self.tmd.damping)
        return StructureSpec(
            story_masses=bare.story_masses,
            story_damping=bare.story_damping,
            story_stiffness=bare.story_stiffness,
            tmd=tmd,
            influence=tuple(self.influence),
        )


def load_structure(path: Path) -> StructureConfig:
    """Load a structure document."""
    path = _expand_path(path)
    config = StructureConfig.from_dict(read_yaml(path))
    if not config.name:
        config.name = path.stem
    return config


@dataclass
class ExcitationConfig:
    """Ground-acceleration source."""

    kind: str = "white_noise"
    rms: float = 0.57
    amplitude: float = 80.0
    t_hit: float = 2.0
    profile: str = "far_field"
    peak: float = 3.0
    path: Optional[Path] = None
    format: str = "csv"
    channel: Optional[str] = None

    def validate(self) -> None:
        if self.kind not in EXCITATION_KINDS:
            raise ValidationError(
                f"unknown excitation kind '{self.kind}' "
                f"(use one of {', '.join(EXCITATION_KINDS)})"
            )
        if self.kind == "record" and self.path is None:
            raise ValidationError("excitation kind 'record' needs a path")


@dataclass
class DamageConfig:
    """One damage event; `story` is 0-based here (1-based in documents)."""

    story: int
    stiffness: Optional[float] = None
    factor: Optional[float] = None
    time: Optional[float] = None
    drift: Optional[float] = None

    def stiffness_for(self, nominal: float) -> float:
        """Damaged stiffness [N/m] given the nominal value."""
        if self.stiffness is not None:
            return self.stiffness
        return nominal * self.factor

    def validate(self) -> None:
        if (self.stiffness is None) == (self.factor is None):
            raise ValidationError(
                f"damage on story {self.story + 1} needs exactly one of "
                f"stiffness or factor"
            )
        if self.factor is not None and not 0 < self.factor < 1:
            raise ValidationError(
                f"damage factor must be in (0, 1), got {self.factor}"
            )


@dataclass
class SensorConfig:
    """Sensor suite: one sensor type on the listed DoFs (0-based)."""

    type: SensorType = SensorType.ACCELERATION
    dofs: Optional[list[int]] = None

    def layout(self, default_dofs: list[int]) -> SensorLayout:
        dofs = default_dofs if self.dofs is None else self.dofs
        return SensorLayout(tuple(Sensor(d, self.type) for d in dofs))


@dataclass
class NoiseConfig:
    """Measurement noise RMS on the input and output records."""

    input_rms: float = 0.01
    output_rms: float = 0.01


@dataclass
class FilterSection:
    """UKF setup; parameter-block covariances are in stiffness_unit^2."""

    alpha: float = 0.001
    beta: float = 2.0
    kappa: float = 0.0
    p0: float = 1e-6
    q: float = 1e-9
    r: float = 1e-4
    p0_param: Optional[float] = None
    q_param: Optional[float] = None
    taylor_order: Union[int, str] = 3
    stiffness_unit: float = 1000.0
    identified: Optional[list[int]] = None
    initial_stiffness_factor: float = 1.0
    initial_stiffness: Optional[list[float]] = None


@dataclass
class AdaptationSection:
    """Detection settings; p_adapt is in stiffness_unit^2."""

    enabled: bool = True
    z0: Optional[float] = None
    probability: Optional[float] = None
    p_adapt: float = 1.0
    probe_reduction: float = 0.05
    cooldown: int = 25


@dataclass
class SweepConfig:
    """Grids of the covariance and model studies."""

    p0: list[float] = field(default_factory=lambda: [1e-8, 1e-6, 1e-4, 1e-2, 1e0])
    q: list[float] = field(
        default_factory=lambda: [1e-8, 1e-9, 1e-10, 1e-11, 1e-12, 1e-13, 1e-14, 1e-15]
    )
    orders: list[Order] = field(default_factory=lambda: [1, 2, 3, 4])
    variants: list[str] = field(default_factory=lambda: list(VARIANTS))


@dataclass
class RunConfig:
    """Run document for simulate, identify and the sweeps."""

    structure: StructureConfig
    sampling_time: float = 0.02
    duration: float = 60.0
    seed: int = 0
    oversample: int = 10
    excitation: ExcitationConfig = field(default_factory=ExcitationConfig)
    damage: list[DamageConfig] = field(default_factory=list)
    sensors: SensorConfig = field(default_factory=SensorConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    filter: FilterSection = field(default_factory=FilterSection)
    adaptation: AdaptationSection = field(default_factory=AdaptationSection)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output_dir: Optional[Path] = None
    workers: int = 1
    log_level: str = "WARNING"
    source: Optional[Path] = None

    @classmethod
    def from_dict(
        cls, data: dict[str, Any], base_dir: Optional[Path] = None
    ) -> "RunConfig":
        """Create RunConfig from a document; relative paths resolve in base_dir."""
        base_dir = Path(".") if base_dir is None else base_dir

        def resolve(value: Union[str, Path]) -> Path:
            path = _expand_path(value)
            return path if path.is_absolute() else base_dir / path

        structure_data = data.get("structure")
        if structure_data is None:
            raise ValidationError("run config is missing 'structure'")
        if isinstance(structure_data, (str, Path)):
            structure = load_structure(resolve(structure_data))
        else:
            structure = StructureConfig.from_dict(structure_data)

        exc_data = data.get("excitation", {}) or {}
        excitation = ExcitationConfig(
            kind=exc_data.get("kind", "white_noise"),
            rms=float(exc_data.get("rms", 0.57)),
            amplitude=float(exc_data.get("amplitude", 80.0)),
            t_hit=float(exc_data.get("t_hit", 2.0)),
            profile=exc_data.get("profile", "far_field"),
            peak=float(exc_data.get("peak", 3.0)),
            path=resolve(exc_data["path"]) if exc_data.get("path") else None,
            format=exc_data.get("format", "csv"),
            channel=exc_data.get("channel"),
        )

        damage = []
        for d in data.get("damage", []) or []:
            try:
                story = int(d["story"]) - 1
            except (KeyError, TypeError, ValueError):
                raise ValidationError(
                    "every damage event needs a 'story' number"
                ) from None
            damage.append(
                DamageConfig(
                    story=story,
                    stiffness=_optional_float(d.get("stiffness")),
                    factor=_optional_float(d.get("factor")),
                    time=_optional_float(d.get("time")),
                    drift=_optional_float(d.get("drift")),
                )
            )

        sensor_data = data.get("sensors", {}) or {}
        try:
            sensor_type = SensorType(sensor_data.get("type", "acceleration"))
        except ValueError:
            raise ValidationError(
                f"unknown sensor type '{sensor_data.get('type')}'"
            ) from None
        dofs = sensor_data.get("dofs")
        sensors = SensorConfig(
            type=sensor_type,
            dofs=None if dofs is None else [int(d) - 1 for d in dofs],
        )

        noise_data = data.get("noise", {}) or {}
        noise = NoiseConfig(
            input_rms=float(noise_data.get("input_rms", 0.01)),
            output_rms=float(noise_data.get("output_rms", 0.01)),
        )

        f = data.get("filter", {}) or {}
        identified = f.get("identified")
        initial = f.get("initial_stiffness")
        filter_section = FilterSection(
            alpha=float(f.get("alpha", 0.001)),
            beta=float(f.get("beta", 2.0)),
            kappa=float(f.get("kappa", 0.0)),
            p0=float(f.get("p0", 1e-6)),
            q=float(f.get("q", 1e-9)),
            r=float(f.get("r", 1e-4)),
            p0_param=_optional_float(f.get("p0_param")),
            q_param=_optional_float(f.get("q_param")),
            taylor_order=f.get("taylor_order", 3),
            stiffness_unit=float(f.get("stiffness_unit", 1000.0)),
            identified=None if identified is None else [int(s) - 1 for s in identified],
            initial_stiffness_factor=float(f.get("initial_stiffness_factor", 1.0)),
            initial_stiffness=None if initial is None else [float(k) for k in initial],
        )

        a = data.get("adaptation", {}) or {}
        adaptation = AdaptationSection(
            enabled=bool(a.get("enabled", True)),
            z0=_optional_float(a.get("z0")),
            probability=_optional_float(a.get("probability")),
            p_adapt=float(a.get("p_adapt", 1.0)),
            probe_reduction=float(a.get("probe_reduction", 0.05)),
            cooldown=int(a.get("cooldown", 25)),
        )

        s = data.get("sweep", {}) or {}
        defaults = SweepConfig()
        sweep = SweepConfig(
            p0=[float(v) for v in s.get("p0", defaults.p0)],
            q=[float(v) for v in s.get("q", defaults.q)],
            orders=list(s.get("orders", defaults.orders)),
            variants=[str(v) for v in s.get("variants", defaults.variants)],
        )

        config = cls(
            structure=structure,
            sampling_time=float(data.get("sampling_time", 0.02)),
            duration=float(data.get("duration", 60.0)),
            seed=int(data.get("seed", 0)),
            oversample=int(data.get("oversample", 10)),
            excitation=excitation,
            damage=damage,
            sensors=sensors,
            noise=noise,
            filter=filter_section,
            adaptation=adaptation,
            sweep=sweep,
            output_dir=resolve(data["output_dir"]) if data.get("output_dir") else None,
            workers=int(data.get("workers", 1)),
            log_level=str(data.get("log_level", "WARNING")).upper(),
        )
        for w in config.validate():
            logger.warning("Config: %s", w)
        return config

    def validate(self) -> list[str]:
        """Check invariants, returning a list of warning messages.

        Clamps recoverable values; raises ValidationError for impossible ones.
        """
        warnings = []
        if not self.sampling_time > 0:
            raise ValidationError(
                f"sampling_time must be > 0, got {self.sampling_time}"
            )
        if not self.duration > 0:
            raise ValidationError(f"duration must be > 0, got {self.duration}")
        if self.duration < 2 * self.sampling_time:
            raise ValidationError(
                f"duration {self.duration} s gives fewer than two samples"
            )
        if self.noise.input_rms < 0 or self.noise.output_rms < 0:
            raise ValidationError("noise RMS values must be >= 0")
        self.excitation.validate()
        for d in self.damage:
            d.validate()
        self.sweep.orders = [check_order(o) for o in self.sweep.orders]
        for sweep_variant in self.sweep.variants:
            if sweep_variant not in VARIANTS:
                raise ValidationError(
                    f"unknown sweep variant '{sweep_variant}' (use bare or tmd)"
                )
        if self.oversample < 10:
            warnings.append(f"oversample={self.oversample} clamped to 10")
            self.oversample = 10
        if self.workers < 1:
            warnings.append(f"workers={self.workers} clamped to 1")
            self.workers = 1
        if self.log_level not in LOG_LEVELS:
            warnings.append(f"log_level={self.log_level} unknown, using WARNING")
            self.log_level = "WARNING"
        if self.adaptation.z0 is not None and self.adaptation.probability is not None:
            warnings.append("z0 and probability both set, using z0")
            self.adaptation.probability = None
        return warnings

    def to_dict(self) -> dict[str, Any]:
        """Convert RunConfig to a document (1-based numbering, SI units)."""
        f = self.filter
        a = self.adaptation
        e = self.excitation
        return {
            "structure": self.structure.to_dict(),
            "sampling_time": self.sampling_time,
            "duration": self.duration,
            "seed": self.seed,
            "oversample": self.oversample,
            "excitation": {
                "kind": e.kind,
                "rms": e.rms,
                "amplitude": e.amplitude,
                "t_hit": e.t_hit,
                "profile": e.profile,
                "peak": e.peak,
                "path": str(e.path) if e.path else None,
                "format": e.format,
                "channel": e.channel,
            },
            "damage": [
                {
                    k: v
                    for k, v in {
                        "story": d.story + 1,
                        "stiffness": d.stiffness,
                        "factor": d.factor,
                        "time": d.time,
                        "drift": d.drift,
                    }.items()
                    if v is not None
                }
                for d in self.damage
            ],
            "sensors": {
                "type": self.sensors.type.value,
                "dofs": None
                if self.sensors.dofs is None
                else [d + 1 for d in self.sensors.dofs],
            },
            "noise": {
                "input_rms": self.noise.input_rms,
                "output_rms": self.noise.output_rms,
            },
            "filter": {
                "alpha": f.alpha,
                "beta": f.beta,
                "kappa": f.kappa,
                "p0": f.p0,
                "q": f.q,
                "r": f.r,
                "p0_param": f.p0_param,
                "q_param": f.q_param,
                "taylor_order": f.taylor_order,
                "stiffness_unit": f.stiffness_unit,
                "identified": None
                if f.identified is None
                else [s + 1 for s in f.identified],
                "initial_stiffness_factor": f.initial_stiffness_factor,
                "initial_stiffness": f.initial_stiffness,
            },
            "adaptation": {
                "enabled": a.enabled,
                "z0": a.z0,
                "probability": a.probability,
                "p_adapt": a.p_adapt,
                "probe_reduction": a.probe_reduction,
                "cooldown": a.cooldown,
            },
            "sweep": {
                "p0": list(self.sweep.p0),
                "q": list(self.sweep.q),
                "orders": list(self.sweep.orders),
                "variants": list(self.sweep.variants),
            },
            "output_dir": str(self.output_dir) if self.output_dir else None,
            "workers": self.workers,
            "log_level": self.log_level,
        }

    def config_hash(self) -> str:
        """sha256 of the canonical document, excluding output location."""
        data = self.to_dict()
        for key in ("output_dir", "workers", "log_level"):
            data.pop(key, None)
        text = yaml.safe_dump(data, sort_keys=True, default_flow_style=False)
        return hashlib.sha256(text.encode()).hexdigest()

    def copy(self, **changes: Any) -> "RunConfig":
        """Deep copy with top-level fields replaced."""
        clone = copy.deepcopy(self)
        for key, value in changes.items():
            setattr(clone, key, value)
        return clone

    def resolved_output_dir(self) -> Path:
        """Explicit output_dir, else <output root>/<config name>."""
        if self.output_dir is not None:
            return self.output_dir
        root = os.environ.get("TMDID_OUTPUT_ROOT", str(DEFAULT_OUTPUT_ROOT))
        root = _expand_path(root)
        name = self.source.stem if self.source is not None else "run"
        return root / name


def _optional_float(value: Any) -> Optional[float]:
    return None if value is None else float(value)


def load_config(config_path: Optional[Path] = None) -> RunConfig:
    """
    Load a run configuration from YAML.

    Search order:
    1. Explicit path if provided
    2. TMDID_CONFIG environment variable
    3. ~/.config/tmdid/config.yaml

    Environment variable overrides:
    - TMDID_LOG_LEVEL: Override log_level
    - TMDID_WORKERS: Override workers
    - TMDID_OUTPUT_ROOT: Root of the default output directory

    Args:
        config_path: Optional explicit path to the config file

    Returns:
        Loaded configuration

    Raises:
        ValidationError: If no config is found or it is invalid
    """
    if config_path:
        paths_to_try = [_expand_path(config_path)]
    else:
        paths_to_try = []
        env_path = os.environ.get("TMDID_CONFIG")
        if env_path:
            paths_to_try.append(_expand_path(env_path))
        paths_to_try.append(_default_config_file())

    for path in paths_to_try:
        if _path_exists(path):
            config = RunConfig.from_dict(read_yaml(path), base_dir=path.parent)
            config.source = path
            return _apply_env_overrides(config)

    if config_path:
        raise ValidationError(f"config file not found: {config_path}")
    raise ValidationError(
        "no run config given (pass a path, set TMDID_CONFIG or create "
        f"{_default_config_file()})"
    )


def _apply_env_overrides(config: RunConfig) -> RunConfig:
    """Apply environment variable overrides to config."""
    if "TMDID_LOG_LEVEL" in os.environ:
        level = os.environ["TMDID_LOG_LEVEL"].upper()
        if level in LOG_LEVELS:
            config.log_level = level

    if "TMDID_WORKERS" in os.environ:
        try:
            config.workers = max(1, int(os.environ["TMDID_WORKERS"]))
        except ValueError:
            pass

    return config


def save_config(config: RunConfig, path: Path) -> None:
    """
    Save a run configuration to YAML.

    Args:
        config: Configuration to save
        path: Path to save to
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write("# tmdid run configuration (SI units, 1-based story numbers)\n\n")
        yaml.safe_dump(config.to_dict(), f, default_flow_style=False, sort_keys=False)
