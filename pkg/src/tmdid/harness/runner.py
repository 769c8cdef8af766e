"""
Simulation and identification pipelines behind the CLI.

A run directory written by `run_simulate` holds:

    excitation.csv      clean ground acceleration
    input.csv           ground acceleration with input noise
    truth_states.csv    true displacements, velocities and story stiffness
    truth_outputs.csv   noise-free sensor outputs
    measurements.csv    sensor outputs with output noise
    manifest.yaml       config hash, seed, sensors and realized damage

`run_identify` adds estimates.csv, gamma.csv, detections.csv and
metrics.csv.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from tmdid import __version__
from tmdid.core.config import RunConfig
from tmdid.core.csvio import write_series, write_table
from tmdid.core.models import (
    FilterDivergenceError,
    SensorLayout,
    SignalSeries,
    ValidationError,
)
from tmdid.estimation.adaptive import (
    DEFAULT_Z0,
    AdaptationConfig,
    IdentificationResult,
    run_identification,
    z0_from_probability,
)
from tmdid.estimation.model import StructuralFilterModel
from tmdid.estimation.ukf import FilterConfig
from tmdid.harness.metrics import Metrics, compute_metrics
from tmdid.simulation.excitation import (
    NoiseSpec,
    add_noise,
    impulse,
    quake_like,
    series_from_samples,
    white_noise,
)
from tmdid.simulation.records import load_record
from tmdid.simulation.truth import DamageEvent, DamageSchedule, simulate_truth
from tmdid.structure.matrices import StructureSpec

logger = logging.getLogger(__name__)

SIMULATION_FILES = (
    "excitation.csv",
    "input.csv",
    "truth_states.csv",
    "truth_outputs.csv",
    "measurements.csv",
)
MANIFEST_FILE = "manifest.yaml"


@dataclass
class Scenario:
    """One simulated experiment, held in memory."""

    structure: StructureSpec
    sensors: SensorLayout
    excitation: SignalSeries
    inputs: SignalSeries
    states: SignalSeries
    outputs: SignalSeries
    measurements: SignalSeries
    true_stiffness: np.ndarray
    damage_times: list[tuple[int, float]] = field(default_factory=list)
    damage_stiffness: list[float] = field(default_factory=list)


@dataclass
class IdentifyOutput:
    """Result of `run_identify`."""

    result: IdentificationResult
    metrics: Optional[Metrics]
    paths: list[Path] = field(default_factory=list)


def spawn_seeds(seed: int) -> tuple[int, int, int]:
    """Independent seeds for excitation, input noise and output noise."""
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(int(c.generate_state(1)[0]) for c in children)


def build_structure(config: RunConfig, variant: str = "tmd") -> StructureSpec:
    """Structure of a run; the bare variant drops the TMD."""
    return config.structure.to_spec(with_tmd=variant != "bare")


def build_sensors(config: RunConfig, structure: StructureSpec) -> SensorLayout:
    return config.sensors.layout(list(range(structure.n_stories)))


def build_schedule(config: RunConfig, structure: StructureSpec) -> DamageSchedule:
    events = []
    for d in config.damage:
        if not 0 <= d.story < structure.n_stories:
            raise ValidationError(
                f"damage on story {d.story + 1} but structure has "
                f"{structure.n_stories}"
            )
        nominal = structure.story_stiffness[d.story]
        events.append(
            DamageEvent(
                story=d.story,
                stiffness=d.stiffness_for(nominal),
                time=d.time,
                drift=d.drift,
            )
        )
    schedule = DamageSchedule(tuple(events))
    schedule.validate_for(structure)
    return schedule


def build_excitation(config: RunConfig, seed: Optional[int]) -> SignalSeries:
    """Ground acceleration over the configured duration."""
    e = config.excitation
    ts = config.sampling_time
    duration = config.duration
    if e.kind == "white_noise":
        return white_noise(duration, ts, e.rms, seed=seed)
    if e.kind == "impulse":
        return impulse(duration, ts, e.amplitude, e.t_hit)
    if e.kind == "quake_like":
        return quake_like(duration, ts, e.profile, e.peak, seed=seed)
    if e.kind == "none":
        return series_from_samples(np.zeros(int(round(duration / ts))), ts, kind="none")

    record = load_record(e.path, e.format, target_ts=ts)
    samples = record.channel(e.channel) if e.channel else record.values[:, 0]
    count = int(round(duration / ts))
    if samples.size < count:
        logger.warning(
            f"record {e.path} covers {samples.size * ts:.2f} s, "
            f"padding with zeros to {duration:g} s"
        )
        samples = np.concatenate([samples, np.zeros(count - samples.size)])
    return series_from_samples(samples[:count], ts, kind="record", source=str(e.path))


def simulate_scenario(config: RunConfig, variant: str = "tmd") -> Scenario:
    """Excitation, true response and noisy records of one run."""
    structure = build_structure(config, variant)
    sensors = build_sensors(config, structure)
    schedule = build_schedule(config, structure)
    excitation_seed, input_seed, output_seed = spawn_seeds(config.seed)

    excitation = build_excitation(config, excitation_seed)
    truth = simulate_truth(
        structure, schedule, excitation, oversample=config.oversample, sensors=sensors
    )
    inputs = add_noise(excitation, NoiseSpec(config.noise.input_rms, input_seed))
    measurements = add_noise(
        truth.outputs, NoiseSpec(config.noise.output_rms, output_seed)
    )
    return Scenario(
        structure=structure,
        sensors=sensors,
        excitation=excitation,
        inputs=inputs,
        states=truth.states,
        outputs=truth.outputs,
        measurements=measurements,
        true_stiffness=truth.stiffness,
        damage_times=list(truth.damage_times),
        damage_stiffness=list(truth.damage_stiffness),
    )


def _file_manifest(config: RunConfig) -> dict[str, Any]:
    return {"config_sha256": config.config_hash(), "seed": config.seed}


def _stiffness_labels(stories) -> list[str]:
    return [f"k{s + 1}" for s in stories]


def write_scenario(
    scenario: Scenario, config: RunConfig, output_dir: Path
) -> list[Path]:
    """Write the five simulation CSVs and manifest.yaml."""
    output_dir.mkdir(parents=True, exist_ok=True)
    manifest = _file_manifest(config)
    n_stories = scenario.structure.n_stories
    states = scenario.states
    truth_states = SignalSeries(
        values=np.hstack([states.values, scenario.true_stiffness]),
        ts=states.ts,
        labels=states.labels + tuple(_stiffness_labels(range(n_stories))),
        units=states.units + ("N/m",) * n_stories,
    )
    paths = [
        write_series(output_dir / "excitation.csv", scenario.excitation, manifest),
        write_series(
            output_dir / "input.csv",
            scenario.inputs,
            {**manifest, "noise_rms": config.noise.input_rms},
        ),
        write_series(output_dir / "truth_states.csv", truth_states, manifest),
        write_series(output_dir / "truth_outputs.csv", scenario.outputs, manifest),
        write_series(
            output_dir / "measurements.csv",
            scenario.measurements,
            {**manifest, "noise_rms": config.noise.output_rms},
        ),
    ]

    document = {
        "tmdid": __version__,
        "config_sha256": manifest["config_sha256"],
        "seed": config.seed,
        "sampling_time": config.sampling_time,
        "samples": scenario.measurements.n_samples,
        "structure": scenario.structure.n_stories,
        "tmd": scenario.structure.tmd is not None,
        "sensors": list(scenario.sensors.labels),
        "damage": [
            {
                "story": story + 1,
                "time": time,
                "stiffness": float(stiffness),
            }
            for (story, time), stiffness in zip(
                scenario.damage_times, scenario.damage_stiffness
            )
        ],
        "files": list(SIMULATION_FILES),
    }
    manifest_path = output_dir / MANIFEST_FILE
    with open(manifest_path, "w") as f:
        yaml.safe_dump(document, f, default_flow_style=False, sort_keys=False)
    paths.append(manifest_path)
    logger.info(f"wrote simulation to {output_dir}")
    return paths


def run_simulate(config: RunConfig, output_dir: Optional[Path] = None) -> list[Path]:
    """
    Simulate a run and write its records.

    Returns:
        Written paths

    Raises:
        ValidationError: On invalid configuration
    """
    output_dir = config.resolved_output_dir() if output_dir is None else output_dir
    scenario = simulate_scenario(config)
    return write_scenario(scenario, config, output_dir)


def load_scenario(config: RunConfig, input_dir: Path) -> Scenario:
    """
    Read a run directory written by `run_simulate`.

    Truth files are optional; without them no metrics are computed.

    Raises:
        ValidationError: If the measurement or input file is missing or
            does not match the configured structure
    """
    for name in ("measurements.csv", "input.csv"):
        if not (input_dir / name).exists():
            raise ValidationError(f"{name} not found in {input_dir}")

    structure = build_structure(config)
    sensors = build_sensors(config, structure)
    measurements = load_record(input_dir / "measurements.csv")
    inputs = load_record(input_dir / "input.csv")
    if measurements.labels != tuple(sensors.labels):
        raise ValidationError(
            f"measurement channels {', '.join(measurements.labels)} do not match "
            f"configured sensors {', '.join(sensors.labels)}"
        )
    if not math.isclose(measurements.ts, config.sampling_time, rel_tol=1e-9):
        raise ValidationError(
            f"measurements sampled at {measurements.ts} s, config says "
            f"{config.sampling_time} s"
        )

    n_stories = structure.n_stories
    true_stiffness = np.empty((0, n_stories))
    states = measurements
    truth_path = input_dir / "truth_states.csv"
    if truth_path.exists():
        truth = load_record(truth_path)
        columns = _stiffness_labels(range(n_stories))
        true_stiffness = np.column_stack([truth.channel(c) for c in columns])
        states = truth

    damage_times: list[tuple[int, float]] = []
    damage_stiffness: list[float] = []
    manifest_path = input_dir / MANIFEST_FILE
    if manifest_path.exists():
        with open(manifest_path) as f:
            document = yaml.safe_load(f) or {}
        events = document.get("damage", [])
        damage_times = [(int(d["story"]) - 1, float(d["time"])) for d in events]
        damage_stiffness = [float(d["stiffness"]) for d in events]

    return Scenario(
        structure=structure,
        sensors=sensors,
        excitation=inputs,
        inputs=inputs,
        states=states,
        outputs=measurements,
        measurements=measurements,
        true_stiffness=true_stiffness,
        damage_times=damage_times,
        damage_stiffness=damage_stiffness,
    )


def build_filter(
    config: RunConfig, structure: StructureSpec, sensors: SensorLayout
) -> tuple[StructuralFilterModel, FilterConfig, AdaptationConfig, np.ndarray]:
    """Filter model, UKF setup, adaptation setup and initial stiffness."""
    f = config.filter
    a = config.adaptation
    model = StructuralFilterModel(
        structure,
        sensors,
        config.sampling_time,
        order=f.taylor_order,
        identified=f.identified,
    )
    filter_cfg = FilterConfig.from_scalars(
        model.n_dof,
        model.n_params,
        model.output_dim,
        f.p0,
        f.q,
        f.r,
        p0_param=f.p0_param,
        q_param=f.q_param,
        stiffness_unit=f.stiffness_unit,
        alpha=f.alpha,
        beta=f.beta,
        kappa=f.kappa,
        taylor_order=model.order,
    )
    if a.z0 is not None:
        z0 = a.z0
    elif a.probability is not None:
        z0 = z0_from_probability(a.probability)
    else:
        z0 = DEFAULT_Z0
    adapt_cfg = AdaptationConfig.for_model(
        model,
        z0=z0,
        p_adapt=a.p_adapt * f.stiffness_unit**2,
        probe_reduction=a.probe_reduction,
        cooldown=a.cooldown,
        enabled=a.enabled,
    )

    if f.initial_stiffness is not None:
        if len(f.initial_stiffness) != model.n_params:
            raise ValidationError(
                f"initial_stiffness has {len(f.initial_stiffness)} value(s) for "
                f"{model.n_params} identified stor(ies)"
            )
        initial = np.array(f.initial_stiffness) * f.stiffness_unit
    else:
        initial = model.nominal_stiffness * f.initial_stiffness_factor
    return model, filter_cfg, adapt_cfg, initial


def identify_scenario(
    config: RunConfig, scenario: Scenario
) -> tuple[IdentificationResult, Optional[Metrics]]:
    """Run the adaptive UKF on a scenario and score it when truth is known."""
    model, filter_cfg, adapt_cfg, initial = build_filter(
        config, scenario.structure, scenario.sensors
    )
    result = run_identification(
        scenario.measurements, scenario.inputs, model, filter_cfg, adapt_cfg, initial
    )
    metrics = None
    if scenario.true_stiffness.size:
        metrics = compute_metrics(
            result, scenario.true_stiffness[-1], scenario.damage_times
        )
    return result, metrics


def write_identification(
    result: IdentificationResult,
    model_labels: list[str],
    config: RunConfig,
    output_dir: Path,
) -> list[Path]:
    """Write estimates.csv, gamma.csv and detections.csv."""
    manifest = {**_file_manifest(config), "completed": result.completed}
    n = result.n_dof
    k_labels = _stiffness_labels(result.identified)
    estimates = SignalSeries(
        values=np.hstack([result.means, result.parameter_variances]),
        ts=result.ts,
        labels=tuple(f"x{i + 1}" for i in range(n))
        + tuple(f"v{i + 1}" for i in range(n))
        + tuple(k_labels)
        + tuple(f"var_{k}" for k in k_labels),
        units=("m",) * n + ("m/s",) * n + ("N/m",) * len(k_labels)
        + ("(N/m)^2",) * len(k_labels),
    )
    gamma = SignalSeries(
        values=np.hstack([result.gammas[:, np.newaxis], result.innovations]),
        ts=result.ts,
        labels=("gamma",) + tuple(f"e_{label}" for label in model_labels),
        units=("",) + ("",) * len(model_labels),
    )
    detection_rows = [
        (e.step, e.time, e.gamma, result.identified[e.index] + 1, *e.probe_gammas)
        for e in result.log.events
    ]
    return [
        write_series(output_dir / "estimates.csv", estimates, manifest),
        write_series(
            output_dir / "gamma.csv", gamma, {**manifest, "threshold": result.threshold}
        ),
        write_table(
            output_dir / "detections.csv",
            ["step", "time", "gamma", "story"]
            + [f"probe_gamma_{k}" for k in k_labels],
            detection_rows,
            units=["", "s", "", ""] + [""] * len(k_labels),
            manifest={**manifest, "threshold": result.threshold},
        ),
    ]


def run_identify(
    config: RunConfig,
    input_dir: Optional[Path] = None,
    output_dir: Optional[Path] = None,
) -> IdentifyOutput:
    """
    Identify stiffness from a config (simulated in memory) or a run directory.

    On divergence the partial histories are written before the error is
    re-raised.

    Raises:
        ValidationError: On invalid configuration or input files
        FilterDivergenceError: If the filter diverges
    """
    output_dir = config.resolved_output_dir() if output_dir is None else output_dir
    if input_dir is not None:
        scenario = load_scenario(config, input_dir)
    else:
        scenario = simulate_scenario(config)
    output_dir.mkdir(parents=True, exist_ok=True)

    labels = list(scenario.sensors.labels)
    try:
        result, metrics = identify_scenario(config, scenario)
    except FilterDivergenceError as e:
        if e.partial is not None:
            paths = write_identification(e.partial, labels, config, output_dir)
            logger.error(f"partial histories written: {', '.join(map(str, paths))}")
        raise

    paths = write_identification(result, labels, config, output_dir)
    if metrics is not None:
        paths.append(metrics.write(output_dir / "metrics.csv", _file_manifest(config)))
    logger.info(f"wrote identification to {output_dir}")
    return IdentifyOutput(result=result, metrics=metrics, paths=paths)
