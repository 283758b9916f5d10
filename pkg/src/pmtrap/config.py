"""Experiment configuration: YAML schema, validation, run manifests.

The config file is a nested key-value YAML document (comments allowed).  Every
sub-section maps onto one of the domain parameter types and is validated by
that type's own invariants; unknown keys are rejected with field-level
diagnostics.  ``field_factor: null`` selects the calibrated value (a single
bare rod escapes at 41 mW and 296 K).

Schema (defaults shown by ``default_config_yaml()``):

    seed                 root RNG seed; all streams derive from it
    output_dir           default dataset directory
    mirror               focal_length_m, aperture_radius_m, bore_radius_m,
                         reflectivity
    rod                  length_m, diameter_m, core_diameter_m,
                         shell_thickness_m
    material             refractive_index, density_kg_m3
    gas                  viscosity_pa_s, mean_free_path_m, temperature_k
    trap                 wavelength_m, power_w, field_factor (null=calibrated)
    cluster              n_rods, packing
    emitter              quantum_yield, auger_pair_prob (null=size law),
                         independent_emitters, blink_mode, grey_attenuation,
                         bright_dwell_s, grey_dwell_s, dark_attenuation,
                         burst_dwell_s, dark_dwell_s
    excitation           repetition_rate_hz, pulse_duration_s,
                         average_power_w, saturation_power_w
    detection            apd_quantum_efficiency, mirror_reflectivity,
                         setup_transmission, a_pi, splitter_ratio
    simulation           time_step_s, duration_s, detector_gain_v_per_m,
                         detector_noise_floor, axial_width_m
    acquisition          duration_s (time-tag stream length)
    image                n_pixels, half_extent_f, noise_rms_fraction
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import __version__
from .errors import ConfigError, MissingArtifactError
from .io_formats import sha256_file
from .langevin import SimConfig
from .mirror_optics import MirrorGeometry
from .photon_emitter import DetectionChain, EmitterModel, ExcitationConfig
from .trap_mechanics import (
    ClusterSample,
    GasParams,
    MaterialParams,
    RodGeometry,
    TrapParams,
)

__all__ = [
    "ExperimentConfig",
    "RunManifest",
    "default_config_yaml",
    "load_config",
    "dump_config",
    "write_manifest",
    "verify_manifest",
]

_DEFAULTS = {
    "seed": 12345,
    "output_dir": "runs/default",
    "mirror": {
        "focal_length_m": 2.1e-3,
        "aperture_radius_m": 10e-3,
        "bore_radius_m": 0.75e-3,
        "reflectivity": 0.72,
    },
    "rod": {
        "length_m": 35e-9,
        "diameter_m": 7e-9,
        "core_diameter_m": 2.7e-9,
        "shell_thickness_m": 1.6e-9,
    },
    "material": {"refractive_index": 2.34, "density_kg_m3": 4826.0},
    "gas": {"viscosity_pa_s": 1.82e-5, "mean_free_path_m": 68e-9,
            "temperature_k": 296.0},
    "trap": {"wavelength_m": 1064e-9, "power_w": 0.36, "field_factor": None},
    "cluster": {"n_rods": 64, "packing": "parallel_close_packed"},
    "emitter": {
        "quantum_yield": 0.7,
        "auger_pair_prob": None,
        "independent_emitters": False,
        "blink_mode": "two_state",
        "grey_attenuation": 3.0,
        "bright_dwell_s": 5e-3,
        "grey_dwell_s": 15e-3,
        "dark_attenuation": 0.0,
        "burst_dwell_s": 1.67e-4,
        "dark_dwell_s": 5e-3,
    },
    "excitation": {
        "repetition_rate_hz": 1e6,
        "pulse_duration_s": 82e-9,
        "average_power_w": 2e-6,
        "saturation_power_w": 2.63e-6,
    },
    "detection": {
        "apd_quantum_efficiency": 0.69,
        "mirror_reflectivity": 0.72,
        "setup_transmission": 0.83,
        "a_pi": 0.31,
        "splitter_ratio": 0.5,
    },
    "simulation": {
        "time_step_s": 4e-9,
        "duration_s": 0.01,
        "detector_gain_v_per_m": 1e6,
        "detector_noise_floor": 1e-6,
        "axial_width_m": 532e-9,
    },
    "acquisition": {"duration_s": 10.0},
    "image": {"n_pixels": 256, "half_extent_f": 5.0,
              "noise_rms_fraction": 0.02},
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment configuration; fields mirror the YAML sections."""

    seed: int
    output_dir: str
    mirror: MirrorGeometry
    rod: RodGeometry
    material: MaterialParams
    gas: GasParams
    trap: TrapParams
    cluster: ClusterSample
    emitter: EmitterModel
    excitation: ExcitationConfig
    detection: DetectionChain
    simulation: SimConfig
    acquisition_duration: float
    image_n_pixels: int
    image_half_extent: float
    image_noise_fraction: float
    axial_width: float
    raw: dict = field(compare=False, repr=False, default_factory=dict)


def default_config_yaml() -> str:
    """The documented default configuration, serialized to YAML."""
    return yaml.safe_dump(_DEFAULTS, sort_keys=True, default_flow_style=False)


def _check_unknown(section: str, data: dict, allowed: set, errors: list) -> None:
    for key in data:
        if key not in allowed:
            errors.append(f"{section}: unknown key {key!r}")


def _section(raw: dict, name: str, errors: list) -> dict:
    value = raw.get(name, {})
    if value is None:
        value = {}
    if not isinstance(value, dict):
        errors.append(f"{name}: expected a mapping")
        return {}
    merged = dict(_DEFAULTS[name])
    _check_unknown(name, value, set(merged), errors)
    merged.update({k: v for k, v in value.items() if k in merged})
    return merged


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a raw mapping into an ExperimentConfig.

    Collects one diagnostic per offending field before raising ConfigError.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping", ["root: not a mapping"])
    errors: list[str] = []
    _check_unknown("root", raw, set(_DEFAULTS), errors)

    sections = {name: _section(raw, name, errors) for name in _DEFAULTS
                if isinstance(_DEFAULTS[name], dict)}

    def build(section, ctor, mapping):
        data = sections[section]
        kwargs = {dst: data[src] for src, dst in mapping.items()}
        try:
            return ctor(**kwargs)
        except (ValueError, TypeError) as exc:
            errors.append(f"{section}: {exc}")
            return None

    mirror = build("mirror", MirrorGeometry, {
        "focal_length_m": "focal_length", "aperture_radius_m": "aperture_radius",
        "bore_radius_m": "bore_radius", "reflectivity": "reflectivity"})
    rod = build("rod", RodGeometry, {
        "length_m": "length", "diameter_m": "diameter",
        "core_diameter_m": "core_diameter", "shell_thickness_m": "shell_thickness"})
    material = build("material", MaterialParams, {
        "refractive_index": "refractive_index", "density_kg_m3": "density"})
    gas = build("gas", GasParams, {
        "viscosity_pa_s": "viscosity", "mean_free_path_m": "mean_free_path",
        "temperature_k": "temperature"})
    trap = build("trap", TrapParams, {
        "wavelength_m": "wavelength", "power_w": "power",
        "field_factor": "field_factor"})

    cluster = None
    if rod is not None and material is not None:
        try:
            cluster = ClusterSample(n_rods=sections["cluster"]["n_rods"],
                                    rod=rod, material=material,
                                    packing=sections["cluster"]["packing"])
        except (ValueError, TypeError) as exc:
            errors.append(f"cluster: {exc}")

    emitter = None
    if cluster is not None:
        e = sections["emitter"]
        pair_prob = e["auger_pair_prob"]
        if pair_prob is None:
            from .photon_emitter import auger_prob_for_cluster
            pair_prob = auger_prob_for_cluster(cluster.n_rods)
        try:
            emitter = EmitterModel(
                n_rods=cluster.n_rods, quantum_yield=e["quantum_yield"],
                auger_pair_prob=pair_prob,
                independent_emitters=e["independent_emitters"],
                blink_mode=e["blink_mode"],
                grey_attenuation=e["grey_attenuation"],
                bright_dwell=e["bright_dwell_s"], grey_dwell=e["grey_dwell_s"],
                dark_attenuation=e["dark_attenuation"],
                burst_dwell=e["burst_dwell_s"], dark_dwell=e["dark_dwell_s"])
        except (ValueError, TypeError) as exc:
            errors.append(f"emitter: {exc}")

    excitation = build("excitation", ExcitationConfig, {
        "repetition_rate_hz": "repetition_rate",
        "pulse_duration_s": "pulse_duration",
        "average_power_w": "average_power",
        "saturation_power_w": "saturation_power"})
    detection = build("detection", DetectionChain, {
        "apd_quantum_efficiency": "apd_quantum_efficiency",
        "mirror_reflectivity": "mirror_reflectivity",
        "setup_transmission": "setup_transmission",
        "a_pi": "a_pi", "splitter_ratio": "splitter_ratio"})

    seed = raw.get("seed", _DEFAULTS["seed"])
    if not isinstance(seed, int):
        errors.append("seed: must be an integer")
        seed = 0
    simulation = None
    sim = sections["simulation"]
    try:
        simulation = SimConfig(time_step=sim["time_step_s"],
                               duration=sim["duration_s"], seed=seed,
                               detector_gain=sim["detector_gain_v_per_m"],
                               detector_noise_floor=sim["detector_noise_floor"])
    except (ValueError, TypeError) as exc:
        errors.append(f"simulation: {exc}")

    acq = sections["acquisition"]
    img = sections["image"]
    if not (isinstance(acq["duration_s"], (int, float)) and acq["duration_s"] > 0):
        errors.append("acquisition: duration_s must be > 0")
    if not (isinstance(img["n_pixels"], int) and img["n_pixels"] >= 16):
        errors.append("image: n_pixels must be an integer >= 16")
    if not (isinstance(img["half_extent_f"], (int, float)) and img["half_extent_f"] > 0):
        errors.append("image: half_extent_f must be > 0")
    if not (isinstance(img["noise_rms_fraction"], (int, float))
            and 0 <= img["noise_rms_fraction"] < 1):
        errors.append("image: noise_rms_fraction must be in [0, 1)")
    if sim["axial_width_m"] <= 0:
        errors.append("simulation: axial_width_m must be > 0")

    if errors:
        raise ConfigError(f"{len(errors)} config error(s)", errors)

    canonical = _merge_canonical(raw)
    return ExperimentConfig(
        seed=seed, output_dir=str(raw.get("output_dir", _DEFAULTS["output_dir"])),
        mirror=mirror, rod=rod, material=material, gas=gas, trap=trap,
        cluster=cluster, emitter=emitter, excitation=excitation,
        detection=detection, simulation=simulation,
        acquisition_duration=float(acq["duration_s"]),
        image_n_pixels=int(img["n_pixels"]),
        image_half_extent=float(img["half_extent_f"]),
        image_noise_fraction=float(img["noise_rms_fraction"]),
        axial_width=float(sim["axial_width_m"]),
        raw=canonical)


def _merge_canonical(raw: dict) -> dict:
    merged = {}
    for name, default in _DEFAULTS.items():
        if isinstance(default, dict):
            merged[name] = dict(default)
            merged[name].update({k: v for k, v in (raw.get(name) or {}).items()})
        else:
            merged[name] = raw.get(name, default)
    return merged


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}",
                          [f"path: {path} does not exist"])
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file is not valid YAML: {exc}",
                          [f"yaml: {exc}"])
    if raw is None:
        raw = {}
    return parse_config(raw)


def dump_config(config: ExperimentConfig) -> str:
    """Serialize back to YAML; parse(dump(parse(x))) == parse(x)."""
    return yaml.safe_dump(config.raw, sort_keys=True, default_flow_style=False)


def config_hash(config: ExperimentConfig) -> str:
    blob = json.dumps(config.raw, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


@dataclass
class RunManifest:
    config_hash: str
    toolkit_version: str
    seed: int
    artifacts: dict          # name -> {"sha256": ..., "bytes": ...}
    wall_clock_utc: str
    elapsed_s: float


def write_manifest(directory, config: ExperimentConfig, artifact_names,
                   elapsed_s: float) -> RunManifest:
    """Checksum the artifacts and write manifest.json (the completion marker)."""
    directory = Path(directory)
    artifacts = {}
    for name in artifact_names:
        path = directory / name
        if not path.exists():
            raise MissingArtifactError(f"cannot manifest missing artifact {name}")
        artifacts[name] = {"sha256": sha256_file(path),
                           "bytes": path.stat().st_size}
    manifest = RunManifest(
        config_hash=config_hash(config), toolkit_version=__version__,
        seed=config.seed, artifacts=artifacts,
        wall_clock_utc=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        elapsed_s=elapsed_s)
    payload = {
        "config_hash": manifest.config_hash,
        "toolkit_version": manifest.toolkit_version,
        "seed": manifest.seed,
        "artifacts": manifest.artifacts,
        "wall_clock_utc": manifest.wall_clock_utc,
        "elapsed_s": manifest.elapsed_s,
    }
    (directory / "manifest.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return manifest


def verify_manifest(directory) -> dict:
    """Check manifest presence and artifact checksums; returns the manifest dict."""
    directory = Path(directory)
    path = directory / "manifest.json"
    if not path.exists():
        raise MissingArtifactError(f"manifest.json missing in {directory}")
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise MissingArtifactError(f"manifest.json corrupt: {exc}")
    for name, entry in manifest.get("artifacts", {}).items():
        artifact = directory / name
        if not artifact.exists():
            raise MissingArtifactError(f"artifact missing: {name}")
        if sha256_file(artifact) != entry["sha256"]:
            raise MissingArtifactError(f"artifact checksum mismatch: {name}")
    return manifest
