"""Command-line entry points: simulate, analyze, reproduce, validate-config.

Exit codes: 0 success, 2 invalid configuration or usage, 3 I/O failure,
4 missing or corrupt dataset artifact.  The default output root comes from
the PMTRAP_OUTPUT_ROOT environment variable (falling back to the current
directory); dataset directories default to the config's ``output_dir``
underneath it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import analysis, io_formats, langevin, mirror_optics, photon_emitter
from . import trap_mechanics
from .config import (
    ExperimentConfig,
    default_config_yaml,
    load_config,
    parse_config,
    verify_manifest,
    write_manifest,
)
from .errors import ConfigError, MissingArtifactError, PmtrapError
from .reproduce import REPRODUCE_TARGETS, run_target
from .seeding import rng_for

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_MISSING_ARTIFACT = 4

DATASET_ARTIFACTS = (
    "tags.bin", "detector.ts",
    "image_total.csv", "image_total.csv.json",
    "image_vertical.csv", "image_vertical.csv.json",
    "image_horizontal.csv", "image_horizontal.csv.json",
)


def _cluster_physics(config: ExperimentConfig) -> dict:
    """Derived quantities of the configured cluster at the configured trap."""
    cluster = config.cluster
    alpha = trap_mechanics.polarizability(config.rod, config.material,
                                          n_rods=cluster.n_rods)
    mass = trap_mechanics.cluster_mass(cluster)
    depth = trap_mechanics.trap_depth(alpha, config.trap)
    damping = trap_mechanics.cluster_damping_rate(cluster, config.gas)
    stiffness = langevin.TrapStiffness.from_trap_depth(depth, w_z=config.axial_width)
    return {
        "alpha": alpha,
        "mass": mass,
        "trap_depth": depth,
        "gamma": damping.rad_per_s,
        "p_min": trap_mechanics.min_power(alpha, config.gas.temperature,
                                          config.trap.field_factor),
        "stiffness": stiffness,
        "omega": float(np.sqrt(stiffness.k_z / mass)),
    }


def simulate_dataset(config: ExperimentConfig, out_dir) -> dict:
    """Generate the full synthetic dataset; manifest.json is written last."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    physics = _cluster_physics(config)

    # motion readout
    sim_cfg = langevin.SimConfig(
        time_step=config.simulation.time_step,
        duration=config.simulation.duration,
        seed=config.seed,
        detector_gain=config.simulation.detector_gain,
        detector_noise_floor=config.simulation.detector_noise_floor)
    z = langevin.simulate_axial_motion(physics["stiffness"], physics["gamma"],
                                       physics["mass"], config.gas.temperature,
                                       sim_cfg)
    detector = langevin.detector_signal(z, sim_cfg)
    io_formats.write_time_series(out_dir / "detector.ts", detector)

    # photon stream
    stream = photon_emitter.generate_time_tags(
        config.excitation, config.emitter, config.detection,
        config.acquisition_duration, seed=config.seed)
    io_formats.write_time_tags(out_dir / "tags.bin", stream,
                               configs={"a_pi": config.detection.a_pi,
                                        "n_rods": config.cluster.n_rods})

    # aperture images at the configured mixture, with camera noise
    mix = mirror_optics.DipoleMix(a_pi=config.detection.a_pi)
    total = mirror_optics.mix_image(mix, config.mirror,
                                    n_pixels=config.image_n_pixels,
                                    half_extent=config.image_half_extent)
    vertical = mirror_optics.polarized_projection(total, mix, "vertical")
    horizontal = mirror_optics.polarized_projection(total, mix, "horizontal")
    if config.image_noise_fraction > 0:
        rng = rng_for(config.seed, "image-noise")
        scale = config.image_noise_fraction * float(total.pixels.max())
        for img in (total, vertical, horizontal):
            img.pixels = np.clip(
                img.pixels + rng.normal(0.0, scale, img.pixels.shape), 0.0, None)
    io_formats.write_image_csv(out_dir / "image_total.csv", total)
    io_formats.write_image_csv(out_dir / "image_vertical.csv", vertical)
    io_formats.write_image_csv(out_dir / "image_horizontal.csv", horizontal)

    manifest = write_manifest(out_dir, config, DATASET_ARTIFACTS,
                              elapsed_s=time.time() - started)
    return {
        "out_dir": str(out_dir),
        "n_events": len(stream),
        "gamma_over_2pi_hz": physics["gamma"] / (2 * np.pi),
        "omega_over_2pi_hz": physics["omega"] / (2 * np.pi),
        "p_min_w": physics["p_min"],
        "config_hash": manifest.config_hash,
    }


def _profile_in_aperture(image: mirror_optics.ApertureImage) -> mirror_optics.RadialProfile:
    """Azimuthal average restricted to the unclipped annulus."""
    profile = mirror_optics.azimuthal_average(image)
    bore = image.metadata.get("bore_radius_f", 0.0)
    rim = image.metadata.get("rim_radius_f", np.inf)
    pitch = image.pixel_pitch
    keep = (profile.radii > bore + pitch) & (profile.radii < rim - pitch)
    return mirror_optics.RadialProfile(
        radii=profile.radii[keep], intensities=profile.intensities[keep],
        counts=None if profile.counts is None else profile.counts[keep],
        variances=None if profile.variances is None else profile.variances[keep])


def analyze_dataset(dataset_dir, out_dir=None) -> dict:
    """Run the measurement pipeline on a simulated dataset directory."""
    dataset_dir = Path(dataset_dir)
    out_dir = dataset_dir if out_dir is None else Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    verify_manifest(dataset_dir)

    stream = io_formats.read_time_tags(dataset_dir / "tags.bin")
    rep_rate = stream.metadata.get("repetition_rate", 1e6)
    g2 = analysis.g2_zero(stream, 1.0 / rep_rate)
    blink = analysis.blink_analysis(stream)

    detector = io_formats.read_time_series(dataset_dir / "detector.ts")
    spectrum = analysis.power_spectral_density(detector)
    lorentzian = analysis.fit_lorentzian(spectrum)

    image = io_formats.read_image_csv(dataset_dir / "image_total.csv")
    profile = _profile_in_aperture(image)
    dipole_fit = mirror_optics.fit_dipole_fraction(profile)
    asymmetry = mirror_optics.asymmetry_metric(image)

    results = {
        "g2": {"value": g2.g2, "error": g2.error,
               "zero_lag_counts": g2.zero_lag_counts},
        "blink": {
            "classification": blink.classification,
            "grey_mean_rate_hz": blink.grey_mean_rate,
            "grey_rms_width_hz": blink.grey_rms_width,
            "peak_rates_hz": blink.peak_rates.tolist(),
            "burst_fit_r2": blink.burst_fit_r2,
        },
        "motion": {
            "gamma_over_2pi_hz": lorentzian.width,
            "gamma_rad_per_s": lorentzian.gamma,
            "center_hz": lorentzian.center,
            "width_ci95_hz": list(lorentzian.width_ci95),
        },
        "dipole_fraction": {
            "a_pi": dipole_fit.a_pi,
            "std_error": dipole_fit.a_pi_std_error,
            "residual_norm": dipole_fit.residual_norm,
        },
        "asymmetry": {"score": asymmetry.score,
                      "classification": asymmetry.classification},
    }
    (out_dir / "results.json").write_text(
        json.dumps(results, sort_keys=True, indent=2) + "\n")

    np.savetxt(out_dir / "spectrum.csv",
               np.column_stack([spectrum.frequencies, spectrum.densities]),
               delimiter=",", header="frequency_hz,psd", comments="")
    np.savetxt(out_dir / "g2_histogram.csv",
               np.column_stack([g2.lags, g2.coincidences]),
               delimiter=",", fmt="%d", header="pulse_lag,coincidences",
               comments="")
    np.savetxt(out_dir / "blink_histogram.csv",
               np.column_stack([blink.count_values, blink.occurrences]),
               delimiter=",", fmt="%d", header="counts_per_bin,occurrences",
               comments="")
    io_formats.write_profile_csv(out_dir / "radial_profile.csv", profile)
    return results


def _load_config_arg(args) -> ExperimentConfig:
    if args.config is not None:
        config = load_config(args.config)
    else:
        config = parse_config(yaml.safe_load(default_config_yaml()))
    if getattr(args, "seed", None) is not None:
        raw = dict(config.raw)
        raw["seed"] = args.seed
        config = parse_config(raw)
    return config


def _output_root() -> Path:
    return Path(os.environ.get("PMTRAP_OUTPUT_ROOT", "."))


def _resolve_out(args, config: ExperimentConfig) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    return _output_root() / config.output_dir


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pmtrap",
        description="Simulator and analysis toolkit for optically trapped "
                    "rod-shaped quantum emitters in a deep parabolic mirror.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate a synthetic dataset")
    p_sim.add_argument("--config", help="YAML config file (default: built-in)")
    p_sim.add_argument("--seed", type=int, help="override the root seed")
    p_sim.add_argument("--out", help="dataset directory")
    p_sim.add_argument("--threads", type=int, default=1)

    p_ana = sub.add_parser("analyze", help="run the measurement pipeline")
    p_ana.add_argument("dataset", help="dataset directory with manifest.json")
    p_ana.add_argument("--out", help="results directory (default: dataset dir)")
    p_ana.add_argument("--max-lag", type=int, default=50,
                       help="side-peak lag range for g2 normalization")

    p_rep = sub.add_parser("reproduce", help="run a synthetic campaign")
    p_rep.add_argument("--figure", required=True,
                       choices=sorted(REPRODUCE_TARGETS) + ["all"])
    p_rep.add_argument("--config", help="YAML config file (default: built-in)")
    p_rep.add_argument("--seed", type=int)
    p_rep.add_argument("--out", help="output directory")
    p_rep.add_argument("--threads", type=int, default=1)

    p_val = sub.add_parser("validate-config", help="check a config file")
    p_val.add_argument("--config", required=True)

    p_def = sub.add_parser("default-config", help="print the default config YAML")

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK

    try:
        if args.command == "simulate":
            config = _load_config_arg(args)
            out_dir = _resolve_out(args, config)
            info = simulate_dataset(config, out_dir)
            print(json.dumps(info, sort_keys=True, indent=2))
        elif args.command == "analyze":
            results = analyze_dataset(args.dataset, args.out)
            print(json.dumps(results, sort_keys=True, indent=2))
        elif args.command == "reproduce":
            config = _load_config_arg(args)
            out_dir = Path(args.out) if args.out else (_output_root() / "reproduce")
            names = sorted(REPRODUCE_TARGETS) if args.figure == "all" else [args.figure]
            summaries = {}
            for name in names:
                summaries[name] = run_target(name, config, out_dir,
                                             seed=args.seed, threads=args.threads)
            print(json.dumps(summaries if len(names) > 1 else summaries[names[0]],
                             sort_keys=True, indent=2))
        elif args.command == "validate-config":
            load_config(args.config)
            print("OK")
        elif args.command == "default-config":
            print(default_config_yaml(), end="")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for detail in exc.details:
            print(f"  - {detail}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # parameter combinations rejected by the physics layers
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_ARTIFACT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PmtrapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
