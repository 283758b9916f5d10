"""Optical-trap mechanics of rods and rod clusters in the Rayleigh regime.

Model chain: a CdS rod of volume V has scalar polarizability
alpha = eps0 * V * (n^2 - 1); the trap depth is U0 = alpha/2 * E_max^2 with
E_max^2 = kappa * P, where the field factor kappa stands in for the focal
field calibration and is fixed so a single bare rod escapes (U0 = kB*T) at
P_min = 41 mW.  A cluster of N parallel rods scales the polarizability and
mass by N and presents the drag cross-section of N shell-padded rod discs,
r_z = (d/2 + shell) * sqrt(N).  Gas damping follows the slip-corrected Stokes
rate

    Gamma = 6*pi*eta*r/m * 0.619/(0.619 + Kn) * (1 + c_K),
    c_K = 0.31*Kn / (0.785 + 1.152*Kn + Kn^2),   Kn = Lambda/r.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from . import constants as const
from .errors import InsufficientDataError

__all__ = [
    "RodGeometry",
    "MaterialParams",
    "GasParams",
    "TrapParams",
    "ClusterSample",
    "DampingRate",
    "PowerLawFit",
    "polarizability",
    "calibrated_field_factor",
    "trap_depth",
    "min_power",
    "rods_from_pmin",
    "effective_radius",
    "cluster_mass",
    "damping_rate",
    "cluster_damping_rate",
    "gamma_pmin_exponent",
]


@dataclass(frozen=True)
class RodGeometry:
    """Single-rod geometry (meters)."""

    length: float = const.ROD_LENGTH
    diameter: float = const.ROD_DIAMETER
    core_diameter: float = const.ROD_CORE_DIAMETER  # informational
    shell_thickness: float = const.ROD_SHELL_THICKNESS

    def __post_init__(self):
        for name in ("length", "diameter", "core_diameter", "shell_thickness"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.core_diameter >= self.diameter:
            raise ValueError("core_diameter must be smaller than rod diameter")

    @property
    def volume(self) -> float:
        """Bare rod volume (no alkyl shell)."""
        return np.pi * (self.diameter / 2.0) ** 2 * self.length

    @property
    def padded_radius(self) -> float:
        """Rod radius including the alkyl shell, used for drag."""
        return self.diameter / 2.0 + self.shell_thickness


@dataclass(frozen=True)
class MaterialParams:
    refractive_index: float = const.CDS_REFRACTIVE_INDEX  # at the trap wavelength
    density: float = const.CDS_DENSITY                    # kg/m^3

    def __post_init__(self):
        if self.refractive_index <= 1:
            raise ValueError("refractive_index must be > 1")
        if self.density <= 0:
            raise ValueError("density must be > 0")


@dataclass(frozen=True)
class GasParams:
    viscosity: float = const.AIR_VISCOSITY          # Pa s
    mean_free_path: float = const.AIR_MEAN_FREE_PATH  # m
    temperature: float = const.ROOM_TEMPERATURE      # K

    def __post_init__(self):
        for name in ("viscosity", "mean_free_path", "temperature"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")


@dataclass(frozen=True)
class TrapParams:
    """Trap beam parameters; ``field_factor`` maps power to peak squared field."""

    wavelength: float = const.TRAP_WAVELENGTH  # m
    power: float = 0.36                        # W
    field_factor: float | None = None          # V^2 m^-2 W^-1; None -> calibrated

    def __post_init__(self):
        if self.wavelength <= 0:
            raise ValueError("wavelength must be > 0")
        if self.power < 0:
            raise ValueError("power must be >= 0")
        if self.field_factor is None:
            object.__setattr__(self, "field_factor", calibrated_field_factor())
        if self.field_factor <= 0:
            raise ValueError("field_factor must be > 0")


@dataclass(frozen=True)
class ClusterSample:
    """N parallel rods in close packing, aligned along the optical axis."""

    n_rods: int = 1
    rod: RodGeometry = RodGeometry()
    material: MaterialParams = MaterialParams()
    packing: str = "parallel_close_packed"

    def __post_init__(self):
        if self.n_rods < 1:
            raise ValueError("n_rods must be >= 1")
        if self.packing != "parallel_close_packed":
            raise ValueError(f"unsupported packing model {self.packing!r}")


def polarizability(rod: RodGeometry | None = None,
                   material: MaterialParams | None = None,
                   n_rods: int = 1) -> float:
    """Scalar polarizability alpha = eps0 * V_rod * (n^2 - 1), times n_rods.

    Uses the bare rod volume (the alkyl shell is index-matched to air for
    trapping purposes and enters only the drag cross-section).
    """
    rod = rod or RodGeometry()
    material = material or MaterialParams()
    alpha1 = const.VACUUM_PERMITTIVITY * rod.volume * (material.refractive_index**2 - 1.0)
    return n_rods * alpha1


def calibrated_field_factor(rod: RodGeometry | None = None,
                            material: MaterialParams | None = None,
                            temperature: float = const.ROOM_TEMPERATURE,
                            escape_power: float = const.SINGLE_ROD_ESCAPE_POWER) -> float:
    """Field factor kappa fixed so one bare rod has U0 = kB*T at ``escape_power``.

    This is a calibration standing in for the focal-field computation, not a
    first-principles constant; kappa ~ 3.7e15 V^2 m^-2 W^-1 with defaults.
    """
    alpha1 = polarizability(rod, material)
    return 2.0 * const.BOLTZMANN * temperature / (alpha1 * escape_power)


def trap_depth(alpha: float, trap: TrapParams) -> float:
    """Trap depth U0 = (alpha/2) * kappa * P in joules; linear in power."""
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    return 0.5 * alpha * trap.field_factor * trap.power


def min_power(alpha: float,
              temperature: float = const.ROOM_TEMPERATURE,
              field_factor: float | None = None,
              escape_threshold: float = 1.0) -> float:
    """Escape power P_min = 2*kB*T/(alpha*kappa), inverse in alpha.

    ``escape_threshold`` is the trap depth in units of kB*T at which the
    particle is considered lost (default 1).
    """
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    kappa = field_factor if field_factor is not None else calibrated_field_factor()
    return escape_threshold * 2.0 * const.BOLTZMANN * temperature / (alpha * kappa)


def rods_from_pmin(p_min: float,
                   single_rod_p_min: float | None = None) -> float:
    """Cluster size inferred from the escape power: N = P_min(1 rod)/P_min.

    Exact inverse of ``min_power`` under the volume-additive polarizability
    model.  Values below 1 (escape power above the single-rod point) are
    reported as-is with an out-of-model warning.  Note the model is naive: a
    measured escape at 22 mW maps to N ~ 1.9 even where independent evidence
    may demand a larger cluster.
    """
    if p_min <= 0:
        raise ValueError("p_min must be > 0")
    if single_rod_p_min is None:
        single_rod_p_min = min_power(polarizability())
    n_est = single_rod_p_min / p_min
    if n_est < 1.0:
        warnings.warn(
            f"P_min = {p_min:.3g} W exceeds the single-rod escape power; "
            f"inferred N = {n_est:.2f} < 1 is outside the cluster model",
            stacklevel=2,
        )
    return n_est


def effective_radius(cluster: ClusterSample, axis: str = "z") -> float:
    """Radius of the disc with the cluster's drag cross-section along ``axis``.

    For the parallel close-packed bundle viewed along z the cross-section is N
    shell-padded rod discs: r_z = (d/2 + shell) * sqrt(N).
    """
    if axis != "z":
        raise ValueError("only the axial (z) cross-section is modeled")
    return cluster.rod.padded_radius * np.sqrt(cluster.n_rods)


def cluster_mass(cluster: ClusterSample) -> float:
    """m = N * density * V_rod (bare rod volume)."""
    return cluster.n_rods * cluster.material.density * cluster.rod.volume


class DampingRate(NamedTuple):
    rad_per_s: float
    hz: float  # Gamma / 2 pi


def _slip_factor(knudsen: float) -> float:
    c_k = 0.31 * knudsen / (0.785 + 1.152 * knudsen + knudsen**2)
    return 0.619 / (0.619 + knudsen) * (1.0 + c_k)


def damping_rate(radius: float, mass: float,
                 gas: GasParams | None = None) -> DampingRate:
    """Slip-corrected Stokes damping rate for cross-section radius and mass.

    Kn -> 0 recovers the continuum Stokes limit 6*pi*eta*r/m.
    """
    if radius <= 0 or mass <= 0:
        raise ValueError("radius and mass must be > 0")
    gas = gas or GasParams()
    knudsen = gas.mean_free_path / radius
    gamma = 6.0 * np.pi * gas.viscosity * radius / mass * _slip_factor(knudsen)
    return DampingRate(rad_per_s=float(gamma), hz=float(gamma / (2.0 * np.pi)))


def cluster_damping_rate(cluster: ClusterSample,
                         gas: GasParams | None = None,
                         slip_at_single_rod: bool = True) -> DampingRate:
    """Axial damping rate of an N-rod cluster.

    With ``slip_at_single_rod`` (default) the Knudsen slip factor is held at
    its single-rod value, so the rate follows the pure geometric law
    Gamma(N) = Gamma(1)/sqrt(N) of the r/m proportionality; this reproduces
    both the observed sub-MHz cluster damping and the sqrt(P_min) scaling.
    Setting it False re-evaluates the slip factor at Kn(r_z(N)); in the
    free-molecular regime of these particles that nearly cancels the geometric
    scaling and is kept only for comparison.
    """
    gas = gas or GasParams()
    r_z = effective_radius(cluster)
    m = cluster_mass(cluster)
    if slip_at_single_rod:
        single = ClusterSample(n_rods=1, rod=cluster.rod, material=cluster.material)
        base = damping_rate(single.rod.padded_radius, cluster_mass(single), gas)
        gamma = base.rad_per_s / np.sqrt(cluster.n_rods)
        return DampingRate(rad_per_s=float(gamma), hz=float(gamma / (2.0 * np.pi)))
    return damping_rate(r_z, m, gas)


class PowerLawFit(NamedTuple):
    exponent: float
    std_error: float
    ci95: tuple[float, float]


def gamma_pmin_exponent(samples: Iterable[tuple[float, float]]) -> PowerLawFit:
    """Least-squares slope of log Gamma_z versus log P_min with standard error.

    Requires at least 5 positive (P_min, Gamma_z) pairs.
    """
    data = np.asarray(list(samples), dtype=float)
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 5:
        raise InsufficientDataError("need >= 5 (P_min, Gamma_z) samples")
    if np.any(data <= 0):
        raise ValueError("all P_min and Gamma_z values must be positive")

    log_p = np.log(data[:, 0])
    log_g = np.log(data[:, 1])
    A = np.column_stack([log_p, np.ones_like(log_p)])
    coef, res, *_ = np.linalg.lstsq(A, log_g, rcond=None)
    slope = float(coef[0])

    n = len(log_p)
    fitted = A @ coef
    ssr = float(np.sum((log_g - fitted) ** 2))
    dof = max(n - 2, 1)
    sxx = float(np.sum((log_p - log_p.mean()) ** 2))
    stderr = float(np.sqrt(ssr / dof / sxx)) if sxx > 0 else float("inf")
    ci = (slope - 1.96 * stderr, slope + 1.96 * stderr)
    return PowerLawFit(exponent=slope, std_error=stderr, ci95=ci)
