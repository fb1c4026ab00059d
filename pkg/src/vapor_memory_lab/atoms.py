"""Cesium lambda-system parameters, vapor thermodynamics, and Larmor mapping.

All operations are pure functions of their value inputs and are safe to call
concurrently.
"""

from dataclasses import dataclass, field

import numpy as np

from .constants import (
    ATM_PA,
    CONST,
    CS_D1_FREQUENCY,
    CS_D1_NATURAL_LINEWIDTH,
    CS_D1_SIGNAL_DIPOLE,
    CS_D1_WAVELENGTH,
    CS_MELTING_POINT,
    CS_VAPOR_PRESSURE_LIQUID,
    CS_VAPOR_PRESSURE_SOLID,
    VAPOR_TEMPERATURE_MAX,
    VAPOR_TEMPERATURE_MIN,
)
from .errors import DomainError


@dataclass(frozen=True)
class LambdaSystem:
    """Three-level lambda system on the Cs D1 line.

    nu0: signal transition frequency (Hz)
    gamma31: excited-state coherence decay rate (rad/s)
    gamma_d: ground-state decoherence rate (rad/s)
    mu31: signal transition dipole moment (C m)
    labels: hyperfine identifiers of the signal and control transitions
    """

    nu0: float = CS_D1_FREQUENCY
    gamma31: float = CS_D1_NATURAL_LINEWIDTH / 2.0
    gamma_d: float = 2 * np.pi * 100e3
    mu31: float = CS_D1_SIGNAL_DIPOLE
    labels: tuple = (("signal", "F=3 -> F'=3"), ("control", "F=4 -> F'=3"))

    def __post_init__(self):
        if not self.gamma31 > self.gamma_d >= 0:
            raise DomainError("lambda system requires gamma31 > gamma_d >= 0")
        nominal = CONST.c0 / 894e-9
        if abs(self.nu0 - nominal) > 0.01 * nominal:
            raise DomainError("nu0 must lie within 1% of c0 / 894 nm")
        if self.mu31 <= 0:
            raise DomainError("mu31 must be strictly positive")

    @property
    def lambda0(self):
        """Signal wavelength (m)."""
        return CONST.c0 / self.nu0


def vapor_density(temperature):
    """Cesium number density (atoms/m^3) from the liquid-phase vapor-pressure
    curve, converted through the ideal-gas law p/(kB T).

    Valid for 250 K <= temperature <= 450 K.  Below the 301.65 K melting
    point the solid-phase branch is used.
    """
    t = float(temperature)
    if not VAPOR_TEMPERATURE_MIN <= t <= VAPOR_TEMPERATURE_MAX:
        raise DomainError(
            f"temperature {t} K outside the vapor-pressure validity window "
            f"[{VAPOR_TEMPERATURE_MIN}, {VAPOR_TEMPERATURE_MAX}] K"
        )
    return cs_vapor_pressure(t) / (CONST.kB * t)


def cs_vapor_pressure(temperature):
    """Cesium vapor pressure (Pa) on the solid or liquid branch."""
    t = float(temperature)
    if t < CS_MELTING_POINT:
        a, b = CS_VAPOR_PRESSURE_SOLID
        log10_p_atm = a - b / t
    else:
        a, b, c = CS_VAPOR_PRESSURE_LIQUID
        log10_p_atm = a - b / t - c * np.log10(t)
    return ATM_PA * 10.0 ** log10_p_atm


@dataclass(frozen=True)
class VaporState:
    """Thermodynamic state of the vapor.

    density is the total atom number density (atoms/m^3); density_scale is a
    dimensionless multiplier accounting for the reduced effective density
    inside the waveguide.  Values above 1 are permitted because the scale
    also absorbs dipole-model error when calibrated against measured optical
    depths.
    """

    temperature: float
    density: float = field(default=None)
    mean_speed: float = field(default=None)
    density_scale: float = 1.0

    def __post_init__(self):
        if self.temperature <= 0:
            raise DomainError("temperature must be positive")
        if self.density_scale <= 0:
            raise DomainError("density_scale must be strictly positive")
        if self.density is None:
            object.__setattr__(self, "density", vapor_density(self.temperature))
        if self.mean_speed is None:
            object.__setattr__(
                self,
                "mean_speed",
                np.sqrt(8 * CONST.kB * self.temperature / (np.pi * CONST.m_cs)),
            )

    @property
    def effective_density(self):
        """density * density_scale (atoms/m^3)."""
        return self.density * self.density_scale

    @property
    def sigma_v(self):
        """1D thermal velocity spread sqrt(kB T / m) (m/s)."""
        return np.sqrt(CONST.kB * self.temperature / CONST.m_cs)

    @property
    def doppler_sigma(self):
        """1D Doppler width of the signal line, sigma in Hz."""
        return CS_D1_FREQUENCY * self.sigma_v / CONST.c0


def maxwell_boltzmann_velocity_pdf(v, temperature):
    """1D Maxwell-Boltzmann velocity density (s/m) at the given temperature.

    Gaussian with variance kB T / m_cs, normalized to unit integral.
    """
    if temperature <= 0:
        raise DomainError("temperature must be positive")
    var = CONST.kB * float(temperature) / CONST.m_cs
    v = np.asarray(v, dtype=float)
    return np.exp(-(v ** 2) / (2 * var)) / np.sqrt(2 * np.pi * var)


def larmor_angular_frequency(b_field):
    """Larmor angular frequency gamma_e * B (rad/s) for B in tesla."""
    b = float(b_field)
    if b < 0:
        raise DomainError("magnetic field must be non-negative")
    return CONST.gamma_e * b


def b_field_from_precession(frequency):
    """Magnetic field (T) from a precession frequency in Hz (ordinary)."""
    f = float(frequency)
    if f < 0:
        raise DomainError("precession frequency must be non-negative")
    return 2 * np.pi * f / CONST.gamma_e


__all__ = [
    "LambdaSystem",
    "VaporState",
    "vapor_density",
    "cs_vapor_pressure",
    "maxwell_boltzmann_velocity_pdf",
    "larmor_angular_frequency",
    "b_field_from_precession",
    "CS_D1_WAVELENGTH",
]
