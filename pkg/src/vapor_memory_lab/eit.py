"""EIT forward model in an attenuating waveguide.

The chain is: position-dependent control Rabi frequency -> complex
susceptibility -> Doppler broadening -> transmission spectrum / refractive
index -> group velocity and pulse compression.

Everything here is a pure function; spectra over a detuning grid are
vectorized and bit-stable for fixed quadrature settings.

Conventions
-----------
* Detunings are ordinary frequencies (Hz); inside the susceptibility they
  enter as angular frequencies, Delta = 2*pi*delta.  All rates (gamma31,
  gamma_d, Rabi frequencies) are angular (rad/s).
* ``ControlDrive.omega0`` is the *quoted* Rabi frequency (the half-field
  coupling convention).  The susceptibility formula expects the full-field
  Rabi frequency, which is ``RABI_FIELD_CONVENTION`` (= 2) times larger; the
  conversion happens once, inside the propagation chain.
* The refractive index follows n = Re(1 + chi); the dilute-medium
  alternative n = 1 + Re(chi)/2 is available via ``index_convention``.
"""

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import wofz

from .atoms import LambdaSystem, VaporState
from .constants import CONST, RABI_FIELD_CONVENTION
from .errors import (
    AccuracyError,
    AccuracyWarning,
    DegeneracyError,
    DomainError,
    ModelError,
    PeakNotFoundError,
)

DEFAULT_Z_NODES = 64
DEFAULT_VELOCITY_NODES = 96
# Guard for the |denominator|^2 of the susceptibility, relative to the
# natural scale (gamma31 * gamma_d + omega^2)^2.
DEGENERACY_FLOOR = 1e-30


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class WaveguideSpec:
    """Guided-path geometry.

    length: optical length of the guided region (m)
    attenuation_db_per_mm: modal attenuation (dB/mm)
    coupling_efficiency: lens-to-waveguide coupling (dimensionless)
    cell_length: vapor-cell length bounding the storable pulse (m)
    """

    length: float = 5e-3
    attenuation_db_per_mm: float = 1.51
    coupling_efficiency: float = 0.20
    cell_length: float = None

    def __post_init__(self):
        if self.length <= 0:
            raise DomainError("waveguide length must be positive")
        if self.attenuation_db_per_mm < 0:
            raise DomainError("attenuation must be non-negative")
        if not 0 < self.coupling_efficiency <= 1:
            raise DomainError("coupling efficiency must be in (0, 1]")
        if self.cell_length is None:
            object.__setattr__(self, "cell_length", self.length)
        if self.cell_length < self.length:
            raise DomainError("cell_length must be >= waveguide length")


@dataclass(frozen=True)
class ControlDrive:
    """Control-field drive strength.

    omega0: peak quoted Rabi frequency at the focus z=0 (rad/s)
    power: optional control power P_c (W)
    kappa: calibration constant, omega0 = kappa*sqrt(power) (rad/s/sqrt(W))
    """

    omega0: float = None
    power: float = None
    kappa: float = None

    def __post_init__(self):
        if self.omega0 is None:
            if self.power is None or self.kappa is None:
                raise DomainError("provide omega0, or power together with kappa")
            object.__setattr__(self, "omega0", self.kappa * np.sqrt(self.power))
        if self.omega0 < 0:
            raise DomainError("omega0 must be non-negative")
        if self.power is not None and self.kappa is not None:
            expect = self.kappa * np.sqrt(self.power)
            if expect > 0 and abs(self.omega0 - expect) > 1e-12 * expect:
                raise DomainError("omega0 inconsistent with kappa*sqrt(power)")


def calibrate_kappa(power_anchor, omega0_anchor):
    """kappa from one (power, quoted Rabi) anchor point."""
    if power_anchor <= 0 or omega0_anchor <= 0:
        raise DomainError("anchor power and Rabi frequency must be positive")
    return omega0_anchor / np.sqrt(power_anchor)


@dataclass(frozen=True)
class DetuningGrid:
    """Ascending, uniformly spaced signal detunings (Hz)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise DomainError("detuning grid needs at least two points")
        d = np.diff(v)
        if np.any(d <= 0):
            raise DomainError("detuning grid must be strictly ascending")
        if (d.max() - d.min()) > 1e-9 * d.mean():
            raise DomainError("detuning grid spacing must be uniform")
        object.__setattr__(self, "values", v)

    @property
    def spacing(self):
        return float(self.values[1] - self.values[0])

    @property
    def span(self):
        return float(self.values[-1] - self.values[0])

    def index_of_zero(self):
        i = int(np.argmin(np.abs(self.values)))
        if abs(self.values[i]) > 1e-6 * self.spacing:
            raise DomainError("detuning grid does not contain 0 Hz")
        return i

    @classmethod
    def symmetric(cls, half_span, n_per_side):
        """Grid of 2*n_per_side+1 points from -half_span to +half_span."""
        return cls(np.linspace(-half_span, half_span, 2 * n_per_side + 1))


@dataclass(frozen=True)
class Spectrum:
    """Transmission spectrum plus optional path-integrated susceptibility."""

    grid: DetuningGrid
    transmission: np.ndarray
    chi_im: np.ndarray = None
    chi_re: np.ndarray = None

    def __post_init__(self):
        t = np.asarray(self.transmission, dtype=float)
        if t.shape != self.grid.values.shape:
            raise DomainError("transmission length must match the grid")
        if np.any(t < 0) or np.any(t > 1.000001):
            raise DomainError("transmission values must lie in [0, 1.000001]")
        object.__setattr__(self, "transmission", t)
        for name in ("chi_im", "chi_re"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=float)
                if arr.shape != self.grid.values.shape:
                    raise DomainError(f"{name} length must match the grid")
                object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class SlowLightResult:
    """Path-averaged slow-light figures at two-photon resonance."""

    group_velocity: float
    compression_factor: float
    compressed_length: float = None
    captured_fraction: float = None

    def __post_init__(self):
        if not 0 < self.group_velocity <= CONST.c0 * (1 + 1e-12):
            raise ModelError("group velocity must lie in (0, c0]")


# ---------------------------------------------------------------------------
# quadrature nodes


@lru_cache(maxsize=8)
def gauss_legendre_nodes(n):
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    return np.polynomial.legendre.leggauss(n)


@lru_cache(maxsize=8)
def gauss_hermite_velocity_nodes(n):
    """Nodes x and weights w such that sum w_k f(sqrt(2)*sigma*x_k)
    approximates the expectation of f under N(0, sigma^2); sum(w) == 1."""
    x, w = np.polynomial.hermite.hermgauss(n)
    return x * np.sqrt(2.0), w / np.sqrt(np.pi)


# ---------------------------------------------------------------------------
# susceptibility


def rabi_at(drive, wg, z):
    """Quoted control Rabi frequency at position z inside the waveguide:
    Omega(z) = Omega0 * 10^(-alpha*z/20) with alpha in dB per meter."""
    z = np.asarray(z, dtype=float)
    if np.any(z < 0) or np.any(z > wg.length * (1 + 1e-12)):
        raise DomainError("z must lie within [0, waveguide length]")
    alpha_db_per_m = wg.attenuation_db_per_mm * 1e3
    return drive.omega0 * 10.0 ** (-alpha_db_per_m * z / 20.0)


def susceptibility(delta, omega_c, system, vapor):
    """Stationary-atom complex susceptibility of the lambda system.

    delta: signal detuning from two-photon resonance (Hz)
    omega_c: control Rabi frequency entering the formula (rad/s, full-field)

    chi = pref * [4 D (W^2 - 4 D^2 - gd^2) + i (8 D^2 g31 + 2 gd (W^2 + g31 gd))]
          / |W^2 + (g31 + 2iD)(gd + 2iD)|^2

    with D = 2*pi*delta and pref = |mu31|^2 rho / (eps0 hbar).
    """
    if omega_c < 0:
        raise DomainError("omega_c must be non-negative")
    d = 2 * np.pi * np.asarray(delta, dtype=float)
    g31, gd = system.gamma31, system.gamma_d
    w2 = omega_c ** 2
    pref = system.mu31 ** 2 * vapor.effective_density / (CONST.eps0 * CONST.hbar)
    den = np.abs(w2 + (g31 + 2j * d) * (gd + 2j * d)) ** 2
    scale = (w2 + g31 * gd) ** 2 + (2 * np.pi * np.max(np.abs(d))) ** 4 + g31 ** 4
    if np.any(den < DEGENERACY_FLOOR * scale):
        raise DegeneracyError("susceptibility denominator vanished")
    re = 4 * d * (w2 - 4 * d ** 2 - gd ** 2)
    im = 8 * d ** 2 * g31 + 2 * gd * (w2 + g31 * gd)
    return pref * (re + 1j * im) / den


def two_level_susceptibility(delta, system, vapor):
    """Two-level (no control) limit, coded independently of Eq-form chi:
    chi = pref * (-4 D + 2 i g31) / (g31^2 + 4 D^2)."""
    d = 2 * np.pi * np.asarray(delta, dtype=float)
    g31 = system.gamma31
    pref = system.mu31 ** 2 * vapor.effective_density / (CONST.eps0 * CONST.hbar)
    return pref * (-4 * d + 2j * g31) / (g31 ** 2 + 4 * d ** 2)


def doppler_convolve(chi_fn, grid, vapor, n_nodes=DEFAULT_VELOCITY_NODES):
    """Doppler-broaden an arbitrary susceptibility function by quadrature:

        chi_tilde(dnu) = sum_k w_k chi_fn(dnu - nu0*v_k/c0)

    with Gauss-Hermite velocity nodes v_k.  Exact for smooth chi_fn; for
    features much narrower than the node spacing prefer the closed-form
    routine used by the propagation chain.
    """
    sig_nu = vapor.doppler_sigma
    if grid.span < 6 * sig_nu:
        warnings.warn(
            "detuning grid spans fewer than 6 Doppler widths", AccuracyWarning
        )
    if grid.spacing > sig_nu / 10:
        warnings.warn(
            "detuning grid spacing exceeds a tenth of the Doppler width",
            AccuracyWarning,
        )
    x, w = gauss_hermite_velocity_nodes(n_nodes)
    shifts = sig_nu * x
    out = np.zeros(grid.values.shape, dtype=complex)
    for wk, sk in zip(w, shifts):
        vals = np.asarray(chi_fn(grid.values - sk), dtype=complex)
        if np.any(np.isnan(vals)):
            raise ModelError("chi_fn returned NaN during Doppler convolution")
        out += wk * vals
    return out


def doppler_susceptibility(delta, omega_c, system, vapor):
    """Doppler-broadened lambda-system susceptibility, exact closed form.

    Each velocity class sees the one-photon detuning shifted by -nu0*v/c0
    while the two-photon (Raman) detuning is unshifted (co-propagating
    beams); the Gaussian velocity average of the resulting single-pole
    response is a Faddeeva function:

        chi_tilde(D) = i sqrt(pi) pref / s * w((D - p)/s),
        p = -i/2 (g31 + W^2/(gd - 2iD)),  s = sqrt(2) * 2*pi*sigma_nu.

    Reduces to the Voigt profile at W = 0.
    """
    if omega_c < 0:
        raise DomainError("omega_c must be non-negative")
    d = 2 * np.pi * np.asarray(delta, dtype=float)
    g31, gd = system.gamma31, system.gamma_d
    pref = system.mu31 ** 2 * vapor.effective_density / (CONST.eps0 * CONST.hbar)
    raman = gd - 2j * d
    if np.any(np.abs(raman) ** 2 < DEGENERACY_FLOOR * (gd ** 2 + g31 ** 2)):
        raise DegeneracyError("Raman denominator vanished")
    pole = -0.5j * (g31 + omega_c ** 2 / raman)
    s = np.sqrt(2.0) * 2 * np.pi * vapor.doppler_sigma
    return 1j * np.sqrt(np.pi) * pref / s * wofz((d - pole) / s)


# ---------------------------------------------------------------------------
# propagation


def _path_integrated_chi(wg, drive, system, vapor, grid_values, z_nodes):
    """integral over z of the Doppler-broadened susceptibility (complex)."""
    x, w = gauss_legendre_nodes(z_nodes)
    z = 0.5 * wg.length * (x + 1.0)
    wz = 0.5 * wg.length * w
    omega_full = RABI_FIELD_CONVENTION * rabi_at(drive, wg, z)
    acc = np.zeros(np.shape(grid_values), dtype=complex)
    for wi, oi in zip(wz, omega_full):
        acc += wi * doppler_susceptibility(grid_values, oi, system, vapor)
    return acc


def transmission_spectrum(
    wg,
    drive,
    system,
    vapor,
    grid,
    z_nodes=DEFAULT_Z_NODES,
    check_convergence=False,
    convergence_tol=1e-6,
):
    """Transmission through the waveguide:

        T(dnu) = exp[-(4 pi nu0 / c0) * Im integral_0^L chi_tilde(dnu, z) dz]

    The z integral uses fixed-order Gauss-Legendre quadrature (64 nodes by
    default).  With ``check_convergence`` the node count is doubled and an
    AccuracyError raised if any transmission value moves by more than
    ``convergence_tol``.
    """
    chi_int = _path_integrated_chi(wg, drive, system, vapor, grid.values, z_nodes)
    t = np.exp(-(4 * np.pi * system.nu0 / CONST.c0) * np.imag(chi_int))
    if check_convergence:
        chi2 = _path_integrated_chi(wg, drive, system, vapor, grid.values, 2 * z_nodes)
        t2 = np.exp(-(4 * np.pi * system.nu0 / CONST.c0) * np.imag(chi2))
        if np.max(np.abs(t2 - t)) > convergence_tol:
            raise AccuracyError(
                "z quadrature not converged: doubling the node count moved "
                f"transmission by {np.max(np.abs(t2 - t)):.3e}"
            )
    t = np.clip(t, 0.0, None)
    return Spectrum(
        grid=grid,
        transmission=t,
        chi_im=np.imag(chi_int),
        chi_re=np.real(chi_int),
    )


def od_eit(spec_with_control, spec_without_control):
    """EIT contrast: reduction in optical depth at the two-photon resonance,
    OD_EIT = ln T_on(0) - ln T_off(0)."""
    if not np.array_equal(
        spec_with_control.grid.values, spec_without_control.grid.values
    ):
        raise DomainError("spectra must share one detuning grid")
    i0 = spec_with_control.grid.index_of_zero()
    t_on = spec_with_control.transmission[i0]
    t_off = spec_without_control.transmission[i0]
    if t_on <= 0 or t_off <= 0:
        raise ModelError("transmission must be positive to take logarithms")
    return float(np.log(t_on) - np.log(t_off))


def eit_window_fwhm(spec):
    """Full width at half maximum of the transparency peak.

    Half-contrast convention: on each side of the peak the half level is the
    mean of the peak transmission and the flanking absorption minimum (the
    nearest local minimum walking outward); the width is the distance between
    the two half-level crossings.
    """
    t = spec.transmission
    x = spec.grid.values
    i0 = spec.grid.index_of_zero()
    if i0 == 0 or i0 == len(t) - 1:
        raise PeakNotFoundError("peak at grid edge")
    if not (t[i0] >= t[i0 - 1] and t[i0] >= t[i0 + 1]):
        raise PeakNotFoundError("no local transmission maximum at zero detuning")

    def flank_min(step):
        j = i0
        while 0 < j + step < len(t) - 1 and t[j + step] <= t[j]:
            j += step
        return j

    il, ir = flank_min(-1), flank_min(+1)
    if t[il] >= t[i0] or t[ir] >= t[i0]:
        raise PeakNotFoundError("peak does not exceed its surrounding minima")

    def crossing(j_min, step):
        level = 0.5 * (t[i0] + t[j_min])
        j = i0
        while j != j_min and t[j] > level:
            j += step
        if t[j] > level:
            raise PeakNotFoundError("half level not crossed before the minimum")
        j_prev = j - step
        return x[j] + (level - t[j]) / (t[j_prev] - t[j]) * (x[j_prev] - x[j])

    return float(crossing(ir, +1) - crossing(il, -1))


def group_velocity_on_resonance(
    wg,
    drive,
    system,
    vapor,
    pulse_width=None,
    fd_step=None,
    z_nodes=DEFAULT_Z_NODES,
    index_convention="paper",
):
    """Path-averaged group velocity at two-photon resonance and the derived
    compression figures.

    n(dnu, z) = Re(1 + chi_tilde) (paper convention; 'dilute' uses
    1 + Re(chi)/2).  dn/dnu by central finite difference with automatic step
    refinement; v_g(z) = c0 / (n + nu0 dn/dnu); the path average is the
    transit-time velocity L / integral dz / v_g(z).

    pulse_width (s), when given, populates compressed_length = v_g * width
    and captured_fraction = min(1, cell_length / L_EIT).
    """
    if index_convention not in ("paper", "dilute"):
        raise DomainError("index_convention must be 'paper' or 'dilute'")
    half = 0.5 if index_convention == "dilute" else 1.0
    x, w = gauss_legendre_nodes(z_nodes)
    z = 0.5 * wg.length * (x + 1.0)
    wz = 0.5 * wg.length * w
    omega_full = RABI_FIELD_CONVENTION * rabi_at(drive, wg, z)

    def slope_and_n0(omega):
        n0 = 1.0 + half * np.real(
            doppler_susceptibility(0.0, omega, system, vapor)
        )
        h = 1e6 if fd_step is None else fd_step
        prev = None
        for _ in range(24):
            chi = doppler_susceptibility(np.array([-h, h]), omega, system, vapor)
            slope = half * (np.real(chi[1]) - np.real(chi[0])) / (2 * h)
            if fd_step is not None:
                return n0, slope
            if prev is not None and abs(slope - prev) <= 1e-6 * max(
                abs(slope), abs(prev), 1e-300
            ):
                return n0, slope
            prev = slope
            h /= 2.0
        return n0, prev

    vg = np.empty_like(z)
    for k, omega in enumerate(omega_full):
        n0, slope = slope_and_n0(omega)
        denom = n0 + system.nu0 * slope
        if denom <= 0:
            raise ModelError(
                "group-velocity denominator non-positive: the model is not "
                "valid at these parameters"
            )
        vg[k] = CONST.c0 / denom
    v_bar = wg.length / np.sum(wz / vg)
    v_bar = min(v_bar, CONST.c0)
    result = dict(group_velocity=float(v_bar), compression_factor=float(CONST.c0 / v_bar))
    if pulse_width is not None:
        if pulse_width <= 0:
            raise DomainError("pulse width must be positive")
        l_eit = v_bar * pulse_width
        result["compressed_length"] = float(l_eit)
        result["captured_fraction"] = float(min(1.0, wg.cell_length / l_eit))
    return SlowLightResult(**result)


def rabi_vs_power_curve(powers, kappa):
    """Quoted Rabi frequency per control power: omega0 = kappa*sqrt(P)."""
    p = np.asarray(powers, dtype=float)
    if np.any(p < 0):
        raise DomainError("powers must be non-negative")
    if kappa < 0:
        raise DomainError("kappa must be non-negative")
    return [(float(pi), float(kappa * np.sqrt(pi))) for pi in p]


def calibrate_density_scale(
    wg, drive, system, temperature, target_od_eit=1.0, z_nodes=DEFAULT_Z_NODES
):
    """density_scale that makes the simulated OD_EIT hit the target.

    OD_EIT is linear in the density, so a single unit evaluation suffices;
    the result is verified to 1e-9 relative.
    """
    grid = DetuningGrid(np.linspace(-2e6, 2e6, 5))
    unit_vapor = VaporState(temperature=temperature, density_scale=1.0)
    on = transmission_spectrum(wg, drive, system, unit_vapor, grid, z_nodes)
    off = transmission_spectrum(
        wg, ControlDrive(omega0=0.0), system, unit_vapor, grid, z_nodes
    )
    unit = od_eit(on, off)
    if unit <= 0:
        raise ModelError("OD_EIT is non-positive at unit density")
    scale = target_od_eit / unit
    vapor = VaporState(temperature=temperature, density_scale=scale)
    on = transmission_spectrum(wg, drive, system, vapor, grid, z_nodes)
    off = transmission_spectrum(
        wg, ControlDrive(omega0=0.0), system, vapor, grid, z_nodes
    )
    if abs(od_eit(on, off) - target_od_eit) > 1e-9 * max(target_od_eit, 1.0):
        raise ModelError("density-scale calibration failed verification")
    return scale


__all__ = [
    "WaveguideSpec",
    "ControlDrive",
    "DetuningGrid",
    "Spectrum",
    "SlowLightResult",
    "rabi_at",
    "susceptibility",
    "two_level_susceptibility",
    "doppler_convolve",
    "doppler_susceptibility",
    "transmission_spectrum",
    "od_eit",
    "eit_window_fwhm",
    "group_velocity_on_resonance",
    "rabi_vs_power_curve",
    "calibrate_kappa",
    "calibrate_density_scale",
]
