"""Write-store-read pulse sequence simulation and analysis.

Synthesizes photon-count histograms for the storage experiment, extracts the
internal efficiency and measured storage time, and runs the lifetime,
bandwidth, and multi-channel scans.

Timing model
------------
The control field is a pump pulse followed by Gaussian write and read pulses
of FWHM ``control_width``; the signal pulse has FWHM 2/3 of that and arrives
``control_width / 3`` after the write-pulse center.  The retrieved pulse
appears ``retrieval_lead`` before the read-pulse center, so the measured
(leak-center to retrieved-center) storage time is

    t_storage = set_storage - control_width/3 - retrieval_lead.

The retrieval lead is an empirical device property; the default value
(30.58 ns) is calibrated so a 21.15 ns control pulse with a 90 ns set time
yields a 52.37 ns measured storage time.  It is independent of the control
width by default ('fixed' policy); a width-proportional policy ('scaled') is
available for sequences resembling the calibration one.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .constants import FWHM_TO_SIGMA, GAUSSIAN_TIME_BANDWIDTH
from .errors import (
    DomainError,
    OverlapError,
    PeakNotFoundError,
    ResolutionError,
)
from .fitting import damped_oscillation, fit_gaussian_peak, fit_lifetime

# Calibrated so that set_storage = 90 ns with a 21.15 ns control pulse gives
# a measured storage time of 52.37 ns.
REFERENCE_CONTROL_WIDTH = 21.15e-9
DEFAULT_RETRIEVAL_LEAD = 90e-9 - REFERENCE_CONTROL_WIDTH / 3.0 - 52.37e-9
RETRIEVAL_LEAD_RATIO = DEFAULT_RETRIEVAL_LEAD / REFERENCE_CONTROL_WIDTH


def default_retrieval_lead(control_width, policy="fixed"):
    """Retrieval lead for a given control width under the chosen policy."""
    if policy == "fixed":
        return DEFAULT_RETRIEVAL_LEAD
    if policy == "scaled":
        return RETRIEVAL_LEAD_RATIO * control_width
    raise DomainError("retrieval-lead policy must be 'fixed' or 'scaled'")


def measured_storage_time(set_storage, signal_delay, retrieval_lead):
    """Leak-center to retrieved-center interval."""
    return set_storage - signal_delay - retrieval_lead


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class PulseSequence:
    """Timing of one write-store-read sequence (seconds).

    All pulse centers are on an absolute axis with the write pulse at 0;
    the leak-pulse center (= signal center) defines the histogram origin.
    """

    control_width: float
    signal_width: float
    signal_delay: float
    set_storage: float
    retrieval_lead: float

    def __post_init__(self):
        if self.control_width <= 0:
            raise DomainError("control width must be positive")
        if abs(self.signal_width - (2.0 / 3.0) * self.control_width) > 1e-9 * abs(
            self.signal_width
        ):
            raise DomainError("signal width must be 2/3 of the control width")
        if abs(self.signal_delay - self.control_width / 3.0) > 1e-9 * abs(
            self.signal_delay
        ):
            raise DomainError("signal delay must be 1/3 of the control width")
        if self.set_storage <= self.control_width:
            raise OverlapError("write and read pulses collide: set_storage "
                               "must exceed the control width")

    @property
    def storage_time(self):
        """Predicted measured storage time."""
        return measured_storage_time(
            self.set_storage, self.signal_delay, self.retrieval_lead
        )

    @property
    def schedule(self):
        """Pulse centers on the absolute axis (write pulse at 0)."""
        return {
            "pump": -2.0 * self.control_width,
            "write": 0.0,
            "signal": self.signal_delay,
            "read": self.set_storage,
            "retrieved": self.set_storage - self.retrieval_lead,
        }

    @property
    def signal_sigma(self):
        return self.signal_width * FWHM_TO_SIGMA


def sequence_timings(control_width, set_storage, retrieval_lead=None):
    """Build the pulse sequence from the control width and set storage time."""
    if control_width <= 0:
        raise DomainError("control width must be positive")
    if retrieval_lead is None:
        retrieval_lead = default_retrieval_lead(control_width)
    return PulseSequence(
        control_width=control_width,
        signal_width=(2.0 / 3.0) * control_width,
        signal_delay=control_width / 3.0,
        set_storage=set_storage,
        retrieval_lead=retrieval_lead,
    )


@dataclass(frozen=True)
class SignalPulseSpec:
    """Attenuated coherent signal pulse: mean photon number and FWHM width."""

    mean_photons: float = 50.0
    width: float = 14.1e-9

    def __post_init__(self):
        if self.mean_photons <= 0:
            raise DomainError("mean photon number must be positive")
        if self.width <= 0:
            raise DomainError("pulse width must be positive")


@dataclass(frozen=True)
class StorageDecayModel:
    """Efficiency decay: eta0 * exp(-t/t_mem) * sin^2(omega t / 2 + phi)."""

    t_mem: float
    omega: float = 0.0
    phi: float = np.pi / 2
    eta0: float = 1.0

    def __post_init__(self):
        if self.t_mem <= 0:
            raise DomainError("memory lifetime must be positive")
        if not 0 <= self.eta0 <= 1:
            raise DomainError("eta0 must lie in [0, 1]")
        if self.omega < 0:
            raise DomainError("precession frequency must be non-negative")


def storage_efficiency(t, model, captured_fraction=1.0):
    """Internal efficiency after a storage time t (seconds)."""
    if np.any(np.asarray(t) < 0):
        raise DomainError("storage time must be non-negative")
    if not 0 < captured_fraction <= 1:
        raise DomainError("captured fraction must lie in (0, 1]")
    return captured_fraction * damped_oscillation(
        t, model.eta0, model.t_mem, model.omega, model.phi
    )


@dataclass(frozen=True)
class TimeHistogram:
    """Binned photon counts; the time origin sits at the leak-pulse center."""

    bin_width: float
    t0: float
    counts: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.bin_width <= 0:
            raise DomainError("bin width must be positive")
        c = np.asarray(self.counts, dtype=float)
        if np.any(c < 0):
            raise DomainError("counts must be non-negative")
        object.__setattr__(self, "counts", c)

    @property
    def bin_centers(self):
        return self.t0 + self.bin_width * np.arange(self.counts.size)


@dataclass(frozen=True)
class EfficiencyResult:
    """Outcome of one histogram extraction."""

    eta_int: float
    n_read: float
    n_leak: float
    t_storage_measured: float
    sigma_in: float
    fractional_delay: float
    low_confidence: bool = False

    def __post_init__(self):
        if not 0 <= self.eta_int <= 1:
            raise DomainError("eta_int must lie in [0, 1]")


# ---------------------------------------------------------------------------
# synthesis


def synthesize_histogram(
    seq,
    signal,
    model,
    captured_fraction=1.0,
    detection_efficiency=1.0,
    bin_width=None,
    seed=0,
    repetitions=3000,
    background_rate=0.0,
    expectation=False,
):
    """Simulate the detected histogram of one storage configuration.

    Leak peak (area proportional to 1 - eta) at the time origin, read peak
    (area proportional to eta = storage_efficiency at the predicted storage
    time) at the measured storage time; counts are independent Poisson draws
    per bin unless ``expectation`` is set, in which case the expected values
    are returned.  Deterministic for a given seed.
    """
    if bin_width is None:
        bin_width = signal.width / 10.0
    if bin_width > signal.width / 10.0 * (1 + 1e-9):
        raise ResolutionError("bin width must not exceed a tenth of the "
                              "signal pulse width")
    if not 0 < detection_efficiency <= 1:
        raise DomainError("detection efficiency must lie in (0, 1]")
    sig = seq.signal_sigma
    t_storage = seq.storage_time
    if t_storage <= 0:
        raise OverlapError("predicted storage time is not positive")
    eta = float(storage_efficiency(t_storage, model, captured_fraction))
    n_total = signal.mean_photons * repetitions * detection_efficiency
    lo = -6.0 * sig
    hi = t_storage + 6.0 * sig
    n_bins = int(np.ceil((hi - lo) / bin_width))
    edges = lo + bin_width * np.arange(n_bins + 1)
    expected = n_total * (
        (1.0 - eta) * np.diff(norm.cdf(edges, loc=0.0, scale=sig))
        + eta * np.diff(norm.cdf(edges, loc=t_storage, scale=sig))
    ) + background_rate * bin_width
    if expectation:
        counts = expected
    else:
        rng = np.random.default_rng(seed)
        counts = rng.poisson(expected).astype(float)
    return TimeHistogram(
        bin_width=float(bin_width),
        t0=float(lo + 0.5 * bin_width),
        counts=counts,
        metadata={
            "control_width": seq.control_width,
            "signal_width": seq.signal_width,
            "set_storage": seq.set_storage,
            "retrieval_lead": seq.retrieval_lead,
            "t_storage": t_storage,
            "eta": eta,
            "mean_photons": signal.mean_photons,
            "repetitions": repetitions,
            "detection_efficiency": detection_efficiency,
            "captured_fraction": captured_fraction,
            "background_rate": background_rate,
            "t_mem": model.t_mem,
            "omega": model.omega,
            "phi": model.phi,
            "eta0": model.eta0,
            "seed": int(seed) if isinstance(seed, (int, np.integer)) else None,
            "expectation": bool(expectation),
        },
    )


# ---------------------------------------------------------------------------
# extraction


def _window_counts(t, counts, center, half_width, bin_width):
    """Counts inside [center - half, center + half], edge bins weighted by
    their fractional overlap with the window."""
    left = t - 0.5 * bin_width
    right = t + 0.5 * bin_width
    cover = np.clip(
        (np.minimum(right, center + half_width) - np.maximum(left, center - half_width))
        / bin_width,
        0.0,
        1.0,
    )
    return float(np.sum(counts * cover)), float(np.sum(cover))


def extract_efficiency(hist, seq, window_sigmas=3.0):
    """Fit the leak and read peaks and integrate counts in matched windows.

    The temporal filter has total width ``window_sigmas * sigma_in``
    (default 3, i.e. +-1.5 sigma) where sigma_in is the fitted Gaussian
    width of the *leak* pulse, applied around both peak centers.  A flat
    background estimated far from both peaks is subtracted from the window
    sums.  If the read peak is below the detection floor the window is
    placed at the predicted storage time and the result is flagged
    low-confidence; a missing leak peak is a hard error.
    """
    t = hist.bin_centers
    c = hist.counts
    t_pred = seq.storage_time
    sig_guess = seq.signal_sigma

    early = t < 0.5 * t_pred
    if not np.any(early) or c[early].max() <= 0:
        raise PeakNotFoundError("no leak peak in the early part of the histogram")
    i_leak = int(np.argmax(np.where(early, c, -np.inf)))
    sel = np.abs(t - t[i_leak]) < 4 * sig_guess
    try:
        leak_fit = fit_gaussian_peak(t[sel], c[sel])
    except PeakNotFoundError as exc:
        raise PeakNotFoundError(f"leak peak unresolvable: {exc}") from exc
    mu_leak = leak_fit.estimates["center"]
    sigma_in = leak_fit.estimates["sigma"]

    far = (np.abs(t - mu_leak) > 5 * sigma_in) & (
        np.abs(t - (mu_leak + t_pred)) > 5 * sigma_in
    )
    bg_per_bin = float(np.mean(c[far])) if far.sum() >= 3 else 0.0
    bg_rms = float(np.std(c[far])) if far.sum() >= 3 else 0.0

    search = (np.abs(t - (mu_leak + t_pred)) < 3 * sigma_in) & (
        t > mu_leak + 4 * sigma_in
    )
    low_confidence = False
    mu_read = mu_leak + t_pred
    if search.sum() >= 5:
        idx = search.nonzero()[0]
        i_read = idx[int(np.argmax(c[idx]))]
        sel_r = (np.abs(t - t[i_read]) < 4 * sigma_in) & (t > mu_leak + 3 * sigma_in)
        try:
            read_fit = fit_gaussian_peak(t[sel_r], c[sel_r])
            amp = read_fit.estimates["amplitude"]
            if amp >= max(3 * bg_rms, 5.0):
                mu_read = read_fit.estimates["center"]
            else:
                low_confidence = True
        except (PeakNotFoundError, DomainError):
            low_confidence = True
    else:
        low_confidence = True

    half = 0.5 * window_sigmas * sigma_in
    n_leak, bins_leak = _window_counts(t, c, mu_leak, half, hist.bin_width)
    n_read, bins_read = _window_counts(t, c, mu_read, half, hist.bin_width)
    n_leak = max(n_leak - bg_per_bin * bins_leak, 0.0)
    n_read = max(n_read - bg_per_bin * bins_read, 0.0)
    total = n_leak + n_read
    eta = n_read / total if total > 0 else 0.0
    t_meas = mu_read - mu_leak
    return EfficiencyResult(
        eta_int=float(eta),
        n_read=n_read,
        n_leak=n_leak,
        t_storage_measured=float(t_meas),
        sigma_in=float(sigma_in),
        fractional_delay=float(t_meas / seq.signal_width),
        low_confidence=low_confidence,
    )


def efficiency_uncertainty(result):
    """Poisson (delta-method) standard error of the extracted efficiency."""
    n_r = max(result.n_read, 1.0)
    n_l = max(result.n_leak, 1.0)
    total = result.n_read + result.n_leak
    if total <= 0:
        return 1.0
    return float(
        np.sqrt(n_r * (1 - result.eta_int) ** 2 + n_l * result.eta_int ** 2) / total
    )


# ---------------------------------------------------------------------------
# scans


def child_rng(seed, label, index):
    """Independent, order-invariant RNG stream for scan point ``index``."""
    import zlib

    key = zlib.crc32(label.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(
        entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(key, int(index))
    ))


@dataclass
class EfficiencyCurve:
    """Efficiency versus measured storage time with per-point uncertainty."""

    storage_times: np.ndarray
    efficiencies: np.ndarray
    uncertainties: np.ndarray
    low_confidence: np.ndarray
    metadata: dict = field(default_factory=dict)


def lifetime_scan(
    control_width,
    set_storage_times,
    signal,
    model,
    captured_fraction=1.0,
    detection_efficiency=1.0,
    bin_width=None,
    repetitions=3000,
    seed=0,
    retrieval_lead=None,
    expectation=False,
    background_rate=0.0,
):
    """Efficiency versus storage time over a ladder of set storage times.

    In expectation mode the curve is the decay model evaluated at the
    predicted measured storage times (no synthesis noise); otherwise each
    point synthesizes and extracts a Poisson histogram with an independent
    child RNG stream, so results do not depend on evaluation order.
    """
    set_storage_times = np.asarray(set_storage_times, dtype=float)
    if np.any(np.diff(set_storage_times) <= 0):
        raise DomainError("set storage times must be strictly ascending")
    ts, etas, sigmas, flags = [], [], [], []
    for k, t_set in enumerate(set_storage_times):
        seq = sequence_timings(control_width, t_set, retrieval_lead)
        if expectation:
            t_meas = seq.storage_time
            eta = float(storage_efficiency(t_meas, model, captured_fraction))
            sig = 0.0
            flag = False
        else:
            hist = synthesize_histogram(
                seq,
                signal,
                model,
                captured_fraction,
                detection_efficiency,
                bin_width,
                seed=child_rng(seed, "lifetime", k),
                repetitions=repetitions,
                background_rate=background_rate,
            )
            res = extract_efficiency(hist, seq)
            t_meas, eta, flag = res.t_storage_measured, res.eta_int, res.low_confidence
            sig = efficiency_uncertainty(res)
        ts.append(t_meas)
        etas.append(eta)
        sigmas.append(sig)
        flags.append(flag)
    return EfficiencyCurve(
        storage_times=np.array(ts),
        efficiencies=np.array(etas),
        uncertainties=np.array(sigmas),
        low_confidence=np.array(flags, dtype=bool),
        metadata={
            "control_width": control_width,
            "set_storage_times": set_storage_times.tolist(),
            "captured_fraction": captured_fraction,
            "repetitions": repetitions,
            "seed": int(seed),
            "expectation": bool(expectation),
        },
    )


def spectral_acceptance(signal_width, window_fwhm):
    """Fraction of a transform-limited Gaussian pulse's spectral power that
    fits a Gaussian transparency window of the given FWHM."""
    if signal_width <= 0 or window_fwhm <= 0:
        raise DomainError("width and window must be positive")
    ratio = GAUSSIAN_TIME_BANDWIDTH / (signal_width * window_fwhm)
    return 1.0 / np.sqrt(1.0 + ratio ** 2)


def bandwidth_scan(
    signal_widths,
    set_storage,
    model,
    group_velocity,
    window_fwhm,
    cell_length,
    signal=None,
    detection_efficiency=1.0,
    repetitions=3000,
    seed=0,
    lead_policy="fixed",
    expectation=True,
):
    """Efficiency versus signal pulse width at a fixed set storage time.

    Each width regenerates the control width (1.5x) and its capture
    fraction min(1, cell / (v_g * width)); the write efficiency additionally
    carries the spectral acceptance of the pulse in the transparency window.
    The memory bandwidth is 1/width* at the width where the efficiency drops
    3 dB below its maximum (first crossing toward wider pulses, by linear
    interpolation).
    """
    widths = np.asarray(signal_widths, dtype=float)
    if np.any(np.diff(widths) <= 0):
        raise DomainError("signal widths must be strictly ascending")
    etas, t_stores, caps = [], [], []
    for k, w in enumerate(widths):
        control_width = 1.5 * w
        lead = default_retrieval_lead(control_width, lead_policy)
        seq = sequence_timings(control_width, set_storage, lead)
        capture = min(1.0, cell_length / (group_velocity * w))
        accept = spectral_acceptance(w, window_fwhm)
        cap_eff = capture * accept
        if expectation:
            eta = float(storage_efficiency(seq.storage_time, model, cap_eff))
            t_meas = seq.storage_time
        else:
            sig_spec = SignalPulseSpec(
                mean_photons=signal.mean_photons if signal else 50.0, width=w
            )
            hist = synthesize_histogram(
                seq,
                sig_spec,
                model,
                cap_eff,
                detection_efficiency,
                None,
                seed=child_rng(seed, "bandwidth", k),
                repetitions=repetitions,
            )
            res = extract_efficiency(hist, seq)
            eta, t_meas = res.eta_int, res.t_storage_measured
        etas.append(eta)
        t_stores.append(t_meas)
        caps.append(capture)
    etas = np.array(etas)
    eta_max = etas.max()
    i_max = int(np.argmax(etas))
    width_star = None
    for j in range(i_max + 1, widths.size):
        if etas[j] <= 0.5 * eta_max:
            width_star = float(
                np.interp(0.5 * eta_max, [etas[j], etas[j - 1]], [widths[j], widths[j - 1]])
            )
            break
    if width_star is None:
        raise PeakNotFoundError(
            "bandwidth undetermined: efficiency never falls 3 dB below its "
            "maximum within the scanned widths"
        )
    return {
        "signal_widths": widths,
        "efficiencies": etas,
        "storage_times": np.array(t_stores),
        "capture_fractions": np.array(caps),
        "window_fwhm": float(window_fwhm),
        "width_at_minus3db": width_star,
        "bandwidth_hz": 1.0 / width_star,
    }


def multiplex_ensemble(
    n_channels,
    jitter_spec,
    control_width,
    set_storage_times,
    signal,
    model,
    base_captured_fraction=1.0,
    detection_efficiency=1.0,
    repetitions=3000,
    seed=0,
    coupling_efficiency=0.20,
):
    """Per-channel lifetime fits for an ensemble of near-identical channels.

    jitter_spec gives relative standard deviations for
    {'omega0', 'attenuation', 'coupling_efficiency'}; each channel draws its
    own parameters deterministically from the seed.  Drive jitter perturbs
    the capture fraction (through the group velocity's ~1/omega0^2 scaling),
    coupling jitter scales the efficiency amplitude only.  Returns
    per-channel fitted lifetimes with uncertainties and the cross-channel
    statistics.
    """
    if n_channels < 2:
        raise DomainError("ensemble needs at least two channels")
    for key in jitter_spec:
        if key not in ("omega0", "attenuation", "coupling_efficiency"):
            raise DomainError(f"unknown jitter key {key!r}")
    channels = []
    for ch in range(n_channels):
        rng = child_rng(seed, "multiplex-params", ch)
        f_omega = 1.0 + jitter_spec.get("omega0", 0.0) * rng.standard_normal()
        f_alpha = 1.0 + jitter_spec.get("attenuation", 0.0) * rng.standard_normal()
        f_coupling = 1.0 + jitter_spec.get(
            "coupling_efficiency", 0.0
        ) * rng.standard_normal()
        # group velocity scales ~omega0^2 in the deep-EIT regime, so the
        # capture fraction scales ~1/omega0^2; attenuation perturbs the
        # path-average weakly (first order in the dB change across L).
        capture = base_captured_fraction / f_omega ** 2
        capture *= 1.0 + 0.05 * (f_alpha - 1.0)
        capture = min(1.0, capture)
        amplitude = np.clip(f_coupling, 0.0, None)
        ch_model = StorageDecayModel(
            t_mem=model.t_mem,
            omega=model.omega,
            phi=model.phi,
            eta0=min(1.0, model.eta0 * amplitude),
        )
        curve = lifetime_scan(
            control_width,
            set_storage_times,
            signal,
            ch_model,
            captured_fraction=capture,
            detection_efficiency=detection_efficiency,
            repetitions=repetitions,
            seed=np.random.SeedSequence(
                entropy=int(seed), spawn_key=(1000 + ch,)
            ).generate_state(1)[0],
        )
        fit = fit_lifetime(
            curve.storage_times, curve.efficiencies, curve.uncertainties
        )
        channels.append(
            {
                "channel": ch,
                "omega0_factor": f_omega,
                "attenuation_factor": f_alpha,
                "coupling_factor": f_coupling,
                "t_mem": fit.estimates["t_mem"],
                "t_mem_uncertainty": fit.uncertainties["t_mem"],
                "frequency_hz": fit.estimates["omega"] / (2 * np.pi),
                "eta0": fit.estimates["eta0"],
                "fit_converged": fit.converged,
            }
        )
    t_mems = np.array([c["t_mem"] for c in channels])
    sigmas = np.array([c["t_mem_uncertainty"] for c in channels])
    max_diff = 0.0
    max_pair = (0, 1)
    for i in range(n_channels):
        for j in range(i + 1, n_channels):
            d = abs(t_mems[i] - t_mems[j])
            if d > max_diff:
                max_diff, max_pair = d, (i, j)
    combined = float(np.hypot(sigmas[max_pair[0]], sigmas[max_pair[1]]))
    return {
        "channels": channels,
        "max_pairwise_difference": float(max_diff),
        "max_pair": max_pair,
        "combined_uncertainty": combined,
        "reproducible": bool(max_diff <= combined),
    }


__all__ = [
    "DEFAULT_RETRIEVAL_LEAD",
    "RETRIEVAL_LEAD_RATIO",
    "PulseSequence",
    "SignalPulseSpec",
    "StorageDecayModel",
    "TimeHistogram",
    "EfficiencyResult",
    "EfficiencyCurve",
    "default_retrieval_lead",
    "measured_storage_time",
    "sequence_timings",
    "storage_efficiency",
    "synthesize_histogram",
    "extract_efficiency",
    "efficiency_uncertainty",
    "lifetime_scan",
    "spectral_acceptance",
    "bandwidth_scan",
    "multiplex_ensemble",
    "child_rng",
]
