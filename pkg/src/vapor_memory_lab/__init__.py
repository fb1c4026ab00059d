"""vapor-memory-lab: EIT light-storage forward modeling and parameter
estimation for warm cesium vapor in lossy hollow-core waveguides."""

__version__ = "0.1.0"

from .atoms import (
    LambdaSystem,
    VaporState,
    b_field_from_precession,
    larmor_angular_frequency,
    maxwell_boltzmann_velocity_pdf,
    vapor_density,
)
from .constants import CONST, PhysicalConstants
from .eit import (
    ControlDrive,
    DetuningGrid,
    SlowLightResult,
    Spectrum,
    WaveguideSpec,
    calibrate_density_scale,
    calibrate_kappa,
    doppler_convolve,
    doppler_susceptibility,
    eit_window_fwhm,
    group_velocity_on_resonance,
    od_eit,
    rabi_at,
    rabi_vs_power_curve,
    susceptibility,
    transmission_spectrum,
)
from .fitting import (
    FitProblem,
    FitResult,
    fit_gaussian_peak,
    fit_lifetime,
    fit_spectrum,
    grid_search_oracle,
)
from .storage import (
    EfficiencyResult,
    PulseSequence,
    SignalPulseSpec,
    StorageDecayModel,
    TimeHistogram,
    bandwidth_scan,
    extract_efficiency,
    lifetime_scan,
    multiplex_ensemble,
    sequence_timings,
    storage_efficiency,
    synthesize_histogram,
)
