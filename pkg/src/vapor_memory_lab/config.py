"""Experiment configuration: TOML (or JSON) loading, validation, defaults,
and the resolved-config round trip.

A configuration is a flat two-level structure (sections of scalars/lists).
Unknown sections or keys are rejected before any computation runs; every
command writes the fully resolved configuration (defaults included) next to
its outputs, and re-ingesting that file reproduces identical results.
"""

import hashlib
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import eit
from .atoms import LambdaSystem, VaporState, larmor_angular_frequency
from .constants import CS_D1_FREQUENCY, CS_D1_NATURAL_LINEWIDTH, CS_D1_SIGNAL_DIPOLE
from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


DEFAULTS = {
    "atoms": {
        "nu0": CS_D1_FREQUENCY,
        "gamma31": CS_D1_NATURAL_LINEWIDTH / 2.0,
        "gamma_d": 2 * np.pi * 100e3,
        "mu31": float(CS_D1_SIGNAL_DIPOLE),
    },
    "waveguide": {
        "length": 5e-3,
        "attenuation_db_per_mm": 1.51,
        "coupling_efficiency": 0.20,
        "cell_length": 5e-3,
    },
    "drive": {
        # kappa calibrated so omega0(40 mW) = 2*pi*232 MHz
        "kappa": 2 * np.pi * 232e6 / np.sqrt(0.040),
        "power": 0.010,
        "powers": [],
        "omega0": 0.0,
    },
    "vapor": {
        "temperature": 347.15,
        "density_scale": 0.0,       # 0 requests OD_EIT calibration
        "calibrate_od_eit": 1.0,
        "calibrate_power": 0.040,
    },
    "grid": {
        "half_span": 1.5e9,
        "points_per_side": 1500,
    },
    "sequence": {
        "signal_width": 14.1e-9,
        "set_storage": 90e-9,
        "set_storage_start": 70e-9,
        "set_storage_stop": 430e-9,
        "set_storage_points": 25,
        "retrieval_lead": 0.0,      # 0 selects the lead policy default
        "lead_policy": "fixed",
    },
    "detection": {
        "bin_width": 1.41e-9,
        "repetitions": 3000,
        "detection_efficiency": 1.0,
        "mean_photons": 50.0,
        "background_rate": 0.0,
    },
    "decay": {
        "t_mem": 84e-9,
        "b_field": 127.49e-6,
        "phi": 0.9,
        "eta0": 0.9,
    },
    "bandwidth": {
        "width_start": 14.1e-9,
        "width_stop": 60e-9,
        "width_points": 24,
        "set_storage": 150e-9,
        "b_field": 0.0,
    },
    "multiplex": {
        "n_channels": 2,
        "jitter_omega0": 0.005,
        "jitter_attenuation": 0.005,
        "jitter_coupling": 0.005,
    },
    "estimation": {
        "z_nodes": 64,
        "velocity_nodes": 96,
        "index_convention": "paper",
    },
    "run": {
        "seed": 20240801,
        "out_dir": "runs",
    },
}


def _merge(defaults, overrides, path=""):
    out = {}
    for section, content in overrides.items():
        if section not in defaults:
            raise ConfigError(f"unknown config section {path}{section!r}")
        if not isinstance(content, dict):
            raise ConfigError(f"section {section!r} must be a table")
        for key in content:
            if key not in defaults[section]:
                raise ConfigError(f"unknown config key {section}.{key}")
    for section, content in defaults.items():
        out[section] = dict(content)
        if section in overrides:
            for key, value in overrides[section].items():
                default = defaults[section][key]
                if isinstance(default, bool) != isinstance(value, bool) and isinstance(
                    default, bool
                ):
                    raise ConfigError(f"{section}.{key} must be a boolean")
                if isinstance(default, (int, float)) and not isinstance(
                    value, (int, float)
                ):
                    raise ConfigError(f"{section}.{key} must be numeric")
                if isinstance(default, str) and not isinstance(value, str):
                    raise ConfigError(f"{section}.{key} must be a string")
                if isinstance(default, list) and not isinstance(value, list):
                    raise ConfigError(f"{section}.{key} must be a list")
                out[section][key] = value
    return out


@dataclass
class ExperimentConfig:
    """Validated, fully resolved configuration."""

    sections: dict

    @classmethod
    def load(cls, path=None, overrides=None):
        """Load a TOML or JSON config file and merge it over the defaults;
        ``overrides`` (section -> {key: value}) are applied last."""
        raw = {}
        if path is not None:
            text = open(path, "rb").read()
            if str(path).endswith(".json"):
                try:
                    raw = json.loads(text.decode("utf-8"))
                except json.JSONDecodeError as exc:
                    raise ConfigError(f"cannot parse {path}: {exc}") from exc
            else:
                try:
                    raw = tomllib.loads(text.decode("utf-8"))
                except tomllib.TOMLDecodeError as exc:
                    raise ConfigError(f"cannot parse {path}: {exc}") from exc
        merged = _merge(DEFAULTS, raw)
        if overrides:
            merged = _merge(DEFAULTS, _apply_overrides(merged, overrides))
        cfg = cls(sections=merged)
        cfg.validate()
        return cfg

    def validate(self):
        s = self.sections
        if s["vapor"]["temperature"] <= 0:
            raise ConfigError("vapor.temperature must be positive")
        if s["sequence"]["lead_policy"] not in ("fixed", "scaled"):
            raise ConfigError("sequence.lead_policy must be 'fixed' or 'scaled'")
        if s["estimation"]["index_convention"] not in ("paper", "dilute"):
            raise ConfigError("estimation.index_convention must be 'paper' or 'dilute'")
        if s["run"]["seed"] < 0:
            raise ConfigError("run.seed must be a non-negative integer")
        try:
            self.system()
            self.waveguide()
        except Exception as exc:
            raise ConfigError(f"invalid physical parameters: {exc}") from exc

    # ------------------------------------------------------------------
    # domain-object accessors

    def system(self):
        a = self.sections["atoms"]
        return LambdaSystem(
            nu0=a["nu0"], gamma31=a["gamma31"], gamma_d=a["gamma_d"], mu31=a["mu31"]
        )

    def waveguide(self):
        w = self.sections["waveguide"]
        return eit.WaveguideSpec(
            length=w["length"],
            attenuation_db_per_mm=w["attenuation_db_per_mm"],
            coupling_efficiency=w["coupling_efficiency"],
            cell_length=w["cell_length"],
        )

    def drive(self, power=None, omega0=None):
        d = self.sections["drive"]
        if omega0 is not None:
            return eit.ControlDrive(omega0=omega0)
        if d["omega0"] > 0:
            return eit.ControlDrive(omega0=d["omega0"])
        p = power if power is not None else d["power"]
        return eit.ControlDrive(power=p, kappa=d["kappa"])

    def power_ladder(self):
        d = self.sections["drive"]
        return list(d["powers"]) if d["powers"] else [d["power"]]

    def vapor(self):
        v = self.sections["vapor"]
        scale = v["density_scale"]
        if scale <= 0:
            scale = eit.calibrate_density_scale(
                self.waveguide(),
                self.drive(power=v["calibrate_power"]),
                self.system(),
                v["temperature"],
                target_od_eit=v["calibrate_od_eit"],
                z_nodes=self.sections["estimation"]["z_nodes"],
            )
        return VaporState(temperature=v["temperature"], density_scale=scale)

    def grid(self):
        g = self.sections["grid"]
        return eit.DetuningGrid.symmetric(g["half_span"], int(g["points_per_side"]))

    def decay_model(self):
        from .storage import StorageDecayModel

        d = self.sections["decay"]
        return StorageDecayModel(
            t_mem=d["t_mem"],
            omega=larmor_angular_frequency(d["b_field"]),
            phi=d["phi"],
            eta0=d["eta0"],
        )

    def signal(self):
        from .storage import SignalPulseSpec

        return SignalPulseSpec(
            mean_photons=self.sections["detection"]["mean_photons"],
            width=self.sections["sequence"]["signal_width"],
        )

    def retrieval_lead(self, control_width):
        from .storage import default_retrieval_lead

        lead = self.sections["sequence"]["retrieval_lead"]
        if lead > 0:
            return lead
        return default_retrieval_lead(
            control_width, self.sections["sequence"]["lead_policy"]
        )

    def set_storage_ladder(self):
        s = self.sections["sequence"]
        return np.linspace(
            s["set_storage_start"], s["set_storage_stop"], int(s["set_storage_points"])
        )

    def bandwidth_widths(self):
        b = self.sections["bandwidth"]
        return np.linspace(b["width_start"], b["width_stop"], int(b["width_points"]))

    @property
    def seed(self):
        return int(self.sections["run"]["seed"])

    # ------------------------------------------------------------------
    # serialization

    def to_toml(self):
        lines = []
        for section in sorted(self.sections):
            lines.append(f"[{section}]")
            for key in sorted(self.sections[section]):
                lines.append(f"{key} = {_toml_value(self.sections[section][key])}")
            lines.append("")
        return "\n".join(lines)

    def hash(self):
        return hashlib.sha256(self.to_toml().encode("utf-8")).hexdigest()


def _toml_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise ConfigError(f"cannot serialize config value of type {type(value)}")


def _apply_overrides(merged, overrides):
    out = {k: dict(v) for k, v in merged.items()}
    for section, content in overrides.items():
        if section not in out:
            raise ConfigError(f"unknown config section {section!r}")
        for key, value in content.items():
            out[section][key] = value
    return out


__all__ = ["DEFAULTS", "ExperimentConfig"]
