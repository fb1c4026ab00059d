"""Command-line front end.

Verbs: spectrum, fit-spectrum, slowlight, storage, lifetime, bandwidth,
multiplex, selftest.  Global flags: --config, --seed, --out, --quiet.

Exit codes: 0 success, 2 configuration error, 4 fit non-convergence,
3 any other numeric or model error.
"""

import argparse
import sys

import numpy as np

from . import eit, fitting, storage
from .atoms import VaporState
from .config import ExperimentConfig
from .errors import ConfigError, VaporMemoryError
from .runio import RunManifest, read_csv_columns, run_directory, write_csv, write_json

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MODEL = 3
EXIT_FIT = 4


def _quadrature_settings(cfg):
    return {
        "z_nodes": cfg.sections["estimation"]["z_nodes"],
        "velocity_nodes": cfg.sections["estimation"]["velocity_nodes"],
        "index_convention": cfg.sections["estimation"]["index_convention"],
    }


def _spectrum_sidecar(cfg, drive, vapor):
    sys_ = cfg.system()
    return {
        "omega0": drive.omega0,
        "power": drive.power,
        "kappa": drive.kappa,
        "temperature": vapor.temperature,
        "density_scale": vapor.density_scale,
        "density": vapor.density,
        "gamma31": sys_.gamma31,
        "gamma_d": sys_.gamma_d,
        "mu31": sys_.mu31,
        "nu0": sys_.nu0,
        "waveguide": {
            "length": cfg.waveguide().length,
            "attenuation_db_per_mm": cfg.waveguide().attenuation_db_per_mm,
            "coupling_efficiency": cfg.waveguide().coupling_efficiency,
            "cell_length": cfg.waveguide().cell_length,
        },
        "quadrature": _quadrature_settings(cfg),
        "seed": cfg.seed,
    }


def cmd_spectrum(cfg, out_dir, manifest):
    wg, system, vapor, grid = cfg.waveguide(), cfg.system(), cfg.vapor(), cfg.grid()
    nz = cfg.sections["estimation"]["z_nodes"]
    outputs = []
    for power in cfg.power_ladder():
        drive = cfg.drive(power=power)
        spec = eit.transmission_spectrum(wg, drive, system, vapor, grid, nz)
        label = f"{power * 1e3:g}mW" if drive.power else f"{drive.omega0:.4g}rads"
        csv_path = write_csv(
            f"{out_dir}/spectrum_{label}.csv",
            ("detuning_hz", "transmission"),
            (grid.values, spec.transmission),
        )
        json_path = write_json(
            f"{out_dir}/spectrum_{label}.json", _spectrum_sidecar(cfg, drive, vapor)
        )
        outputs += [csv_path, json_path]
        manifest.set_status(f"spectrum:{label}", "ok")
    for p in outputs:
        manifest.add_output(p)
    return outputs


def cmd_fit_spectrum(cfg, data_csv, out_dir, manifest):
    manifest.add_input(data_csv)
    detuning, transmission = read_csv_columns(
        data_csv, ("detuning_hz", "transmission")
    )
    wg, system = cfg.waveguide(), cfg.system()
    vapor_template = VaporState(
        temperature=cfg.sections["vapor"]["temperature"], density_scale=1.0
    )
    nz = cfg.sections["estimation"]["z_nodes"]
    result = fitting.fit_spectrum(
        detuning, transmission, wg, system, vapor_template, z_nodes=nz
    )
    fitted_vapor = VaporState(
        temperature=vapor_template.temperature,
        density_scale=result.estimates["density_scale"],
    )
    fitted_drive = eit.ControlDrive(omega0=result.estimates["omega0"])
    grid = eit.DetuningGrid(detuning)
    on = eit.transmission_spectrum(wg, fitted_drive, system, fitted_vapor, grid, nz)
    off = eit.transmission_spectrum(
        wg, eit.ControlDrive(omega0=0.0), system, fitted_vapor, grid, nz
    )
    record = result.to_json_dict()
    record["derived"] = {"od_eit": eit.od_eit(on, off)}
    try:
        record["derived"]["eit_window_fwhm_hz"] = eit.eit_window_fwhm(on)
    except VaporMemoryError:
        record["derived"]["eit_window_fwhm_hz"] = None
    path = write_json(f"{out_dir}/fit_spectrum.json", record)
    manifest.add_output(path)
    manifest.set_status("fit-spectrum", "ok" if result.converged else "not converged")
    return result


def cmd_slowlight(cfg, out_dir, manifest):
    wg, system, vapor = cfg.waveguide(), cfg.system(), cfg.vapor()
    drive = cfg.drive()
    width = cfg.sections["sequence"]["signal_width"]
    res = eit.group_velocity_on_resonance(
        wg,
        drive,
        system,
        vapor,
        pulse_width=width,
        z_nodes=cfg.sections["estimation"]["z_nodes"],
        index_convention=cfg.sections["estimation"]["index_convention"],
    )
    record = {
        "group_velocity": res.group_velocity,
        "compression_factor": res.compression_factor,
        "compressed_length": res.compressed_length,
        "captured_fraction": res.captured_fraction,
        "pulse_width": width,
        "omega0": drive.omega0,
        "power": drive.power,
        "density_scale": vapor.density_scale,
        "quadrature": _quadrature_settings(cfg),
    }
    path = write_json(f"{out_dir}/slowlight.json", record)
    manifest.add_output(path)
    manifest.set_status("slowlight", "ok")
    return record


def _capture_fraction(cfg, drive):
    res = eit.group_velocity_on_resonance(
        cfg.waveguide(),
        drive,
        cfg.system(),
        cfg.vapor(),
        pulse_width=cfg.sections["sequence"]["signal_width"],
        z_nodes=cfg.sections["estimation"]["z_nodes"],
        index_convention=cfg.sections["estimation"]["index_convention"],
    )
    return res


def cmd_storage(cfg, out_dir, manifest):
    seq_cfg = cfg.sections["sequence"]
    det = cfg.sections["detection"]
    control_width = 1.5 * seq_cfg["signal_width"]
    seq = storage.sequence_timings(
        control_width, seq_cfg["set_storage"], cfg.retrieval_lead(control_width)
    )
    slow = _capture_fraction(cfg, cfg.drive())
    hist = storage.synthesize_histogram(
        seq,
        cfg.signal(),
        cfg.decay_model(),
        captured_fraction=slow.captured_fraction,
        detection_efficiency=det["detection_efficiency"],
        bin_width=det["bin_width"],
        seed=cfg.seed,
        repetitions=int(det["repetitions"]),
        background_rate=det["background_rate"],
    )
    result = storage.extract_efficiency(hist, seq)
    csv_path = write_csv(
        f"{out_dir}/histogram.csv",
        ("time_s", "counts"),
        (hist.bin_centers, hist.counts),
    )
    meta_path = write_json(f"{out_dir}/histogram.json", hist.metadata)
    rec_path = write_json(
        f"{out_dir}/storage_result.json",
        {
            "eta_int": result.eta_int,
            "n_read": result.n_read,
            "n_leak": result.n_leak,
            "t_storage_measured": result.t_storage_measured,
            "sigma_in": result.sigma_in,
            "fractional_delay": result.fractional_delay,
            "low_confidence": result.low_confidence,
            "captured_fraction": slow.captured_fraction,
        },
    )
    for p in (csv_path, meta_path, rec_path):
        manifest.add_output(p)
    manifest.set_status("storage", "ok")
    return result


def cmd_lifetime(cfg, out_dir, manifest):
    seq_cfg = cfg.sections["sequence"]
    det = cfg.sections["detection"]
    control_width = 1.5 * seq_cfg["signal_width"]
    slow = _capture_fraction(cfg, cfg.drive())
    curve = storage.lifetime_scan(
        control_width,
        cfg.set_storage_ladder(),
        cfg.signal(),
        cfg.decay_model(),
        captured_fraction=slow.captured_fraction,
        detection_efficiency=det["detection_efficiency"],
        bin_width=det["bin_width"],
        repetitions=int(det["repetitions"]),
        seed=cfg.seed,
        retrieval_lead=cfg.retrieval_lead(control_width),
        background_rate=det["background_rate"],
    )
    fit = fitting.fit_lifetime(
        curve.storage_times, curve.efficiencies, curve.uncertainties
    )
    csv_path = write_csv(
        f"{out_dir}/lifetime_curve.csv",
        ("storage_time_s", "efficiency", "uncertainty"),
        (curve.storage_times, curve.efficiencies, curve.uncertainties),
    )
    record = fit.to_json_dict()
    record["derived"] = {
        "t_mem_s": fit.estimates["t_mem"],
        "precession_frequency_hz": fit.estimates["omega"] / (2 * np.pi),
        "captured_fraction": slow.captured_fraction,
        "seed": cfg.seed,
    }
    json_path = write_json(f"{out_dir}/lifetime_fit.json", record)
    for p in (csv_path, json_path):
        manifest.add_output(p)
    manifest.set_status("lifetime", "ok" if fit.converged else "not converged")
    return curve, fit


def cmd_bandwidth(cfg, out_dir, manifest):
    bw_cfg = cfg.sections["bandwidth"]
    det = cfg.sections["detection"]
    drive = cfg.drive()
    slow = _capture_fraction(cfg, drive)
    grid = cfg.grid()
    spec = eit.transmission_spectrum(
        cfg.waveguide(),
        drive,
        cfg.system(),
        cfg.vapor(),
        grid,
        cfg.sections["estimation"]["z_nodes"],
    )
    window = eit.eit_window_fwhm(spec)
    decay = cfg.decay_model()
    from .atoms import larmor_angular_frequency

    model = storage.StorageDecayModel(
        t_mem=decay.t_mem,
        omega=larmor_angular_frequency(bw_cfg["b_field"]),
        phi=decay.phi,
        eta0=decay.eta0,
    )
    result = storage.bandwidth_scan(
        cfg.bandwidth_widths(),
        bw_cfg["set_storage"],
        model,
        group_velocity=slow.group_velocity,
        window_fwhm=window,
        cell_length=cfg.waveguide().cell_length,
        signal=cfg.signal(),
        detection_efficiency=det["detection_efficiency"],
        repetitions=int(det["repetitions"]),
        seed=cfg.seed,
        lead_policy=cfg.sections["sequence"]["lead_policy"],
    )
    csv_path = write_csv(
        f"{out_dir}/bandwidth_curve.csv",
        ("signal_width_s", "efficiency", "storage_time_s", "capture_fraction"),
        (
            result["signal_widths"],
            result["efficiencies"],
            result["storage_times"],
            result["capture_fractions"],
        ),
    )
    json_path = write_json(
        f"{out_dir}/bandwidth.json",
        {
            "bandwidth_hz": result["bandwidth_hz"],
            "width_at_minus3db": result["width_at_minus3db"],
            "window_fwhm_hz": result["window_fwhm"],
            "group_velocity": slow.group_velocity,
            "set_storage": bw_cfg["set_storage"],
            "seed": cfg.seed,
        },
    )
    for p in (csv_path, json_path):
        manifest.add_output(p)
    manifest.set_status("bandwidth", "ok")
    return result


def cmd_multiplex(cfg, out_dir, manifest):
    mp = cfg.sections["multiplex"]
    det = cfg.sections["detection"]
    seq_cfg = cfg.sections["sequence"]
    slow = _capture_fraction(cfg, cfg.drive())
    result = storage.multiplex_ensemble(
        int(mp["n_channels"]),
        {
            "omega0": mp["jitter_omega0"],
            "attenuation": mp["jitter_attenuation"],
            "coupling_efficiency": mp["jitter_coupling"],
        },
        1.5 * seq_cfg["signal_width"],
        cfg.set_storage_ladder(),
        cfg.signal(),
        cfg.decay_model(),
        base_captured_fraction=slow.captured_fraction,
        detection_efficiency=det["detection_efficiency"],
        repetitions=int(det["repetitions"]),
        seed=cfg.seed,
        coupling_efficiency=cfg.waveguide().coupling_efficiency,
    )
    path = write_json(f"{out_dir}/multiplex.json", result)
    manifest.add_output(path)
    manifest.set_status("multiplex", "ok")
    return result


def cmd_selftest(cfg, out_dir, manifest):
    """Fast internal consistency checks; nonzero exit if any fails."""
    from .atoms import b_field_from_precession, larmor_angular_frequency

    checks = {}
    f = larmor_angular_frequency(127.49e-6) / (2 * np.pi)
    checks["larmor_round_trip"] = (
        abs(b_field_from_precession(f) - 127.49e-6) < 1e-18
    )
    checks["larmor_field_value"] = abs(f - 3.573e6) / 3.573e6 < 5e-4
    wg, system = cfg.waveguide(), cfg.system()
    vapor = VaporState(temperature=347.15, density_scale=0.15)
    grid = eit.DetuningGrid.symmetric(1.0e9, 200)
    drive = cfg.drive(power=0.040)
    spec64 = eit.transmission_spectrum(wg, drive, system, vapor, grid, 64)
    spec128 = eit.transmission_spectrum(wg, drive, system, vapor, grid, 128)
    checks["z_quadrature_doubling"] = bool(
        np.max(np.abs(spec64.transmission - spec128.transmission)) < 1e-6
    )
    checks["transmission_bounded"] = bool(
        np.all(spec64.transmission <= 1 + 1e-6) and np.all(spec64.transmission >= 0)
    )
    empty = VaporState(temperature=347.15, density_scale=1e-300)
    spec0 = eit.transmission_spectrum(wg, drive, system, empty, grid, 16)
    checks["empty_cell_unity"] = bool(np.allclose(spec0.transmission, 1.0, atol=1e-9))
    seq = storage.sequence_timings(21.15e-9, 90e-9)
    h1 = storage.synthesize_histogram(
        seq, cfg.signal(), cfg.decay_model(), 0.2, seed=cfg.seed
    )
    h2 = storage.synthesize_histogram(
        seq, cfg.signal(), cfg.decay_model(), 0.2, seed=cfg.seed
    )
    checks["rng_determinism"] = bool(np.array_equal(h1.counts, h2.counts))
    path = write_json(f"{out_dir}/selftest.json", checks)
    manifest.add_output(path)
    ok = all(checks.values())
    manifest.set_status("selftest", "ok" if ok else "failed")
    if not ok:
        failed = sorted(k for k, v in checks.items() if not v)
        raise VaporMemoryError(f"selftest failures: {', '.join(failed)}")
    return checks


def build_parser():
    parser = argparse.ArgumentParser(
        prog="vapor-memory-lab",
        description="EIT light-storage forward modeling and parameter estimation",
    )
    parser.add_argument("--config", help="TOML (or JSON) configuration file")
    parser.add_argument("--seed", type=int, help="override the root RNG seed")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", help="simulate EIT transmission spectra")
    fit_p = sub.add_parser("fit-spectrum", help="fit a measured spectrum CSV")
    fit_p.add_argument("data", help="CSV with header detuning_hz,transmission")
    sub.add_parser("slowlight", help="group velocity and pulse compression")
    sub.add_parser("storage", help="synthesize and analyze one storage histogram")
    sub.add_parser("lifetime", help="storage-time scan and lifetime fit")
    sub.add_parser("bandwidth", help="pulse-width scan and memory bandwidth")
    sub.add_parser("multiplex", help="multi-channel reproducibility scan")
    sub.add_parser("selftest", help="run fast internal consistency checks")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        overrides = {}
        if args.seed is not None:
            overrides.setdefault("run", {})["seed"] = args.seed
        if args.out is not None:
            overrides.setdefault("run", {})["out_dir"] = args.out
        cfg = ExperimentConfig.load(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = run_directory(
        cfg.sections["run"]["out_dir"], args.command, cfg.hash()
    )
    manifest = RunManifest(args.command, cfg.hash())
    with open(f"{out_dir}/resolved_config.toml", "w", encoding="utf-8") as fh:
        fh.write(cfg.to_toml())
    manifest.add_output(f"{out_dir}/resolved_config.toml")

    handlers = {
        "spectrum": lambda: cmd_spectrum(cfg, out_dir, manifest),
        "fit-spectrum": lambda: cmd_fit_spectrum(cfg, args.data, out_dir, manifest),
        "slowlight": lambda: cmd_slowlight(cfg, out_dir, manifest),
        "storage": lambda: cmd_storage(cfg, out_dir, manifest),
        "lifetime": lambda: cmd_lifetime(cfg, out_dir, manifest),
        "bandwidth": lambda: cmd_bandwidth(cfg, out_dir, manifest),
        "multiplex": lambda: cmd_multiplex(cfg, out_dir, manifest),
        "selftest": lambda: cmd_selftest(cfg, out_dir, manifest),
    }
    exit_code = EXIT_OK
    try:
        result = handlers[args.command]()
        if args.command == "fit-spectrum" and not result.converged:
            exit_code = EXIT_FIT
        if args.command == "lifetime" and not result[1].converged:
            exit_code = EXIT_FIT
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        manifest.set_status(args.command, f"error: {exc}")
        exit_code = EXIT_CONFIG
    except VaporMemoryError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        manifest.set_status(args.command, f"error: {exc}")
        exit_code = EXIT_MODEL
    finally:
        manifest.write(out_dir)
    if not args.quiet:
        print(f"outputs written to {out_dir}")
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
