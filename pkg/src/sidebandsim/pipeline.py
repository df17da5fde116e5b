"""Command implementations binding the modules into reproducible runs.

Every command takes a validated configuration, writes its outputs atomically
(CSV for spectra, raw little-endian float64 plus JSON sidecar for time
series, JSON for reports), and records a manifest with the configuration
hash, seed and output list.  Timestamps live only in the manifest and are
excluded from hashed content, so a rerun with the same seed reproduces
every data file byte for byte.
"""

from __future__ import annotations

import dataclasses
import json
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .config import ExperimentConfig, canonical_json, config_hash, config_to_dict
from .cooling import backaction, displacement_psd, effective_occupancy, no_heating, _sqq_values
from .detection import (asymmetry_factor, cooling_output_psd, dual_homodyne_reconstruct,
                        occupancy_from_asymmetry, probe_output_psd_values, sideband_ratio)
from .fitting import (apply_detector_calibration, calibrate_cavity_asymmetry,
                      detector_cross_calibration, fit_lorentzian, CalibrationResult)
from .spectra import TWO_PI, SpectrumGrid
from .system import backaction_damping_and_shift, modified_mechanical_susceptibility, cavity_susceptibility
from .synth import (TimeSeries, synth_photocurrents, welch_csd, welch_psd,
                    welch_segment_count)
from .tin import FrequencyNoiseSpectrum, tin_detuning_sweep, tin_second_order_psd, band_average_ratio

COMMANDS = ("spectrum", "cool", "tin", "synth", "dualhomodyne", "fit",
            "calibrate", "thermometry")


class PipelineError(RuntimeError):
    """Typed failure with a machine-readable record."""

    def __init__(self, kind, message, **extra):
        super().__init__(message)
        self.record = {"error": {"type": kind, "message": message, **extra}}


@dataclass
class RunManifest:
    config_hash: str
    version: str
    seed: int | None
    created_utc: str
    command: str
    outputs: list

    def as_dict(self):
        return dataclasses.asdict(self)


# ---------------------------------------------------------------------------
# atomic writers with deterministic formatting

def _atomic_write(path, data: bytes):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, columns):
    """Deterministic CSV: shortest round-trip float repr, unix newlines."""
    cols = [np.asarray(c) for c in columns]
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(repr(float(x)) for x in row))
    _atomic_write(path, ("\n".join(lines) + "\n").encode())


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return header, data


def write_json(path, obj):
    _atomic_write(path, (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode())


def write_timeseries(path_prefix, series: TimeSeries, meta):
    raw = path_prefix + ".f64"
    _atomic_write(raw, series.samples.astype("<f8").tobytes())
    sidecar = dict(meta)
    sidecar.update({"fs_hz": series.fs, "n_samples": int(series.n),
                    "dtype": "<f8", "file": os.path.basename(raw)})
    write_json(path_prefix + ".json", sidecar)
    return raw, path_prefix + ".json"


def read_timeseries(sidecar_path):
    with open(sidecar_path) as fh:
        meta = json.load(fh)
    raw = os.path.join(os.path.dirname(sidecar_path), meta["file"])
    samples = np.fromfile(raw, dtype="<f8")
    if samples.size != meta["n_samples"]:
        raise PipelineError("corrupt_input", f"{raw}: expected {meta['n_samples']} samples, "
                                             f"found {samples.size}")
    return TimeSeries(fs=meta["fs_hz"], samples=samples), meta


# ---------------------------------------------------------------------------

def _two_sided_windows(center, half_window, n_per_window=4001):
    neg = np.linspace(-center - half_window, -center + half_window, n_per_window)
    pos = np.linspace(center - half_window, center + half_window, n_per_window)
    return neg, pos


def _analysis_window(cfg: ExperimentConfig):
    gamma_opt, domega = backaction_damping_and_shift(
        cfg.defect.omega_m, cfg.defect, cfg.cooling, cfg.probe)
    gamma_tot = cfg.defect.gamma + gamma_opt
    center = cfg.defect.omega_m + domega + cfg.heating_budget().absorption_freq_shift
    return center, gamma_tot, cfg.analysis.window_linewidths * gamma_tot


def run_pipeline(cfg: ExperimentConfig, command, out_dir, options=None) -> RunManifest:
    if command not in COMMANDS:
        raise PipelineError("usage", f"unknown command {command!r}; choose from {COMMANDS}")
    options = dict(options or {})
    os.makedirs(out_dir, exist_ok=True)
    handler = {
        "spectrum": _cmd_spectrum, "cool": _cmd_cool, "tin": _cmd_tin,
        "synth": _cmd_synth, "dualhomodyne": _cmd_dualhomodyne, "fit": _cmd_fit,
        "calibrate": _cmd_calibrate, "thermometry": _cmd_thermometry,
    }[command]
    outputs = handler(cfg, out_dir, options)
    manifest = RunManifest(
        config_hash=config_hash(cfg), version=__version__,
        seed=cfg.synthesis.seed,
        created_utc=datetime.now(timezone.utc).isoformat(),
        command=command, outputs=sorted(os.path.basename(p) for p in outputs))
    write_json(os.path.join(out_dir, "manifest.json"), manifest.as_dict())
    return manifest


def _report_header(cfg):
    return {"config_hash": config_hash(cfg), "version": __version__}


def _cmd_cool(cfg, out_dir, options):
    rep = backaction(cfg.defect, cfg.cooling)
    heating = cfg.heating_budget()
    occ = effective_occupancy(rep, cfg.defect, heating)
    report = dict(_report_header(cfg))
    report.update({k: v for k, v in rep.as_dict().items()})
    report.update({
        "gamma_opt_hz": rep.gamma_opt / TWO_PI,
        "spring_shift_hz": rep.spring_shift / TWO_PI,
        "n_eff": occ.n_eff,
        "n_th_effective": heating.n_th_effective,
        "anti_damped": rep.anti_damped or occ.anti_damped,
    })
    p1 = os.path.join(out_dir, "backaction.json")
    write_json(p1, report)
    center, gamma_tot, half_window = _analysis_window(cfg)
    neg, pos = _two_sided_windows(center, half_window)
    omega = np.concatenate([neg, pos])
    vals = _sqq_values(omega, cfg.defect, cfg.cooling, cfg.probe, heating)
    p2 = os.path.join(out_dir, "displacement_psd.csv")
    write_csv(p2, ["freq_hz", "psd_quanta"], [omega / TWO_PI, vals])
    return [p1, p2]


def _cmd_spectrum(cfg, out_dir, options):
    heating = cfg.heating_budget()
    center, gamma_tot, half_window = _analysis_window(cfg)
    neg, pos = _two_sided_windows(center, half_window)
    omega = np.concatenate([neg, pos])
    probe_vals = probe_output_psd_values(omega, cfg.defect, cfg.cooling, cfg.probe,
                                         heating, eta=1.0)
    p1 = os.path.join(out_dir, "probe_output_psd.csv")
    write_csv(p1, ["freq_hz", "psd_shot_units"], [omega / TWO_PI, probe_vals])
    cool_spec = cooling_output_psd(omega, cfg.defect, cfg.cooling, heating, cfg.probe)
    p2 = os.path.join(out_dir, "cooling_output_psd.csv")
    write_csv(p2, ["freq_hz", "psd_shot_units"], [omega / TWO_PI, cool_spec.values])
    return [p1, p2]


def _cmd_tin(cfg, out_dir, options):
    level = options.get("sdd_level")
    band_limit = TWO_PI * float(options.get("sdd_band_hz", 7.0e6))
    if options.get("sdd_csv"):
        header, data = read_csv(options["sdd_csv"])
        grid = SpectrumGrid(TWO_PI * data[:, 0], data[:, 1] / TWO_PI)
        noise = FrequencyNoiseSpectrum(grid, band_limit)
    elif level is not None:
        noise = FrequencyNoiseSpectrum.flat(float(level), band_limit)
    else:
        noise = cfg.ensemble.frequency_noise_spectrum()
    mode = cfg.cooling
    if options.get("two_delta_over_kappa") is not None:
        vals = options["two_delta_over_kappa"]
        detunings = [-abs(float(x)) * mode.kappa / 2.0 for x in vals]
    else:
        detunings = np.linspace(-0.9, -0.1, 17) * mode.kappa
    band = cfg.analysis.band
    dets, ratios = tin_detuning_sweep(noise, mode, detunings, band, cfg.cooling_photons)
    p1 = os.path.join(out_dir, "tin_sweep.csv")
    write_csv(p1, ["detuning_over_kappa", "tin_sn_ratio"],
              [2.0 * np.abs(dets) / mode.kappa, ratios])
    s2 = tin_second_order_psd(noise, mode)
    p2 = os.path.join(out_dir, "tin_spectrum.csv")
    write_csv(p2, ["freq_hz", "rel_intensity_psd_per_hz", "shot_ratio"],
              [s2.omega / TWO_PI, s2.values * TWO_PI,
               s2.values * cfg.cooling_photons * mode.kappa_1])
    return [p1, p2]


def _cmd_synth(cfg, out_dir, options):
    seed = int(options.get("seed", cfg.synthesis.seed))
    gain = float(options.get("gain_ratio", 1.0))
    delay = float(options.get("delay_samples", 0.0))
    chains = cfg.chains
    if options.get("calibration_topology"):
        chains = (dataclasses.replace(chains[0], theta=0.0),
                  dataclasses.replace(chains[1], theta=0.0))
    s1, s2, info = synth_photocurrents(
        cfg.defect, cfg.cooling, cfg.probe, cfg.ensemble, chains,
        cfg.synthesis.fs, cfg.synthesis.n_samples, seed,
        cooling_photons=cfg.cooling_photons, probe_photons=cfg.probe_photons,
        heating=cfg.heating_budget(),
        transduction_order=cfg.synthesis.transduction_order,
        gain_ratio=gain, delay_samples=delay)
    meta = {"config_hash": config_hash(cfg), "seed": seed,
            "chains": [dataclasses.asdict(c) for c in chains],
            "gain_ratio": gain, "delay_samples": delay}
    outs = []
    for name, series in (("stream1", s1), ("stream2", s2)):
        outs.extend(write_timeseries(os.path.join(out_dir, name), series,
                                     dict(meta, stream=name)))
        spec = welch_psd(series, cfg.analysis.nperseg, cfg.analysis.overlap)
        p = os.path.join(out_dir, f"{name}_welch.csv")
        write_csv(p, ["freq_hz", "psd_shot_units"], [spec.omega / TWO_PI, spec.values])
        outs.append(p)
    return outs


def _load_psd_csv(path):
    header, data = read_csv(path)
    if data.shape[1] == 3:
        vals = data[:, 1] + 1j * data[:, 2]
    else:
        vals = data[:, 1]
    return SpectrumGrid(TWO_PI * data[:, 0], vals)


def _cmd_dualhomodyne(cfg, out_dir, options):
    if options.get("streams"):
        side1, side2 = options["streams"]
        s1, meta1 = read_timeseries(side1)
        s2, meta2 = read_timeseries(side2)
        if options.get("calibration_json"):
            with open(options["calibration_json"]) as fh:
                cal = json.load(fh)
            s2 = apply_detector_calibration(
                s2, CalibrationResult(gain_ratio=cal["gain_ratio"],
                                      phase_delay=cal["phase_delay_s"],
                                      residual=cal.get("residual", 0.0)))
        nperseg, overlap = cfg.analysis.nperseg, cfg.analysis.overlap
        psd1 = welch_psd(s1, nperseg, overlap)
        psd2 = welch_psd(s2, nperseg, overlap)
        cross = welch_csd(s1, s2, nperseg, overlap)
    else:
        psd1 = _load_psd_csv(options["psd1"])
        psd2 = _load_psd_csv(options["psd2"])
        cross = _load_psd_csv(options["cross"])
    rec = dual_homodyne_reconstruct(psd1, psd2, cross, cfg.chains)
    p = os.path.join(out_dir, "reconstructed_psd.csv")
    write_csv(p, ["freq_hz", "psd_shot_units"], [rec.omega / TWO_PI, rec.values])
    return [p]


def _cmd_fit(cfg, out_dir, options):
    spec = _load_psd_csv(options["input"])
    window = options.get("window")
    if window is not None:
        window = (TWO_PI * float(window[0]), TWO_PI * float(window[1]))
    masks = [(TWO_PI * float(lo), TWO_PI * float(hi))
             for lo, hi in options.get("masks", [])]
    fit = fit_lorentzian(spec, window=window, mask=masks,
                         n_segments=options.get("n_segments"))
    report = dict(_report_header(cfg))
    report.update(fit.as_dict())
    p = os.path.join(out_dir, "lorentzian_fit.json")
    write_json(p, report)
    return [p]


def _cmd_calibrate(cfg, out_dir, options):
    outs = []
    if options.get("pairs"):
        header, data = read_csv(options["pairs"])
        omegas = TWO_PI * data[:, 0]
        ratios = data[:, 1]
        sigma = data[:, 2] if data.shape[1] > 2 else None
        cal = calibrate_cavity_asymmetry(omegas, ratios, cfg.probe, sigma=sigma)
        report = dict(_report_header(cfg))
        report.update({
            "kappa_hz": cal.kappa / TWO_PI, "detuning_hz": cal.detuning / TWO_PI,
            "kappa_err_hz": cal.kappa_err / TWO_PI,
            "detuning_err_hz": cal.detuning_err / TWO_PI,
            "residual_rms": cal.residual_rms, "ill_conditioned": cal.ill_conditioned,
        })
        p = os.path.join(out_dir, "asymmetry_calibration.json")
        write_json(p, report)
        outs.append(p)
        grid = np.linspace(0.5 * omegas.min(), 1.5 * omegas.max(), 2001)
        p2 = os.path.join(out_dir, "asymmetry_curve.csv")
        write_csv(p2, ["freq_hz", "s_factor"], [grid / TWO_PI, cal.curve(grid)])
        outs.append(p2)
    elif options.get("streams"):
        side1, side2 = options["streams"]
        s1, _ = read_timeseries(side1)
        s2, _ = read_timeseries(side2)
        bands = [(TWO_PI * float(lo), TWO_PI * float(hi))
                 for lo, hi in options.get("tone_bands", [])]
        if not bands:
            center, gamma_tot, hw = _analysis_window(cfg)
            bands = [(center - hw, center + hw)]
        cal = detector_cross_calibration(s1, s2, bands,
                                         segment_length=options.get("nperseg", 2 ** 14))
        report = dict(_report_header(cfg))
        report.update({
            "gain_ratio": cal.gain_ratio, "phase_delay_s": cal.phase_delay,
            "delay_samples": cal.phase_delay * s1.fs,
            "residual_rad": cal.residual, "phase_intercept_rad": cal.phase_intercept,
        })
        p = os.path.join(out_dir, "detector_calibration.json")
        write_json(p, report)
        outs.append(p)
    else:
        raise PipelineError("usage", "calibrate needs --pairs or --streams input")
    return outs


def _cmd_thermometry(cfg, out_dir, options):
    if options.get("reconstructed"):
        rec = _load_psd_csv(options["reconstructed"])
    elif options.get("psd1"):
        rec = dual_homodyne_reconstruct(_load_psd_csv(options["psd1"]),
                                        _load_psd_csv(options["psd2"]),
                                        _load_psd_csv(options["cross"]), cfg.chains)
    else:
        raise PipelineError("usage", "thermometry needs --reconstructed or --psd1/--psd2/--cross")
    center, gamma_tot, half_window = _analysis_window(cfg)
    if options.get("add_synth_asymmetry"):
        # classical synthesis carries no quantum sideband asymmetry; add the
        # separated imprecision-backaction term of the forward model
        heating = cfg.heating_budget()
        chi_m = modified_mechanical_susceptibility(rec.omega, cfg.defect, cfg.cooling, cfg.probe)
        corr = (2.0 * cfg.probe.g ** 2 * cfg.probe.kappa_1
                * np.abs(cavity_susceptibility(-rec.omega, cfg.probe)) ** 2
                * np.imag(chi_m))
        rec = rec.with_values(rec.values + corr)
    masks = list(cfg.analysis.masks) + [(TWO_PI * float(lo), TWO_PI * float(hi))
                                        for lo, hi in options.get("masks", [])]
    pair = sideband_ratio(rec, center, half_window, masks=masks)
    s = asymmetry_factor(center, cfg.probe)
    occ = occupancy_from_asymmetry(pair.ratio, s) if np.isfinite(pair.ratio) else None
    report = dict(_report_header(cfg))
    report.update({
        "omega_m_hz": center / TWO_PI,
        "R": pair.ratio, "s": s,
        "n_eff": occ.n_eff if occ else None,
        "convention": pair.convention,
        "flags": sorted(set(pair.flags) | set(occ.flags if occ else ("no_ratio",))),
        "area_pos": pair.area_pos, "area_neg": pair.area_neg,
        "floor": pair.floor,
    })
    p = os.path.join(out_dir, "thermometry.json")
    write_json(p, report)
    return [p]
