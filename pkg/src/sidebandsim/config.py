"""Experiment configuration: schema, validation, defaults, canonical hashing.

Configuration files are JSON with frequencies in Hz; everything is converted
to angular units on load.  The normalized dictionary (defaults filled, keys
sorted) is what gets hashed, so identical physics always yields an identical
configuration hash regardless of formatting.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .cooling import HeatingBudget, tin_force_psd_from_shot_ratio
from .detection import DetectionChain
from .spectra import TWO_PI
from .system import MechanicalMode, OpticalMode, magic_detuning
from .synth import NoiseEnsemble, background_comb, flat_band_ensemble


class ConfigError(ValueError):
    """Schema or invariant violation, naming the offending field."""


@dataclass(frozen=True)
class SynthesisSettings:
    fs: float = 31.25e6
    n_samples: int = 2 ** 24
    seed: int = 20250901
    transduction_order: int = 3

    def __post_init__(self):
        if self.fs <= 0:
            raise ConfigError("synthesis.fs_hz must be > 0")
        if self.n_samples < 2:
            raise ConfigError("synthesis.n_samples must be >= 2")
        if self.transduction_order not in (1, 2, 3):
            raise ConfigError("synthesis.transduction_order must be 1, 2 or 3")


@dataclass(frozen=True)
class AnalysisSettings:
    window_linewidths: float = 20.0
    masks: tuple = ()            # angular-frequency (lo, hi) intervals
    band: tuple = (TWO_PI * 2.0e6, TWO_PI * 4.0e6)
    nperseg: int = 2 ** 18
    overlap: float = 0.5

    def __post_init__(self):
        if self.window_linewidths <= 0:
            raise ConfigError("analysis.window_linewidths must be > 0")
        if not self.band[1] > self.band[0]:
            raise ConfigError("analysis.band_hz must be an increasing pair")
        for m in self.masks:
            if not m[1] > m[0]:
                raise ConfigError("analysis.masks_hz entries must be increasing pairs")


@dataclass(frozen=True)
class HeatingSettings:
    tin_shot_ratio: float = 0.15
    d_omega_d_temp: float = TWO_PI * 670.0     # rad/s per K
    d_temp_per_g2: float = 0.0                 # K per (rad/s)^2
    bath_temperature: float = 300.0

    def __post_init__(self):
        if self.tin_shot_ratio < 0:
            raise ConfigError("heating.tin_shot_ratio must be >= 0")
        if self.bath_temperature <= 0:
            raise ConfigError("heating.bath_temperature_k must be > 0")


@dataclass(frozen=True)
class ExperimentConfig:
    cooling: OpticalMode
    probe: OpticalMode
    defect: MechanicalMode
    ensemble: NoiseEnsemble
    chains: tuple
    heating_settings: HeatingSettings = HeatingSettings()
    synthesis: SynthesisSettings = SynthesisSettings()
    analysis: AnalysisSettings = AnalysisSettings()
    cooling_photons: float = 1.0e8
    probe_photons: float = 1.0e4

    def heating_budget(self) -> HeatingBudget:
        """Analytic heating budget for the defect mode: absorption scaling of
        the bath plus the white intermodulation force level implied by the
        configured shot-noise ratio."""
        hs = self.heating_settings
        d_temp = hs.d_temp_per_g2 * self.cooling.g ** 2
        return HeatingBudget(
            n_th_effective=self.defect.n_th * (hs.bath_temperature + d_temp) / hs.bath_temperature,
            tin_force_psd=tin_force_psd_from_shot_ratio(hs.tin_shot_ratio, self.cooling.kappa_1),
            absorption_freq_shift=-hs.d_omega_d_temp * d_temp,
            absorption_temp_rise=d_temp,
        )


# ---------------------------------------------------------------------------
# JSON <-> dataclasses

def _require(d, key, where):
    if key not in d:
        raise ConfigError(f"{where}.{key} is required")
    return d[key]


def _optical_from_dict(d, where):
    kappa = TWO_PI * float(_require(d, "kappa_hz", where))
    det = d.get("detuning_hz", "magic")
    if det == "magic":
        detuning = magic_detuning(kappa, -1)
    elif det == "+magic":
        detuning = magic_detuning(kappa, +1)
    else:
        detuning = TWO_PI * float(det)
    ports = tuple(TWO_PI * float(k) for k in d.get("port_couplings_hz", [0.8 * float(d["kappa_hz"])]))
    try:
        return OpticalMode(kappa=kappa, detuning=detuning, port_couplings=ports,
                           g=TWO_PI * float(d.get("g_hz", 0.0)), label=d.get("label", ""))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _optical_to_dict(m: OpticalMode):
    return {
        "kappa_hz": m.kappa / TWO_PI,
        "detuning_hz": m.detuning / TWO_PI,
        "port_couplings_hz": [k / TWO_PI for k in m.port_couplings],
        "g_hz": m.g / TWO_PI,
        "label": m.label,
    }


def _mech_from_dict(d, where):
    f = float(_require(d, "frequency_hz", where))
    if "quality_factor" in d:
        gamma = TWO_PI * f / float(d["quality_factor"])
    elif "gamma_hz" in d:
        gamma = TWO_PI * float(d["gamma_hz"])
    else:
        raise ConfigError(f"{where}: quality_factor or gamma_hz is required")
    try:
        return MechanicalMode(omega_m=TWO_PI * f, gamma=gamma,
                              n_th=float(d.get("n_th", 0.0)),
                              soft_clamped=bool(d.get("soft_clamped", False)))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _mech_to_dict(m: MechanicalMode):
    return {
        "frequency_hz": m.omega_m / TWO_PI,
        "gamma_hz": m.gamma / TWO_PI,
        "n_th": m.n_th,
        "soft_clamped": m.soft_clamped,
    }


def _ensemble_from_dict(d, where):
    kind = d.get("kind", "comb")
    if kind == "comb":
        return background_comb(
            count=int(d.get("count", 100)),
            f_min=float(d.get("f_min_hz", 0.35e6)),
            f_max=float(d.get("f_max_hz", 7.0e6)),
            bandgap=tuple(float(x) for x in d.get("bandgap_hz", (1.10e6, 1.25e6))),
            quality=float(d.get("quality", 2.0e3)),
            total_shift_rms=TWO_PI * float(d.get("total_shift_rms_hz", 2.0e5)),
            seed=d.get("seed"))
    if kind == "flat":
        return flat_band_ensemble(
            count=int(d.get("count", 70)),
            band_limit_hz=float(d.get("band_limit_hz", 7.0e6)),
            total_shift_rms=TWO_PI * float(d.get("total_shift_rms_hz", 2.0e5)),
            seed=d.get("seed"))
    if kind == "explicit":
        modes, coeffs = [], []
        for i, md in enumerate(_require(d, "modes", where)):
            modes.append(_mech_from_dict(md, f"{where}.modes[{i}]"))
            coeffs.append(TWO_PI * float(_require(md, "shift_coeff_hz", f"{where}.modes[{i}]")))
        return NoiseEnsemble(tuple(modes), tuple(coeffs), d.get("seed"))
    raise ConfigError(f"{where}.kind must be comb, flat or explicit, got {kind!r}")


def _ensemble_to_dict(e: NoiseEnsemble):
    return {
        "kind": "explicit",
        "seed": e.seed,
        "modes": [dict(_mech_to_dict(m), shift_coeff_hz=c / TWO_PI)
                  for m, c in zip(e.modes, e.coefficients)],
    }


def _chain_from_dict(d, where):
    try:
        return DetectionChain(theta=float(d.get("theta_rad", 0.0)),
                              eta=float(_require(d, "eta", where)),
                              lo_amplitude=float(d.get("lo_amplitude", 1.0)),
                              bs_reflectivity=float(d.get("bs_reflectivity", 0.0)),
                              tin_cancelled=bool(d.get("tin_cancelled", True)))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _chain_to_dict(c: DetectionChain):
    return {"theta_rad": c.theta, "eta": c.eta, "lo_amplitude": c.lo_amplitude,
            "bs_reflectivity": c.bs_reflectivity, "tin_cancelled": c.tin_cancelled}


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration root must be a JSON object")
    sys_d = _require(raw, "system", "config")
    det_d = raw.get("detection", {})
    chains_d = det_d.get("chains", [{"theta_rad": 0.0, "eta": 0.8},
                                    {"theta_rad": -np.pi / 3, "eta": 0.8}])
    if len(chains_d) != 2:
        raise ConfigError("detection.chains must list exactly two chains")
    heat_d = sys_d.get("heating", {})
    synth_d = raw.get("synthesis", {})
    ana_d = raw.get("analysis", {})
    cfg = ExperimentConfig(
        cooling=_optical_from_dict(_require(sys_d, "cooling", "system"), "system.cooling"),
        probe=_optical_from_dict(_require(sys_d, "probe", "system"), "system.probe"),
        defect=_mech_from_dict(_require(sys_d, "defect", "system"), "system.defect"),
        ensemble=_ensemble_from_dict(sys_d.get("ensemble", {}), "system.ensemble"),
        chains=tuple(_chain_from_dict(c, f"detection.chains[{i}]")
                     for i, c in enumerate(chains_d)),
        heating_settings=HeatingSettings(
            tin_shot_ratio=float(heat_d.get("tin_shot_ratio", 0.15)),
            d_omega_d_temp=TWO_PI * float(heat_d.get("d_omega_d_temp_hz_per_k", 670.0)),
            d_temp_per_g2=float(heat_d.get("d_temp_per_g2_k", 0.0)),
            bath_temperature=float(heat_d.get("bath_temperature_k", 300.0))),
        synthesis=SynthesisSettings(
            fs=float(synth_d.get("fs_hz", 31.25e6)),
            n_samples=int(synth_d.get("n_samples", 2 ** 24)),
            seed=int(synth_d.get("seed", 20250901)),
            transduction_order=int(synth_d.get("transduction_order", 3))),
        analysis=AnalysisSettings(
            window_linewidths=float(ana_d.get("window_linewidths", 20.0)),
            masks=tuple((TWO_PI * float(lo), TWO_PI * float(hi))
                        for lo, hi in ana_d.get("masks_hz", [])),
            band=tuple(TWO_PI * float(x) for x in ana_d.get("band_hz", (2.0e6, 4.0e6))),
            nperseg=int(ana_d.get("nperseg", 2 ** 18)),
            overlap=float(ana_d.get("overlap", 0.5))),
        cooling_photons=float(sys_d.get("cooling_photons", 1.0e8)),
        probe_photons=float(sys_d.get("probe_photons", 1.0e4)),
    )
    return cfg


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return {
        "system": {
            "cooling": _optical_to_dict(cfg.cooling),
            "probe": _optical_to_dict(cfg.probe),
            "defect": _mech_to_dict(cfg.defect),
            "ensemble": _ensemble_to_dict(cfg.ensemble),
            "heating": {
                "tin_shot_ratio": cfg.heating_settings.tin_shot_ratio,
                "d_omega_d_temp_hz_per_k": cfg.heating_settings.d_omega_d_temp / TWO_PI,
                "d_temp_per_g2_k": cfg.heating_settings.d_temp_per_g2,
                "bath_temperature_k": cfg.heating_settings.bath_temperature,
            },
            "cooling_photons": cfg.cooling_photons,
            "probe_photons": cfg.probe_photons,
        },
        "detection": {"chains": [_chain_to_dict(c) for c in cfg.chains]},
        "synthesis": {
            "fs_hz": cfg.synthesis.fs,
            "n_samples": cfg.synthesis.n_samples,
            "seed": cfg.synthesis.seed,
            "transduction_order": cfg.synthesis.transduction_order,
        },
        "analysis": {
            "window_linewidths": cfg.analysis.window_linewidths,
            "masks_hz": [[lo / TWO_PI, hi / TWO_PI] for lo, hi in cfg.analysis.masks],
            "band_hz": [x / TWO_PI for x in cfg.analysis.band],
            "nperseg": cfg.analysis.nperseg,
            "overlap": cfg.analysis.overlap,
        },
    }


def canonical_json(d: dict) -> str:
    return json.dumps(d, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(canonical_json(config_to_dict(cfg)).encode()).hexdigest()


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return config_from_dict(raw)


def save_config(cfg: ExperimentConfig, path):
    with open(path, "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")


def paper_default_config(seed=20250901) -> ExperimentConfig:
    """Defaults: 14 MHz cooling cavity and 49.4 MHz probe cavity at magic
    detuning, 1.167 MHz defect mode with Q = 1.8e8 at room temperature,
    31.25 MHz sampling."""
    return config_from_dict({
        "system": {
            "cooling": {"kappa_hz": 14.0e6, "detuning_hz": "magic",
                        "port_couplings_hz": [11.2e6], "g_hz": 3.02e5,
                        "label": "cooling 862 nm"},
            "probe": {"kappa_hz": 49.4e6, "detuning_hz": "magic",
                      "port_couplings_hz": [34.58e6], "g_hz": 5.0e4,
                      "label": "probe 813 nm"},
            "defect": {"frequency_hz": 1.167e6, "quality_factor": 1.8e8,
                       "n_th": 5.357e6, "soft_clamped": True},
            "ensemble": {"kind": "comb"},
            "heating": {"tin_shot_ratio": 0.15},
        },
        "detection": {"chains": [
            {"theta_rad": 0.0, "eta": 0.8, "tin_cancelled": True},
            {"theta_rad": -np.pi / 3, "eta": 0.8, "bs_reflectivity": 0.02,
             "tin_cancelled": True},
        ]},
        "synthesis": {"seed": seed},
        "analysis": {},
    })
