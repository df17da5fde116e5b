"""Dynamical backaction, final occupancy and the displacement spectrum.

The displacement PSD follows the quantum Langevin network of the cooled
oscillator: thermal force, cold-bath backaction of one or two beams, and
an extra classical radiation-pressure drive from residual intermodulation
(intensity) noise of the cooling beam.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .spectra import TWO_PI, SpectrumGrid, as_omega, halfline_integral
from .system import (MechanicalMode, OpticalMode, backaction_damping_and_shift,
                     cavity_susceptibility, modified_mechanical_susceptibility)


@dataclass(frozen=True)
class BackactionReport:
    """Scattering rates and derived cooling figures, all in rad/s except the
    dimensionless occupancies.

    ``n_min`` is the backaction-limit occupancy from the rate ratio
    A+ / (A- - A+), which is the definitionally safe form.  The two closed
    forms that circulate, differing in whether the cavity linewidth enters
    squared as kappa or kappa/2, are emitted alongside for comparison;
    the kappa/2 variant is algebraically identical to the ratio form.
    """

    a_plus: float
    a_minus: float
    gamma_opt: float
    spring_shift: float
    n_min: float
    n_min_closed_half_kappa: float
    n_min_closed_kappa: float
    anti_damped: bool
    g_squared: float = 0.0

    def as_dict(self):
        return {
            "a_plus": self.a_plus,
            "a_minus": self.a_minus,
            "gamma_opt": self.gamma_opt,
            "spring_shift": self.spring_shift,
            "n_min": self.n_min,
            "n_min_closed_half_kappa": self.n_min_closed_half_kappa,
            "n_min_closed_kappa": self.n_min_closed_kappa,
            "anti_damped": self.anti_damped,
            "g_squared": self.g_squared,
        }


@dataclass(frozen=True)
class HeatingBudget:
    """Extra decoherence channels entering the occupancy balance.

    Parameters
    ----------
    n_th_effective : float
        Bath occupancy including any absorption-induced temperature rise.
    tin_force_psd : float or callable
        Intracavity amplitude-quadrature PSD of the cooling-beam
        intermodulation noise (units 1/(rad/s)), either a constant (white
        over the mechanical linewidth) or a callable of omega.  Relates to
        the detected shot-noise ratio r via S = r / (2 kappa_1).
    absorption_freq_shift : float
        Power-dependent mechanical frequency shift (rad/s), may be negative.
    absorption_temp_rise : float
        Temperature rise of the local bath (K).
    """

    n_th_effective: float
    tin_force_psd: object = 0.0
    absorption_freq_shift: float = 0.0
    absorption_temp_rise: float = 0.0

    def __post_init__(self):
        if self.n_th_effective < 0:
            raise ValueError("n_th_effective must be >= 0")
        if self.absorption_temp_rise < 0:
            raise ValueError("absorption_temp_rise must be >= 0")

    def tin_psd_at(self, omega):
        if callable(self.tin_force_psd):
            return np.asarray(self.tin_force_psd(omega), dtype=float)
        return np.full_like(np.asarray(omega, dtype=float), float(self.tin_force_psd))


def no_heating(mode: MechanicalMode) -> HeatingBudget:
    """Heating budget with the bare bath occupancy and no extra channels."""
    return HeatingBudget(n_th_effective=mode.n_th)


def tin_force_psd_from_shot_ratio(shot_ratio, kappa_1):
    """Convert a detected TIN/shot-noise ratio into the intracavity
    amplitude-quadrature force PSD used by the occupancy balance."""
    return float(shot_ratio) * 0.5 / float(kappa_1)


def backaction(mode: MechanicalMode, cooling: OpticalMode) -> BackactionReport:
    """Stokes/anti-Stokes rates and the sideband-cooling figures of merit."""
    om = mode.omega_m
    a_minus = cooling.g ** 2 * cooling.kappa * np.abs(cavity_susceptibility(om, cooling)) ** 2
    a_plus = cooling.g ** 2 * cooling.kappa * np.abs(cavity_susceptibility(-om, cooling)) ** 2
    gamma_opt, spring = backaction_damping_and_shift(om, mode, cooling)
    anti_damped = gamma_opt <= 0.0
    n_min = np.inf if anti_damped else a_plus / (a_minus - a_plus)
    d = cooling.detuning
    denom = -4.0 * d * om
    if denom > 0:
        closed_half = ((om + d) ** 2 + (cooling.kappa / 2.0) ** 2) / denom
        closed_kappa = ((om + d) ** 2 + cooling.kappa ** 2) / denom
    else:
        closed_half = closed_kappa = np.inf
    return BackactionReport(
        a_plus=float(a_plus), a_minus=float(a_minus),
        gamma_opt=float(gamma_opt), spring_shift=float(spring),
        n_min=float(n_min),
        n_min_closed_half_kappa=float(closed_half),
        n_min_closed_kappa=float(closed_kappa),
        anti_damped=bool(anti_damped),
        g_squared=float(cooling.g ** 2),
    )


def coupling_for_damping(gamma_opt_target, mode: MechanicalMode,
                         cooling: OpticalMode) -> OpticalMode:
    """Return a copy of ``cooling`` with g set to reach the requested
    optomechanical damping rate at the bare mechanical frequency."""
    import dataclasses
    if gamma_opt_target == 0.0:
        return dataclasses.replace(cooling, g=0.0)
    om = mode.omega_m
    chi2_diff = (np.abs(cavity_susceptibility(om, cooling)) ** 2
                 - np.abs(cavity_susceptibility(-om, cooling)) ** 2)
    g2 = gamma_opt_target / (cooling.kappa * chi2_diff)
    if g2 <= 0:
        raise ValueError("requested damping has the wrong sign for this detuning")
    return dataclasses.replace(cooling, g=float(np.sqrt(g2)))


def quantum_cooperativity(mode: MechanicalMode, cavity: OpticalMode):
    """Diagnostic C_q = 4 g^2 / (kappa Gamma n_th).

    The standard definition is assumed here; treat as an order-of-magnitude
    diagnostic only.
    """
    if mode.n_th == 0:
        return np.inf
    return 4.0 * cavity.g ** 2 / (cavity.kappa * mode.gamma * mode.n_th)


@dataclass(frozen=True)
class OccupancyResult:
    n_eff: float
    anti_damped: bool = False


def effective_occupancy(report: BackactionReport, mode: MechanicalMode,
                        heating: HeatingBudget | None = None) -> OccupancyResult:
    """Steady-state phonon occupancy of the cooled oscillator.

    n_eff = (A+ + n_th Gamma + 2 g^2 S_TIN) / (Gamma_opt + Gamma), with the
    intermodulation force PSD evaluated at the mechanical resonance (white
    over the linewidth: the total damping is orders of magnitude below the
    spectral scale of the intensity noise).
    """
    if heating is None:
        heating = no_heating(mode)
    gamma_tot = report.gamma_opt + mode.gamma
    if gamma_tot <= 0:
        return OccupancyResult(n_eff=np.inf, anti_damped=True)
    s_tin = float(heating.tin_psd_at(np.asarray(mode.omega_m)))
    n_tin = 2.0 * report.g_squared * s_tin
    n_eff = (report.a_plus + heating.n_th_effective * mode.gamma + n_tin) / gamma_tot
    return OccupancyResult(n_eff=float(n_eff))


def displacement_psd(grid, mode: MechanicalMode, cooling: OpticalMode,
                     probe: OpticalMode | None = None,
                     heating: HeatingBudget | None = None) -> SpectrumGrid:
    """Two-sided symmetrized PSD of the dimensionless displacement, quanta units.

    S(w) = |chi'_m|^2 2 Gamma [ n_th + 1/2
            + (kappa g^2 / 2 Gamma)(|chi_c(w)|^2 + |chi_c(-w)|^2)
            + (kappa_p g_p^2 / 2 Gamma)(|chi_p(w)|^2 + |chi_p(-w)|^2)
            + (2 g^2 / Gamma) S_TIN(w) ]

    The probe term is retained so that output-field spectra built on this
    PSD stay exact at finite probe coupling.
    """
    omega = as_omega(grid)
    vals = _sqq_values(omega, mode, cooling, probe, heating)
    gamma_opt, _ = backaction_damping_and_shift(mode.omega_m, mode, cooling, probe)
    gamma_tot = mode.gamma + gamma_opt
    if gamma_tot > 0:
        step = omega[1] - omega[0]
        if gamma_tot / step < 50:
            warnings.warn(
                f"grid resolution {step:.3g} rad/s gives fewer than 50 points across "
                f"the total linewidth {gamma_tot:.3g} rad/s", stacklevel=2)
    return SpectrumGrid(omega, vals)


def _sqq_values(omega, mode, cooling, probe=None, heating=None):
    if heating is None:
        heating = no_heating(mode)
    omega = np.asarray(omega, dtype=float)
    chi_p2 = np.abs(modified_mechanical_susceptibility(omega, mode, cooling, probe)) ** 2
    bracket = heating.n_th_effective + 0.5
    bracket = bracket + (cooling.kappa * cooling.g ** 2 / (2 * mode.gamma)) * (
        np.abs(cavity_susceptibility(omega, cooling)) ** 2
        + np.abs(cavity_susceptibility(-omega, cooling)) ** 2)
    if probe is not None and probe.g != 0.0:
        bracket = bracket + (probe.kappa * probe.g ** 2 / (2 * mode.gamma)) * (
            np.abs(cavity_susceptibility(omega, probe)) ** 2
            + np.abs(cavity_susceptibility(-omega, probe)) ** 2)
    bracket = bracket + (2 * cooling.g ** 2 / mode.gamma) * heating.tin_psd_at(omega)
    return chi_p2 * 2 * mode.gamma * bracket


def integrated_occupancy(mode: MechanicalMode, cooling: OpticalMode,
                         probe: OpticalMode | None = None,
                         heating: HeatingBudget | None = None,
                         nodes=4096):
    """Quadrature of the displacement PSD over the real line, minus the
    zero-point half quantum.

    Uses a tangent substitution centred on the (shifted) resonance in each
    half-line, which integrates the near-Lorentzian line essentially exactly
    even at intrinsic linewidths in the mHz range.
    """
    gamma_opt, domega = backaction_damping_and_shift(mode.omega_m, mode, cooling, probe)
    gamma_tot = mode.gamma + gamma_opt
    if gamma_tot <= 0:
        raise ValueError("anti-damped configuration has no stationary occupancy")
    center = mode.omega_m + domega
    hw = gamma_tot / 2.0

    def f(w):
        return _sqq_values(w, mode, cooling, probe, heating)

    total = (halfline_integral(f, center, hw, +1, nodes)
             + halfline_integral(f, -center, hw, -1, nodes)) / TWO_PI
    return total - 0.5


def absorption_model(g_squared, d_omega_d_temp, d_temp_d_g2,
                     mode: MechanicalMode, bath_temperature=300.0,
                     tin_force_psd=0.0) -> HeatingBudget:
    """Phenomenological linear absorption heating of the local bath.

    The intracavity power is parameterized by g^2; two user-supplied
    coefficients give the temperature rise per g^2 and the mechanical
    frequency shift per kelvin:

        dT      = d_temp_d_g2 * g^2              (K)
        dOmega  = -d_omega_d_temp * dT           (rad/s)
        n_th    -> n_th * (T + dT) / T

    No microscopic model is implied; the coefficients are calibration inputs.
    """
    if d_omega_d_temp < 0 or d_temp_d_g2 < 0:
        raise ValueError("absorption coefficients must be >= 0")
    if bath_temperature <= 0:
        raise ValueError("bath_temperature must be > 0")
    d_temp = d_temp_d_g2 * g_squared
    return HeatingBudget(
        n_th_effective=mode.n_th * (bath_temperature + d_temp) / bath_temperature,
        tin_force_psd=tin_force_psd,
        absorption_freq_shift=-d_omega_d_temp * d_temp,
        absorption_temp_rise=d_temp,
    )
