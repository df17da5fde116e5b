"""Output-field spectra, homodyne models, dual-homodyne reconstruction and
sideband-asymmetry thermometry.

The spectra are evaluated with a small frequency-domain noise network: every
operator of interest (cavity outputs, measured quadratures) is expressed as
rows of coefficients over the independent noise channels (vacuum entering
each cavity port, the thermal force, classical intermodulation noise), and
symmetrized spectra follow from per-bin pairing rules.  Vacuum ports use the
exact non-commuting pairing, which is what produces the motional sideband
asymmetry through the imprecision-backaction cross terms; the thermal force
and the intermodulation noise are symmetric classical channels.
"""

from __future__ import annotations

import numpy as np

from dataclasses import dataclass

from .cooling import HeatingBudget, no_heating
from .spectra import TWO_PI, SpectrumGrid, as_omega, halfline_integral
from .system import (MechanicalMode, OpticalMode, cavity_susceptibility,
                     modified_mechanical_susceptibility)


@dataclass(frozen=True)
class DetectionChain:
    """One homodyne port.

    theta is the measured quadrature angle (rad); eta the detection
    efficiency of the port excluding the even main split; lo_amplitude and
    bs_reflectivity document the single-port-homodyne configuration
    (local-oscillator amplitude relative to the signal, beam-splitter
    reflectivity r << 1); tin_cancelled records whether the port's
    intermodulation noise has been nulled by the LO choice.
    """

    theta: float
    eta: float
    lo_amplitude: float = 1.0
    bs_reflectivity: float = 0.0
    tin_cancelled: bool = True

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if not 0.0 <= self.bs_reflectivity < 0.5:
            raise ValueError(f"bs_reflectivity must lie in [0, 0.5), got {self.bs_reflectivity}")


class IllConditionedReconstruction(ValueError):
    """Raised when the two homodyne angles are too close (mod pi) to invert."""


# ---------------------------------------------------------------------------
# noise network

def _q_rows(omega, mech, cooling, probe, heating):
    """Coefficient rows of the dressed displacement Q(w) over the noise
    channels.  Bosonic channels appear as (name, 'a') / (name, 'ad'),
    Hermitian channels as (name, 'h')."""
    omega = np.asarray(omega, dtype=float)
    chi_p_m = modified_mechanical_susceptibility(omega, mech, cooling, probe)
    rows = {("P", "h"): chi_p_m * np.sqrt(2.0 * mech.gamma)}
    for tag, mode in (("c", cooling), ("p", probe)):
        if mode is None or mode.g == 0.0:
            continue
        chi_w = cavity_susceptibility(omega, mode)
        chi_cn = np.conj(cavity_susceptibility(-omega, mode))
        for i, kp in enumerate(mode.effective_ports()):
            pref = -chi_p_m * np.sqrt(2.0 * kp) * mode.g
            rows[(f"{tag}{i}", "a")] = pref * chi_w
            rows[(f"{tag}{i}", "ad")] = pref * chi_cn
    rows[("xi", "h")] = -2.0 * cooling.g * chi_p_m
    return rows


def _output_rows(omega, mech, cooling, probe, heating, which, tin_cross_sign=+1.0):
    """Rows of the output field of the probe ('p') or cooling ('c') beam."""
    omega = np.asarray(omega, dtype=float)
    mode = probe if which == "p" else cooling
    chi = cavity_susceptibility(omega, mode)
    T = 1j * np.sqrt(2.0) * mode.g * np.sqrt(mode.kappa_1) * chi
    rows = {k: T * v for k, v in _q_rows(omega, mech, cooling, probe, heating).items()}

    def add(key, val):
        rows[key] = rows.get(key, 0.0) + val

    ports = mode.effective_ports()
    add((f"{which}0", "a"), 1.0 - mode.kappa_1 * chi)
    for i, kp in enumerate(ports[1:], start=1):
        add((f"{which}{i}", "a"), -np.sqrt(mode.kappa_1 * kp) * chi)
    if which == "c":
        # intracavity intermodulation field leaks straight out of the port;
        # its amplitude quadrature is the same classical process that drives
        # the oscillator, hence the interference
        add(("xi", "h"), -np.sqrt(mode.kappa_1) * tin_cross_sign / np.sqrt(2.0))
    return rows


def _vacuum_rows(name):
    def f(omega):
        omega = np.asarray(omega, dtype=float)
        return {(name, "a"): np.ones_like(omega, dtype=complex)}
    return f


def _dagger(rows_fn):
    def f(omega):
        base = rows_fn(-np.asarray(omega, dtype=float))
        out = {}
        for (name, kind), v in base.items():
            if kind == "a":
                out[(name, "ad")] = np.conj(v)
            elif kind == "ad":
                out[(name, "a")] = np.conj(v)
            else:
                out[(name, "h")] = np.conj(v)
        return out
    return f


def _x_theta(rows_fn, theta):
    dag = _dagger(rows_fn)

    def f(omega):
        out = {}
        for k, v in rows_fn(omega).items():
            out[k] = out.get(k, 0.0) + np.exp(-1j * theta) * v / np.sqrt(2.0)
        for k, v in dag(omega).items():
            out[k] = out.get(k, 0.0) + np.exp(1j * theta) * v / np.sqrt(2.0)
        return out
    return f


def _combine(*weighted_rows_fns):
    def f(omega):
        out = {}
        for weight, fn in weighted_rows_fns:
            for k, v in fn(omega).items():
                out[k] = out.get(k, 0.0) + weight * v
        return out
    return f


def _pair(rows_a, rows_b, omega, hermitian_spectra):
    """< A(w) B(-w) > spectral weight: quantum vacuum pairing <a a+> = 1,
    <a+ a> = 0 on bosonic channels, symmetric classical spectra on the
    Hermitian channels."""
    total = np.zeros(np.shape(omega), dtype=complex)
    names = {n for (n, _) in rows_a} | {n for (n, _) in rows_b}
    for n in names:
        if (n, "h") in rows_a or (n, "h") in rows_b:
            a = rows_a.get((n, "h"), 0.0)
            b = rows_b.get((n, "h"), 0.0)
            total = total + a * b * hermitian_spectra[n](omega)
        else:
            total = total + rows_a.get((n, "a"), 0.0) * rows_b.get((n, "ad"), 0.0)
    return total


def _sym_spectrum(rows_fn_a, rows_fn_b, omega, hermitian_spectra):
    """S_AB(w) = 1/2 [ <A(w)B(-w)> + <B(-w)A(w)> ] per bin."""
    omega = np.asarray(omega, dtype=float)
    first = _pair(rows_fn_a(omega), rows_fn_b(-omega), omega, hermitian_spectra)
    second = _pair(rows_fn_b(-omega), rows_fn_a(omega), -omega, hermitian_spectra)
    return 0.5 * (first + second)


def _hermitian_spectra(mech, heating):
    n_eff = heating.n_th_effective

    def s_thermal(omega):
        return np.full(np.shape(omega), n_eff + 0.5)

    def s_xi(omega):
        return heating.tin_psd_at(np.abs(np.asarray(omega, dtype=float)))

    return {"P": s_thermal, "xi": s_xi}


# ---------------------------------------------------------------------------
# spectra of the probe and cooling outputs

def probe_output_psd(grid, mech: MechanicalMode, cooling: OpticalMode,
                     probe: OpticalMode, heating: HeatingBudget | None = None,
                     eta=1.0) -> SpectrumGrid:
    """Symmetrized PSD of the probe output field, shot-noise units.

    S(w) = 2 eta g_p^2 kappa_p1 |chi_p(-w)|^2 ( S_QQ(w) + Im chi'_m(w) ) + 1/2

    The Im chi'_m term is the imprecision-backaction correlation of the probe
    field; it is what makes the two motional sidebands unequal.  The formula
    agrees with the full noise-network evaluation to machine precision.
    """
    from .cooling import _sqq_values
    if heating is None:
        heating = no_heating(mech)
    omega = as_omega(grid)
    vals = probe_output_psd_values(omega, mech, cooling, probe, heating, eta)
    return SpectrumGrid(omega, vals)


def probe_output_psd_values(omega, mech, cooling, probe, heating=None, eta=1.0):
    from .cooling import _sqq_values
    if heating is None:
        heating = no_heating(mech)
    omega = np.asarray(omega, dtype=float)
    sqq = _sqq_values(omega, mech, cooling, probe, heating)
    imag_chi = np.imag(modified_mechanical_susceptibility(omega, mech, cooling, probe))
    pref = 2.0 * eta * probe.g ** 2 * probe.kappa_1 * np.abs(cavity_susceptibility(-omega, probe)) ** 2
    return pref * (sqq + imag_chi) + 0.5


def cooling_output_psd(grid, mech: MechanicalMode, cooling: OpticalMode,
                       heating: HeatingBudget, probe: OpticalMode | None = None,
                       eta=1.0, tin_cross_sign=+1.0) -> SpectrumGrid:
    """Amplitude-quadrature PSD of the cooling-beam output (direct detection).

    Contains the directly transmitted intermodulation noise, the mechanical
    response it drives, and their cross term.  The cross term distorts the
    line shape, so a plain Lorentzian fit of this spectrum overestimates the
    optomechanical damping rate; ``tin_cross_sign=-1`` conjugates the
    intermodulation field against the force it exerts and reverses the
    asymmetric part of the distortion (diagnostic knob).
    """
    omega = as_omega(grid)
    rows = lambda w: _output_rows(w, mech, cooling, probe, heating, "c", tin_cross_sign)
    x_rows = _x_theta(rows, 0.0)
    spectra = _hermitian_spectra(mech, heating)
    vals = np.real(_sym_spectrum(x_rows, x_rows, omega, spectra))
    return SpectrumGrid(omega, eta * vals + (1.0 - eta) * 0.5)


def homodyne_psd(grid, chain: DetectionChain, mech: MechanicalMode,
                 cooling: OpticalMode, probe: OpticalMode,
                 heating: HeatingBudget | None = None,
                 tin_quadrature_psd=None) -> SpectrumGrid:
    """PSD of a single quadrature measurement of the probe output.

    S = eta * S_theta(field) + (1 - eta)/2, plus the classical
    intermodulation projection onto the measured quadrature when the chain
    has not nulled it (supply its PSD via ``tin_quadrature_psd``).
    """
    if heating is None:
        heating = no_heating(mech)
    omega = as_omega(grid)
    rows = lambda w: _output_rows(w, mech, cooling, probe, heating, "p")
    x_rows = _x_theta(rows, chain.theta)
    spectra = _hermitian_spectra(mech, heating)
    vals = np.real(_sym_spectrum(x_rows, x_rows, omega, spectra))
    out = chain.eta * vals + (1.0 - chain.eta) * 0.5
    if not chain.tin_cancelled and tin_quadrature_psd is not None:
        if isinstance(tin_quadrature_psd, SpectrumGrid):
            add = np.interp(omega, tin_quadrature_psd.omega, tin_quadrature_psd.values,
                            left=0.0, right=0.0)
        else:
            add = np.full_like(omega, float(tin_quadrature_psd))
        out = out + chain.eta * add
    return SpectrumGrid(omega, out)


def dual_homodyne_forward(grid, chains, mech: MechanicalMode,
                          cooling: OpticalMode, probe: OpticalMode,
                          heating: HeatingBudget | None = None):
    """Forward model of the dual-homodyne measurement: the probe output is
    split evenly, each arm measures one quadrature.

    Returns (auto1, auto2, cross12) as SpectrumGrids; the cross spectrum
    is complex.  Arm 1 sees (a + v)/sqrt2 and arm 2 sees (a - v)/sqrt2
    with v the splitter vacuum, so the ports share anticorrelated noise.
    """
    if heating is None:
        heating = no_heating(mech)
    omega = as_omega(grid)
    ch1, ch2 = chains
    a_rows = lambda w: _output_rows(w, mech, cooling, probe, heating, "p")
    spectra = _hermitian_spectra(mech, heating)

    def meas(chain, sign, uname):
        return _combine(
            (np.sqrt(chain.eta / 2.0), _x_theta(a_rows, chain.theta)),
            (sign * np.sqrt(chain.eta / 2.0), _x_theta(_vacuum_rows("v"), chain.theta)),
            (np.sqrt(1.0 - chain.eta), _x_theta(_vacuum_rows(uname), 0.0)),
        )

    m1 = meas(ch1, +1.0, "u1")
    m2 = meas(ch2, -1.0, "u2")
    s11 = np.real(_sym_spectrum(m1, m1, omega, spectra))
    s22 = np.real(_sym_spectrum(m2, m2, omega, spectra))
    s12 = _sym_spectrum(m1, m2, omega, spectra)
    return (SpectrumGrid(omega, s11), SpectrumGrid(omega, s22), SpectrumGrid(omega, s12))


def dual_homodyne_reconstruct(psd_1: SpectrumGrid, psd_2: SpectrumGrid,
                              cross_psd_12: SpectrumGrid, chains) -> SpectrumGrid:
    """Reconstruct the heterodyne-equivalent field PSD from two homodyne
    records.

    Inverts the linear quadrature map bin by bin using the two auto spectra
    and the complex cross spectrum, subtracting the known vacuum penalties
    of the even split and the detection efficiencies.  The result is the
    symmetrized field PSD at unit efficiency; for vacuum input it is flat
    at 1/2.
    """
    ch1, ch2 = chains
    dth = ch1.theta - ch2.theta
    if abs(np.sin(dth)) < 1e-3:
        raise IllConditionedReconstruction(
            f"|sin(theta1 - theta2)| = {abs(np.sin(dth)):.2e} < 1e-3; quadrature map not invertible")
    omega = psd_1.omega
    if psd_2.omega.shape != omega.shape or cross_psd_12.omega.shape != omega.shape:
        raise ValueError("all three spectra must share one grid")
    st11 = (psd_1.values - (1.0 - ch1.eta / 2.0) / 2.0) * 2.0 / ch1.eta
    st22 = (psd_2.values - (1.0 - ch2.eta / 2.0) / 2.0) * 2.0 / ch2.eta
    st12 = 2.0 * cross_psd_12.values / np.sqrt(ch1.eta * ch2.eta) + np.cos(dth) / 2.0

    l0 = np.array([[np.cos(ch1.theta), np.sin(ch1.theta)],
                   [np.cos(ch2.theta), np.sin(ch2.theta)]])
    li = np.linalg.inv(l0)
    # S_field = L^-1 M L^-T applied bin-wise to M = [[st11, st12], [st12*, st22]]
    sxx = (li[0, 0] * (li[0, 0] * st11 + li[0, 1] * np.conj(st12))
           + li[0, 1] * (li[0, 0] * st12 + li[0, 1] * st22))
    syy = (li[1, 0] * (li[1, 0] * st11 + li[1, 1] * np.conj(st12))
           + li[1, 1] * (li[1, 0] * st12 + li[1, 1] * st22))
    sxy = (li[0, 0] * (li[1, 0] * st11 + li[1, 1] * st12)
           + li[0, 1] * (li[1, 0] * np.conj(st12) + li[1, 1] * st22))
    vals = 0.5 * (np.real(sxx) + np.real(syy)) - np.imag(sxy)
    return SpectrumGrid(omega, vals)


# ---------------------------------------------------------------------------
# sideband thermometry

def asymmetry_factor(omega_m_shifted, probe: OpticalMode):
    """Cavity-induced sideband asymmetry s = |chi_p(-w)|^2 / |chi_p(w)|^2
    at the shifted mechanical frequency."""
    num = np.abs(cavity_susceptibility(-np.asarray(omega_m_shifted, dtype=float), probe)) ** 2
    den = np.abs(cavity_susceptibility(np.asarray(omega_m_shifted, dtype=float), probe)) ** 2
    out = num / den
    return float(out) if np.ndim(omega_m_shifted) == 0 else out


# orientation used everywhere: the positive-frequency sideband of the
# reconstructed output PSD carries (n + 1)
SIDEBAND_CONVENTION = "positive_sideband_carries_n_plus_1"


@dataclass(frozen=True)
class SidebandPair:
    """Integrated sideband weights above the shot floor."""

    omega_m_shifted: float
    area_pos: float
    area_neg: float
    ratio: float
    floor: float
    convention: str = SIDEBAND_CONVENTION
    flags: tuple = ()


@dataclass(frozen=True)
class OccupancyEstimate:
    n_eff: float
    ratio_over_s: float
    convention: str = SIDEBAND_CONVENTION
    flags: tuple = ()


def sideband_ratio(psd, omega_m_shifted, half_window, masks=(),
                   floor=None, nodes=4096, line_halfwidth=None) -> SidebandPair:
    """Integrate the shot-subtracted PSD around +/- the mechanical frequency.

    ``psd`` may be a SpectrumGrid (windowed trapezoid integration, masked
    intervals bridged by linear interpolation, shot floor estimated as the
    median of the flanking quiet bands unless given) or a callable of omega
    (full half-line quadrature against the exact floor, the noise-free
    analytic path).
    """
    flags = []
    om = float(omega_m_shifted)
    if callable(psd) and not isinstance(psd, SpectrumGrid):
        fl = 0.5 if floor is None else float(floor)
        hw = line_halfwidth if line_halfwidth is not None else half_window / 20.0
        area_pos = halfline_integral(lambda w: psd(w) - fl, om, hw, +1, nodes)
        area_neg = halfline_integral(lambda w: psd(w) - fl, -om, hw, -1, nodes)
    else:
        fl, area_pos, area_neg = _grid_sideband_areas(psd, om, half_window, masks, floor)
    if area_neg <= 0 or area_pos <= 0:
        flags.append("negative_net_area")
        ratio = np.nan
    else:
        ratio = area_pos / area_neg
    return SidebandPair(omega_m_shifted=om, area_pos=float(area_pos),
                        area_neg=float(area_neg), ratio=float(ratio),
                        floor=float(fl), flags=tuple(flags))


def _grid_sideband_areas(psd: SpectrumGrid, om, half_window, masks, floor):
    omega, vals = psd.omega, psd.values.astype(float).copy()
    if om - half_window < omega[0] or om + half_window > omega[-1]:
        raise ValueError("grid does not cover the analysis windows")
    # bridge masked intervals so spurious tones do not bias areas or floor
    for lo, hi in masks:
        inside = (np.abs(omega) >= lo) & (np.abs(omega) <= hi) if lo >= 0 else \
                 (omega >= lo) & (omega <= hi)
        if np.any(inside):
            vals[inside] = np.interp(omega[inside], omega[~inside], vals[~inside])
    if floor is None:
        flank = np.zeros_like(omega, dtype=bool)
        for c in (om, -om):
            flank |= (np.abs(omega - c) > half_window) & (np.abs(omega - c) <= 2 * half_window)
        if not np.any(flank):
            raise ValueError("no quiet flanking bins available for the floor estimate")
        floor = float(np.median(vals[flank]))
    areas = []
    for c in (om, -om):
        sel = np.abs(omega - c) <= half_window
        areas.append(np.trapz(vals[sel] - floor, omega[sel]))
    return floor, areas[0], areas[1]


def occupancy_from_asymmetry(ratio, s) -> OccupancyEstimate:
    """Phonon occupancy from the measured sideband ratio R and the calibrated
    cavity asymmetry s.

    Under the recorded orientation convention R/s = (n + 1)/n, so
    n = 1 / (R/s - 1).  R = s flags the classical (infinite-occupancy)
    limit; R/s < 1 flags a sideband-orientation mismatch and the magnitude
    |R/s - 1| is used.
    """
    if not (ratio > 0 and s > 0):
        raise ValueError("R and s must be positive")
    x = ratio / s
    flags = []
    if x == 1.0:
        return OccupancyEstimate(n_eff=np.inf, ratio_over_s=x,
                                 flags=("infinite_occupancy",))
    if x < 1.0:
        flags.append("orientation_mismatch")
    n = 1.0 / abs(x - 1.0)
    return OccupancyEstimate(n_eff=float(n), ratio_over_s=float(x), flags=tuple(flags))
