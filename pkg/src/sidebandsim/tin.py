"""Thermal intermodulation noise of a detuned cavity.

Cavity frequency fluctuations Delta(t) mix through the nonlinear cavity
transduction and show up as excess intensity noise.  This module carries
the frequency-noise model, the second-order intensity spectrum with the
full cavity response, the fast-cavity (memoryless) transduction
coefficients, and detuning sweeps in shot-noise units.

The second-order spectrum is the kernel-weighted self-convolution

    S2(w) = (1/2pi) int S_dd(w-w') S_dd(w')
            [ G(w,w') G(-w,-w') + G(w,w') G(-w,w'-w) ] dw'

with the three-term kernel G built from the cavity susceptibility.  The
overall 1/(2pi) is fixed by requiring agreement with the direct
time-domain quadratic transduction of Gaussian frequency noise in the
fast-cavity limit.  Output values are the power spectral density of the
relative intracavity intensity fluctuation (units 1/(rad/s)); multiply
by kappa_1 * n_photons to express them as a fraction of detection shot
noise at the same intracavity power.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .spectra import TWO_PI, SpectrumGrid
from .system import OpticalMode, cavity_susceptibility, magic_detuning


@dataclass(frozen=True)
class FrequencyNoiseSpectrum:
    """Two-sided PSD of cavity frequency fluctuations, zero beyond band_limit.

    ``grid.values`` has units rad^2/s^2 per (rad/s), i.e. rad/s.
    """

    grid: SpectrumGrid
    band_limit: float

    def __post_init__(self):
        if self.band_limit <= 0:
            raise ValueError("band_limit must be > 0")
        v = self.grid.values
        if np.iscomplexobj(v):
            raise ValueError("frequency-noise PSD must be real")
        if np.any(v < 0):
            raise ValueError("frequency-noise PSD must be nonnegative")
        outside = np.abs(self.grid.omega) > self.band_limit * (1 + 1e-9)
        if np.any(v[outside] != 0.0):
            raise ValueError("PSD must vanish beyond band_limit")

    @classmethod
    def flat(cls, level, band_limit, n=2049):
        """Constant two-sided PSD up to |w| = band_limit."""
        omega = np.linspace(-band_limit, band_limit, int(n))
        return cls(SpectrumGrid(omega, np.full(int(n), float(level))), float(band_limit))

    def variance(self):
        """<Delta^2> in rad^2/s^2."""
        return self.grid.integrate()

    def scaled(self, factor) -> "FrequencyNoiseSpectrum":
        return FrequencyNoiseSpectrum(self.grid.with_values(self.grid.values * float(factor)),
                                      self.band_limit)


def kernel_G(omega, omega_prime, mode: OpticalMode):
    """Second-order intermodulation kernel, arguments (output w, inner w').

    Three-term product of detuned cavity factors,

        G = conj(chi(w'-w)) chi(w') - chi(w) chi(w') - conj(chi(-w)) conj(chi(-w'))

    following the perturbative expansion of the cavity drive.  This form is
    the one consistent with that expansion; it satisfies
    conj(G(-w,-w')) = G(w, w-w') after slot symmetrization, which makes the
    second-order spectrum real and nonnegative.  In the fast-cavity limit
    G(0,0) = (3 Delta^2 - (kappa/2)^2) / (Delta^2 + (kappa/2)^2)^2.
    """
    w = np.asarray(omega, dtype=float)
    wp = np.asarray(omega_prime, dtype=float)
    chi = lambda x: cavity_susceptibility(x, mode)
    return (np.conj(chi(wp - w)) * chi(wp)
            - chi(w) * chi(wp)
            - np.conj(chi(-w)) * np.conj(chi(-wp)))


def fast_cavity_coefficients(mode: OpticalMode):
    """Memoryless transduction coefficients (c1, c2, c3) of the relative
    intracavity intensity in powers of the frequency excursion:

        I(t)/<I> - 1 = c1 d(t) + c2 d(t)^2 + c3 d(t)^3 + ...

    c2 vanishes at the magic detuning; c3 does not.
    """
    d = mode.detuning
    h2 = d ** 2 + (mode.kappa / 2.0) ** 2
    c1 = -2.0 * d / h2
    c2 = (3.0 * d ** 2 - (mode.kappa / 2.0) ** 2) / h2 ** 2
    c3 = tin_third_order_coeff(mode, 0.0)
    return c1, c2, c3


def tin_third_order_coeff(mode: OpticalMode, omega):
    """Coefficient of the cubic term of the intensity transduction,

        2 Re{ i |chi|^2 chi - i chi^3 }

    evaluated literally at the given frequency (fast-cavity regime intended).
    The overall factor 2 comes from collecting the conjugate pairs of the
    third-order expansion terms.
    """
    chi = cavity_susceptibility(omega, mode)
    val = 2.0 * np.real(1j * np.abs(chi) ** 2 * chi - 1j * chi ** 3)
    return float(val) if np.ndim(omega) == 0 else val


def _kernel_factors(mode):
    """Separable decomposition G = sum_k a_k(w) b_k(w') c_k(w - w')."""
    chi = lambda x: cavity_susceptibility(x, mode)
    one = lambda x: np.ones_like(np.asarray(x, dtype=float), dtype=complex)
    a = [lambda x: one(x), lambda x: -chi(x), lambda x: -np.conj(chi(-x))]
    b = [lambda y: chi(y), lambda y: chi(y), lambda y: np.conj(chi(-y))]
    c = [lambda u: np.conj(chi(-u)), one, one]
    return a, b, c


def tin_second_order_psd(noise: FrequencyNoiseSpectrum, mode: OpticalMode,
                         out_grid=None, method="fft") -> SpectrumGrid:
    """Second-order intermodulation PSD of the relative intracavity intensity.

    Parameters
    ----------
    noise : FrequencyNoiseSpectrum
        Frequency-noise PSD on a uniform two-sided grid.
    mode : OpticalMode
        The transducing cavity mode (mean detuning, linewidth).
    out_grid : ndarray, optional
        Output frequencies; defaults to the full convolution lattice, whose
        support extends to twice the noise band.  Off-lattice requests are
        met by linear resampling with a warning.
    method : {"fft", "quad"}
        FFT-accelerated convolution or the direct double-sum quadrature
        oracle.  Both evaluate the same trapezoid-on-lattice sum.
    """
    omega_in = noise.grid.omega
    s_in = noise.grid.values
    d = noise.grid.domega
    n = omega_in.size
    lattice = omega_in[0] * 2 + d * np.arange(2 * n - 1)

    if method == "fft":
        vals = _second_order_fft(omega_in, s_in, d, lattice, mode)
    elif method == "quad":
        vals = _second_order_quad(omega_in, s_in, d, lattice, mode)
    else:
        raise ValueError(f"unknown method {method!r}")

    neg = vals < 0
    if np.any(neg):
        worst = -vals[neg].min()
        scale = max(vals.max(), 1e-300)
        if worst > 1e-8 * scale:
            warnings.warn(f"clipped negative spectral values down to {-worst:.3e} "
                          f"({worst/scale:.2e} of peak); check grid resolution", stacklevel=2)
        vals = np.clip(vals, 0.0, None)

    result = SpectrumGrid(lattice, vals)
    if out_grid is not None:
        out_grid = np.asarray(out_grid, dtype=float)
        if out_grid.size == lattice.size and np.allclose(out_grid, lattice, rtol=0, atol=1e-9 * d):
            return result
        warnings.warn("output grid is not the native convolution lattice; resampling", stacklevel=2)
        return result.resample(out_grid, warn=False)
    return result


def _second_order_fft(omega_in, s_in, d, lattice, mode):
    a, b, c = _kernel_factors(mode)
    b_pos = [f(omega_in) for f in b]
    b_neg = [f(-omega_in) for f in b]
    c_pos = [f(omega_in) for f in c]
    c_neg = [f(-omega_in) for f in c]
    a_pos = [f(lattice) for f in a]
    a_neg = [f(-lattice) for f in a]
    total = np.zeros(lattice.size, dtype=complex)
    for k in range(3):
        for l in range(3):
            # pairing G(w,w') G(-w,-w')
            f1 = s_in * c_pos[k] * c_neg[l]
            h1 = s_in * b_pos[k] * b_neg[l]
            conv1 = fftconvolve(f1, h1, mode="full")
            # pairing G(w,w') G(-w, w'-w)
            f2 = s_in * c_pos[k] * b_neg[l]
            h2 = s_in * b_pos[k] * c_neg[l]
            conv2 = fftconvolve(f2, h2, mode="full")
            total += a_pos[k] * a_neg[l] * (conv1 + conv2)
    return np.real(total) * d / TWO_PI


def _second_order_quad(omega_in, s_in, d, lattice, mode):
    vals = np.empty(lattice.size)
    n = omega_in.size
    for i, w in enumerate(lattice):
        # S(w - w_j) by exact lattice lookup: w - w_j lands on the input grid
        idx = i - np.arange(n)
        inside = (idx >= 0) & (idx < n)
        s_shift = np.where(inside, s_in[np.clip(idx, 0, n - 1)], 0.0)
        g1 = kernel_G(w, omega_in, mode)
        bracket = g1 * (kernel_G(-w, -omega_in, mode) + kernel_G(-w, omega_in - w, mode))
        vals[i] = np.real(np.sum(s_shift * s_in * bracket)) * d / TWO_PI
    return vals


@dataclass(frozen=True)
class TinSpectrumResult:
    """Second-order spectrum plus scalar summaries."""

    second_order: SpectrumGrid
    third_order_coeff: float
    shot_noise_ratio: float

    def __post_init__(self):
        if np.any(self.second_order.values < 0):
            raise ValueError("second-order spectrum must be nonnegative")
        if self.shot_noise_ratio < 0:
            raise ValueError("shot_noise_ratio must be >= 0")


def shot_ratio_spectrum(rel_intensity_psd: SpectrumGrid, n_photons, kappa_1) -> SpectrumGrid:
    """Express a relative-intensity PSD as a fraction of detection shot noise
    at the same intracavity photon number."""
    return rel_intensity_psd.with_values(rel_intensity_psd.values * float(n_photons) * float(kappa_1))


def tin_spectrum(noise: FrequencyNoiseSpectrum, mode: OpticalMode, band,
                 n_photons, method="fft") -> TinSpectrumResult:
    """Second-order spectrum with its band-averaged shot-noise ratio."""
    s2 = tin_second_order_psd(noise, mode, method=method)
    ratio = band_average_ratio(s2, band, n_photons, mode)
    return TinSpectrumResult(second_order=s2,
                             third_order_coeff=tin_third_order_coeff(mode, 0.0),
                             shot_noise_ratio=ratio)


def band_average_ratio(rel_psd: SpectrumGrid, band, n_photons, mode: OpticalMode):
    lo, hi = band
    if not hi > lo:
        raise ValueError("band must satisfy hi > lo")
    ratio_spec = shot_ratio_spectrum(rel_psd, n_photons, mode.kappa_1)
    return float(ratio_spec.band_average(lo, hi))


def tin_detuning_sweep(noise: FrequencyNoiseSpectrum, mode: OpticalMode,
                       detunings, band, n_photons, method="fft"):
    """Band-averaged shot-noise ratio of the second-order spectrum for each
    detuning.

    The intracavity photon number is held fixed across the sweep, so the
    curve isolates the detuning dependence of the transduction; rescale
    externally for a fixed-input-power comparison.
    """
    detunings = np.asarray(detunings, dtype=float)
    ratios = np.empty_like(detunings)
    for i, delta in enumerate(detunings):
        m = dataclasses.replace(mode, detuning=float(delta))
        s2 = tin_second_order_psd(noise, m, method=method)
        ratios[i] = band_average_ratio(s2, band, n_photons, m)
    return detunings, ratios


def calibrate_noise_amplitude(noise: FrequencyNoiseSpectrum, mode: OpticalMode,
                              band, n_photons, target_ratio,
                              method="fft") -> FrequencyNoiseSpectrum:
    """Scale the frequency-noise PSD so the band-averaged second-order TIN
    hits ``target_ratio`` of shot noise at this mode's detuning.

    The second-order spectrum is quadratic in the PSD amplitude, so the
    scaling is a square root.
    """
    s2 = tin_second_order_psd(noise, mode, method=method)
    r0 = band_average_ratio(s2, band, n_photons, mode)
    if r0 <= 0:
        raise ValueError("reference configuration produces zero TIN; cannot calibrate")
    return noise.scaled(np.sqrt(target_ratio / r0))


# ---------------------------------------------------------------------------
# Gaussian-noise spectra of the memoryless transduction, used as analytic
# oracles for the time-domain synthesizer.

def _self_convolve(noise: FrequencyNoiseSpectrum, times):
    s = noise.grid.values
    d = noise.grid.domega
    out = s.copy()
    for _ in range(times - 1):
        out = fftconvolve(out, s, mode="full") * d / TWO_PI
    n = noise.grid.omega.size
    lattice = noise.grid.omega[0] * times + d * np.arange(times * (n - 1) + 1)
    return SpectrumGrid(lattice, out)


def fast_transduction_psd(noise: FrequencyNoiseSpectrum, mode: OpticalMode,
                          order=3, include_linear=False) -> SpectrumGrid:
    """PSD of the memoryless polynomial transduction of Gaussian frequency
    noise, by Wick contraction:

        S[c2 (d^2 - <d^2>)] = 2 c2^2 (S*S)/2pi
        S[c3 d^3]           = 9 c3^2 sigma^4 S + 6 c3^2 (S*S*S)/(2pi)^2
        cross(d, d^3)       = 6 c1 c3 sigma^2 S

    The linear term (and its cross term with the cubic) is included only on
    request; the quadratic term is uncorrelated with the odd orders.
    """
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    c1, c2, c3 = fast_cavity_coefficients(mode)
    sigma2 = noise.variance()
    conv2 = _self_convolve(noise, 2)
    lattice = conv2.omega if order < 3 else _self_convolve(noise, 3).omega
    total = np.zeros(lattice.size)

    def add(grid, scale):
        nonlocal total
        total = total + scale * np.interp(lattice, grid.omega, grid.values, left=0.0, right=0.0)

    lin_coeff = 0.0
    if include_linear:
        lin_coeff += c1 ** 2
    if order >= 3:
        lin_coeff += 9.0 * c3 ** 2 * sigma2 ** 2
        if include_linear:
            lin_coeff += 6.0 * c1 * c3 * sigma2
    if lin_coeff:
        add(noise.grid, lin_coeff)
    if order >= 2:
        add(conv2, 2.0 * c2 ** 2)
    if order >= 3:
        add(_self_convolve(noise, 3), 6.0 * c3 ** 2)
    return SpectrumGrid(lattice, total)
