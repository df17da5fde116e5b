"""Nonlinear least-squares extraction of spectral parameters.

Lorentzian-plus-background line fits with interval masking, calibration of
the cavity-induced sideband asymmetry from an ensemble of high-occupancy
modes, and inter-detector gain/delay calibration from coherent tones.

Weighting: when the spectrum comes from a Welch estimate with M segments,
residuals are weighted by the per-bin standard deviation S/sqrt(M)
(inverse-variance weighting) and the reported parameter errors treat those
weights as absolute 1-sigma uncertainties.  Without a segment count the
weights are uniform and the covariance is scaled by the reduced chi-square.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .spectra import TWO_PI, SpectrumGrid
from .system import OpticalMode
from .synth import TimeSeries, welch_csd, welch_psd, welch_segment_count


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class LorentzianFit:
    """Lorentzian + flat background line parameters, angular units.

    ``area`` is the integral of the line above background with plain
    d(omega) measure.  Standard errors are 1-sigma; ``converged`` is False
    for fits stopped by the iteration bound or with a nonpositive width.
    """

    center: float
    fwhm: float
    area: float
    background: float
    center_err: float
    fwhm_err: float
    area_err: float
    background_err: float
    converged: bool
    reduced_chisq: float
    window: tuple
    mask: tuple = ()

    @property
    def center_hz(self):
        return self.center / TWO_PI

    @property
    def fwhm_hz(self):
        return self.fwhm / TWO_PI

    def as_dict(self):
        return {
            "center_hz": self.center / TWO_PI, "fwhm_hz": self.fwhm / TWO_PI,
            "area": self.area, "background": self.background,
            "center_err_hz": self.center_err / TWO_PI,
            "fwhm_err_hz": self.fwhm_err / TWO_PI,
            "area_err": self.area_err, "background_err": self.background_err,
            "converged": self.converged, "reduced_chisq": self.reduced_chisq,
        }


def lorentzian(omega, center, fwhm, area, background):
    """Area-normalized Lorentzian line on a flat background."""
    x = 2.0 * (np.asarray(omega, dtype=float) - center) / fwhm
    return background + (2.0 * area / (np.pi * fwhm)) / (1.0 + x * x)


def _lorentzian_jacobian(omega, center, fwhm, area):
    x = 2.0 * (omega - center) / fwhm
    denom = 1.0 + x * x
    peak = 2.0 * area / (np.pi * fwhm)
    d_center = peak * (2.0 * x / denom ** 2) * (2.0 / fwhm)
    d_fwhm = peak * (-1.0 / fwhm / denom + (x * x) * 2.0 / (fwhm * denom ** 2))
    d_area = (2.0 / (np.pi * fwhm)) / denom
    d_bg = np.ones_like(omega)
    return np.column_stack([d_center, d_fwhm, d_area, d_bg])


def fit_lorentzian(psd: SpectrumGrid, window=None, mask=(),
                   n_segments=None, sigma=None, max_iter=200) -> LorentzianFit:
    """Damped least-squares fit of one resonance in a PSD.

    Parameters
    ----------
    psd : SpectrumGrid
    window : (lo, hi), optional
        Angular-frequency analysis window containing one dominant peak.
    mask : sequence of (lo, hi)
        Intervals excluded from the fit (spurious tones).
    n_segments : int, optional
        Welch segment count; sets inverse-variance weights S/sqrt(M).
    sigma : ndarray, optional
        Explicit absolute per-bin standard deviations (overrides n_segments).

    Initialization is the peak bin and a half-maximum crossing width;
    convergence is declared when the relative step falls below 1e-10 within
    the iteration bound, otherwise the fit is returned flagged.
    """
    omega, values = psd.omega, psd.values.astype(float)
    sel = np.ones_like(omega, dtype=bool)
    if window is not None:
        lo, hi = window
        sel &= (omega >= lo) & (omega <= hi)
    for lo, hi in mask:
        sel &= ~((omega >= lo) & (omega <= hi))
    if not np.any(sel):
        raise ValueError("all bins in the window are masked")
    w = omega[sel]
    y = values[sel]
    if w.size < 6:
        raise ValueError("too few unmasked bins to fit four parameters")

    bg0 = float(np.median(np.concatenate([y[: max(3, y.size // 10)],
                                          y[-max(3, y.size // 10):]])))
    peak_idx = int(np.argmax(y - bg0))
    c0 = float(w[peak_idx])
    half = bg0 + (y[peak_idx] - bg0) / 2.0
    above = y > half
    fw0 = max(float(np.count_nonzero(above)) * (w[1] - w[0]), 2.0 * (w[1] - w[0]))
    a0 = max(float(np.trapz(y - bg0, w)), 1e-12 * abs(bg0 + 1e-300) * fw0)

    if sigma is not None:
        sig = np.asarray(sigma, dtype=float)[sel] if np.size(sigma) > 1 else \
            np.full_like(y, float(np.ravel([sigma])[0]))
        absolute = True
    elif n_segments is not None:
        sig = np.abs(y) / np.sqrt(float(n_segments))
        sig = np.where(sig > 0, sig, np.max(sig) * 1e-6 + 1e-300)
        absolute = True
    else:
        sig = np.ones_like(y)
        absolute = False

    def resid(p):
        return (lorentzian(w, *p) - y) / sig

    def jac(p):
        return _lorentzian_jacobian(w, p[0], p[1], p[2]) / sig[:, None]

    res = least_squares(resid, x0=[c0, fw0, a0, bg0], jac=jac, method="lm",
                        xtol=1e-10, ftol=1e-12, gtol=1e-12,
                        max_nfev=max_iter * 5)
    center, fwhm, area, bg = res.x
    converged = bool(res.status in (1, 2, 3, 4)) and fwhm > 0
    fwhm = abs(fwhm)

    j = jac(res.x)
    dof = max(y.size - 4, 1)
    chi2 = float(np.sum(res.fun ** 2))
    try:
        cov = np.linalg.inv(j.T @ j)
    except np.linalg.LinAlgError:
        cov = np.full((4, 4), np.nan)
        converged = False
    if not absolute:
        cov = cov * chi2 / dof
    errs = np.sqrt(np.abs(np.diag(cov)))
    return LorentzianFit(center=float(center), fwhm=float(fwhm), area=float(area),
                         background=float(bg),
                         center_err=float(errs[0]), fwhm_err=float(errs[1]),
                         area_err=float(errs[2]), background_err=float(errs[3]),
                         converged=converged, reduced_chisq=chi2 / dof,
                         window=tuple(window) if window is not None else (float(omega[0]), float(omega[-1])),
                         mask=tuple(tuple(m) for m in mask))


# ---------------------------------------------------------------------------
# cavity-asymmetry calibration

@dataclass(frozen=True)
class AsymmetryCalibration:
    """Fitted probe-cavity parameters from sideband ratios of hot modes."""

    kappa: float
    detuning: float
    kappa_err: float
    detuning_err: float
    residual_rms: float
    ill_conditioned: bool

    def curve(self, omega):
        return _s_model(np.asarray(omega, dtype=float), self.kappa, self.detuning)


def _s_model(omega, kappa, detuning):
    return (((kappa / 2.0) ** 2 + (detuning + omega) ** 2)
            / ((kappa / 2.0) ** 2 + (detuning - omega) ** 2))


def calibrate_cavity_asymmetry(omegas, ratios, probe_guess: OpticalMode,
                               sigma=None) -> AsymmetryCalibration:
    """Least-squares fit of the cavity susceptibility asymmetry
    s(w; kappa, Delta) to measured sideband ratios of high-occupancy modes.

    Requires at least three distinct mode frequencies.  Standard errors
    treat ``sigma`` (per-point ratio uncertainty, scalar or array) as
    absolute when supplied.
    """
    omegas = np.asarray(omegas, dtype=float)
    ratios = np.asarray(ratios, dtype=float)
    if omegas.shape != ratios.shape or omegas.ndim != 1:
        raise ValueError("omegas and ratios must be matching 1-D arrays")
    if np.unique(np.round(omegas, 6)).size < 3:
        raise ValueError("need at least three distinct mode frequencies")
    if sigma is None:
        sig = np.ones_like(ratios)
        absolute = False
    else:
        sig = np.broadcast_to(np.asarray(sigma, dtype=float), ratios.shape).copy()
        absolute = True

    def resid(p):
        return (_s_model(omegas, p[0], p[1]) - ratios) / sig

    res = least_squares(resid, x0=[probe_guess.kappa, probe_guess.detuning],
                        method="lm", xtol=1e-12, max_nfev=2000)
    j = res.jac
    _, sv, _ = np.linalg.svd(j, full_matrices=False)
    ill = bool(sv[-1] < 1e-10 * sv[0])
    try:
        cov = np.linalg.inv(j.T @ j)
    except np.linalg.LinAlgError:
        cov = np.full((2, 2), np.nan)
        ill = True
    dof = max(omegas.size - 2, 1)
    chi2 = float(np.sum(res.fun ** 2))
    if not absolute:
        cov = cov * chi2 / dof
    errs = np.sqrt(np.abs(np.diag(cov)))
    return AsymmetryCalibration(kappa=float(abs(res.x[0])), detuning=float(res.x[1]),
                                kappa_err=float(errs[0]), detuning_err=float(errs[1]),
                                residual_rms=float(np.sqrt(chi2 / dof)),
                                ill_conditioned=ill)


# ---------------------------------------------------------------------------
# inter-detector calibration

@dataclass(frozen=True)
class CalibrationResult:
    """Gain ratio and digitizer-path delay between two detectors."""

    gain_ratio: float
    phase_delay: float          # seconds, positive = detector 2 lags
    residual: float             # rms phase residual of the linear fit (rad)
    phase_intercept: float = 0.0

    @property
    def delay_samples(self):
        return None  # needs fs; see delay_in_samples


def delay_in_samples(result: CalibrationResult, fs):
    return result.phase_delay * fs


def detector_cross_calibration(stream1: TimeSeries, stream2: TimeSeries,
                               tone_bands, segment_length=2 ** 14,
                               min_coherence=0.5) -> CalibrationResult:
    """Fit the relative gain and the linear phase (pure delay) between two
    simultaneously digitized records, using coherent mechanical peaks in the
    given bands (angular-frequency intervals, positive side).

    The gain comes from floor-subtracted auto-spectral ratios, the delay
    from a weighted straight-line fit of the cross-spectrum phase across all
    coherent bins.  Raises CalibrationError when no band is coherent.
    """
    if stream1.fs != stream2.fs or stream1.n != stream2.n:
        raise ValueError("records must share sampling rate and length")
    if not tone_bands:
        raise ValueError("at least one tone band is required")
    s11 = welch_psd(stream1, segment_length)
    s22 = welch_psd(stream2, segment_length)
    s12 = welch_csd(stream1, stream2, segment_length)
    m = welch_segment_count(stream1.n, segment_length)
    omega = s11.omega

    gains, gain_wts = [], []
    phase_bins, phase_wts, phase_omegas = [], [], []
    any_coherent = False
    for lo, hi in tone_bands:
        band = (omega >= lo) & (omega <= hi)
        if not np.any(band):
            continue
        flank = ((omega >= lo - (hi - lo)) & (omega < lo)) | \
                ((omega > hi) & (omega <= hi + (hi - lo)))
        f1 = np.median(s11.values[flank]) if np.any(flank) else 0.0
        f2 = np.median(s22.values[flank]) if np.any(flank) else 0.0
        coh = np.abs(s12.values[band]) ** 2 / (s11.values[band] * s22.values[band])
        good = coh > min_coherence
        if not np.any(good):
            continue
        any_coherent = True
        p1 = np.clip(s11.values[band][good] - f1, 0.0, None)
        p2 = np.clip(s22.values[band][good] - f2, 0.0, None)
        wt = np.abs(s12.values[band][good])
        ok = (p1 > 0) & (p2 > 0)
        if np.any(ok):
            gains.append(np.sum(np.sqrt(p2[ok] / p1[ok]) * wt[ok]) / np.sum(wt[ok]))
            gain_wts.append(np.sum(wt[ok]))
        ph = np.unwrap(np.angle(s12.values[band][good]))
        phase_bins.append(ph)
        phase_wts.append(wt * np.sqrt(coh[good]) * np.sqrt(m))
        phase_omegas.append(omega[band][good])
    if not any_coherent:
        raise CalibrationError("no tone band shows coherence above threshold; "
                               "calibration unreliable")

    gain = float(np.sum(np.array(gains) * np.array(gain_wts)) / np.sum(gain_wts))

    # coarse inter-band alignment: band-mean phases, sequential unwrap
    centers = np.array([np.mean(w) for w in phase_omegas])
    means = np.array([np.average(p, weights=wt) for p, wt in zip(phase_bins, phase_wts)])
    order = np.argsort(centers)
    centers, means = centers[order], means[order]
    means = np.unwrap(means)
    if centers.size >= 2:
        tau0 = -np.polyfit(centers, means, 1)[0]
    else:
        tau0 = -means[0] / centers[0]

    # fine fit on all coherent bins with the coarse delay removed
    w_all = np.concatenate([phase_omegas[i] for i in order])
    p_all = np.concatenate([phase_bins[i] for i in order])
    wt_all = np.concatenate([phase_wts[i] for i in order])
    resid0 = np.angle(np.exp(1j * (p_all + w_all * tau0)))
    a = np.column_stack([w_all, np.ones_like(w_all)])
    sol, *_ = np.linalg.lstsq(a * wt_all[:, None], resid0 * wt_all, rcond=None)
    tau = tau0 - sol[0]
    intercept = float(sol[1])
    final_resid = resid0 - a @ sol
    if abs(intercept) > 0.1:
        warnings.warn(f"calibration phase intercept {intercept:.3f} rad is large; "
                      "the path difference may not be a pure delay", stacklevel=2)
    return CalibrationResult(gain_ratio=gain, phase_delay=float(tau),
                             residual=float(np.sqrt(np.average(final_resid ** 2, weights=wt_all))),
                             phase_intercept=intercept)


def apply_detector_calibration(stream: TimeSeries, result: CalibrationResult) -> TimeSeries:
    """Undo the fitted gain and delay on the second detector's record, so
    its coherent component aligns with the first detector."""
    from .synth import apply_gain_delay
    return apply_gain_delay(stream, 1.0 / result.gain_ratio,
                            -result.phase_delay * stream.fs)
