"""Seeded time-domain synthesis of detector photocurrents.

The chain mirrors the measurement: a bath of background mechanical modes
produces cavity frequency noise, the cooling cavity transduces it through a
memoryless polynomial nonlinearity (intermodulation noise), the resulting
intensity noise drives the soft-clamped defect mode together with thermal
and backaction forces, and the probe output quadratures are assembled for
two detection chains with independent vacuum noise.

Synthesis is classical and symmetrized: vacuum is white noise at PSD 1/2
per quadrature and the detector records carry no imprecision-backaction
correlation.  The quantum half-quantum of sideband asymmetry is added
analytically at the spectrum level by the thermometry pipeline; the cavity
density-of-states asymmetry, by contrast, is present in the synthesized
records through the quadrature cross-correlations.

Oscillators are integrated with the exact discretization of the damped
harmonic oscillator (matrix exponential propagator, Van Loan noise
covariance, zero-order hold for external forces), so quality factors of
1e8 pose no stability or dissipation-accuracy problem.  All randomness
derives from one seed through numpy SeedSequence spawning in a fixed
documented order, making every run bit-reproducible.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, solve_discrete_lyapunov
from scipy.signal import csd as _scipy_csd
from scipy.signal import get_window, lfilter, lfiltic
from scipy.signal import welch as _scipy_welch

from .cooling import HeatingBudget, no_heating
from .spectra import TWO_PI, SpectrumGrid
from .system import MechanicalMode, OpticalMode, backaction_damping_and_shift, cavity_susceptibility
from .tin import fast_cavity_coefficients


class DivergentSynthesis(RuntimeError):
    """Total damping is nonpositive; the oscillator has no stationary state."""


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled real record."""

    fs: float
    samples: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))
        if not self.fs > 0:
            raise ValueError("fs must be > 0")
        if self.samples.ndim != 1:
            raise ValueError("samples must be 1-D")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")

    @property
    def n(self):
        return self.samples.size

    @property
    def duration(self):
        return self.n / self.fs


@dataclass(frozen=True)
class NoiseEnsemble:
    """Background mechanical modes generating cavity frequency noise.

    Each mode contributes ``coefficient * Q(t)`` to the cavity frequency
    excursion, with Q the dimensionless displacement of a thermal oscillator
    of variance n_th + 1/2; the per-mode rms frequency shift is therefore
    ``coefficient * sqrt(n_th + 1/2)``.
    """

    modes: tuple
    coefficients: tuple
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if len(self.modes) < 1:
            raise ValueError("ensemble needs at least one mode")
        if len(self.coefficients) != len(self.modes):
            raise ValueError("one transduction coefficient per mode is required")
        if not all(np.isfinite(self.coefficients)):
            raise ValueError("coefficients must be finite")

    @property
    def max_frequency(self):
        return max(m.omega_m for m in self.modes)

    def analytic_psd(self, omega):
        """Two-sided frequency-noise PSD of the ensemble (rad^2/s^2 per rad/s)."""
        omega = np.asarray(omega, dtype=float)
        total = np.zeros_like(omega)
        for mode, c in zip(self.modes, self.coefficients):
            chi2 = np.abs(mode.omega_m / (mode.omega_m ** 2 - omega ** 2
                                          - 1j * omega * mode.gamma)) ** 2
            total += c ** 2 * chi2 * 2.0 * mode.gamma * (mode.n_th + 0.5)
        return total

    def frequency_noise_spectrum(self, n=4097, band_factor=1.2):
        """Sampled analytic PSD as a FrequencyNoiseSpectrum (tails truncated)."""
        from .tin import FrequencyNoiseSpectrum
        band = self.max_frequency * band_factor
        omega = np.linspace(-band, band, int(n))
        return FrequencyNoiseSpectrum(SpectrumGrid(omega, self.analytic_psd(omega)), band)

    def scaled(self, factor) -> "NoiseEnsemble":
        return NoiseEnsemble(self.modes,
                             tuple(c * float(factor) for c in self.coefficients),
                             self.seed)

    def variance(self):
        """<Delta^2> in rad^2/s^2."""
        return sum(c ** 2 * (m.n_th + 0.5) for m, c in zip(self.modes, self.coefficients))


def background_comb(count=100, f_min=0.35e6, f_max=7.0e6,
                    bandgap=(1.10e6, 1.25e6), quality=2.0e3,
                    total_shift_rms=TWO_PI * 2.0e5, temperature_hz=6.25e12,
                    seed=None) -> NoiseEnsemble:
    """Evenly spaced background-mode comb outside the acoustic bandgap.

    The mode count and the gap placement are modeling choices; occupancies
    follow a 1/f thermal law (temperature_hz = k_B T / hbar / 2pi, about
    6.25e12 Hz at room temperature) and each mode carries an equal share of
    the total rms cavity-frequency excursion.
    """
    freqs = np.linspace(f_min, f_max, int(count) + 8)
    freqs = freqs[(freqs < bandgap[0]) | (freqs > bandgap[1])][:int(count)]
    if freqs.size < count:
        raise ValueError("could not place the requested number of modes outside the gap")
    modes, coeffs = [], []
    per_mode_rms = total_shift_rms / np.sqrt(count)
    for f in freqs:
        om = TWO_PI * f
        n_th = temperature_hz / f
        modes.append(MechanicalMode(omega_m=om, gamma=om / quality, n_th=n_th))
        coeffs.append(per_mode_rms / np.sqrt(n_th + 0.5))
    return NoiseEnsemble(tuple(modes), tuple(coeffs), seed)


def flat_band_ensemble(count=70, band_limit_hz=7.0e6, overlap=2.5,
                       total_shift_rms=TWO_PI * 2.0e5, seed=None) -> NoiseEnsemble:
    """Dense overlapping low-Q modes emulating a flat frequency-noise
    spectrum up to the band limit."""
    spacing = band_limit_hz / (count + 1)
    modes, coeffs = [], []
    per_mode_rms = total_shift_rms / np.sqrt(count)
    for i in range(1, count + 1):
        om = TWO_PI * spacing * i
        gamma = TWO_PI * spacing * overlap
        n_th = 1e6
        modes.append(MechanicalMode(omega_m=om, gamma=gamma, n_th=n_th))
        coeffs.append(per_mode_rms / np.sqrt(n_th + 0.5))
    return NoiseEnsemble(tuple(modes), tuple(coeffs), seed)


# ---------------------------------------------------------------------------
# exact-propagator oscillator integration

def _discretize(mode: MechanicalMode, fs, force_psd, gamma_total=None, omega_shift=0.0):
    """Exact one-step discretization of the damped oscillator driven by white
    force of two-sided PSD ``force_psd``: returns (Phi, chol(Sigma), GammaF,
    stationary covariance)."""
    om = mode.omega_m + omega_shift
    gam = mode.gamma if gamma_total is None else gamma_total
    if gam <= 0:
        raise DivergentSynthesis(f"total damping {gam:.3e} rad/s is not positive")
    dt = 1.0 / fs
    a = np.array([[0.0, om], [-om, -gam]])
    qc = np.array([[0.0, 0.0], [0.0, float(force_psd)]])
    # Van Loan: exp([[A, Q], [0, -A^T]] dt) packs Phi and the noise covariance
    m = np.zeros((4, 4))
    m[:2, :2] = a
    m[:2, 2:] = qc
    m[2:, 2:] = -a.T
    em = expm(m * dt)
    phi = em[:2, :2]
    sigma = em[:2, 2:] @ phi.T
    sigma = 0.5 * (sigma + sigma.T)
    if force_psd > 0:
        chol = np.linalg.cholesky(sigma + 1e-300 * np.eye(2))
        stat = solve_discrete_lyapunov(phi, sigma)
    else:
        chol = np.zeros((2, 2))
        stat = np.zeros((2, 2))
    gamma_f = np.linalg.solve(a, (phi - np.eye(2))) @ np.array([0.0, 1.0])
    return phi, chol, gamma_f, stat


def _oscillator_series(mode, fs, n, rng, force_psd, force_series=None,
                       gamma_total=None, omega_shift=0.0, x0=None):
    """Sampled displacement of the damped oscillator.

    The two-step recursion in Q implied by the exact propagator is run
    through a linear filter, which keeps the per-sample cost in compiled
    code; it is algebraically identical to stepping the (Q, P) state.
    """
    phi, chol, gamma_f, stat = _discretize(mode, fs, force_psd, gamma_total, omega_shift)
    if x0 is None:
        x0 = chol_draw(stat, rng)
    u1 = np.zeros(n)
    u2 = np.zeros(n)
    if force_psd > 0:
        z = rng.standard_normal((2, n))
        u1 += chol[0, 0] * z[0]
        u2 += chol[1, 0] * z[0] + chol[1, 1] * z[1]
        del z
    if force_series is not None:
        u1 += gamma_f[0] * force_series
        u2 += gamma_f[1] * force_series
    tr = phi[0, 0] + phi[1, 1]
    det = phi[0, 0] * phi[1, 1] - phi[0, 1] * phi[1, 0]
    q = np.empty(n)
    q[0] = x0[0]
    q[1] = phi[0, 0] * x0[0] + phi[0, 1] * x0[1] + u1[0]
    drive = np.empty(n - 2)
    drive[:] = u1[1:n - 1]
    drive -= phi[1, 1] * u1[0:n - 2]
    drive += phi[0, 1] * u2[0:n - 2]
    b, a = [1.0], [1.0, -tr, det]
    zi = lfiltic(b, a, y=[q[1], q[0]])
    q[2:], _ = lfilter(b, a, drive, zi=zi)
    return q


def chol_draw(cov, rng):
    w, v = np.linalg.eigh(cov)
    w = np.clip(w, 0.0, None)
    return v @ (np.sqrt(w) * rng.standard_normal(2))


def synth_frequency_noise(ensemble: NoiseEnsemble, fs, n_samples, seed) -> TimeSeries:
    """Cavity frequency excursion from independently Langevin-driven
    background modes; deterministic for a given seed."""
    if fs <= 2.0 * ensemble.max_frequency / TWO_PI:
        raise ValueError(
            f"fs = {fs:.3g} Hz aliases the highest ensemble mode at "
            f"{ensemble.max_frequency / TWO_PI:.3g} Hz")
    n = int(n_samples)
    streams = np.random.SeedSequence(seed).spawn(len(ensemble.modes))
    delta = np.zeros(n)
    for mode, coeff, ss in zip(ensemble.modes, ensemble.coefficients, streams):
        if coeff == 0.0:
            continue
        rng = np.random.Generator(np.random.PCG64(ss))
        q = _oscillator_series(mode, fs, n, rng,
                               force_psd=2.0 * mode.gamma * (mode.n_th + 0.5))
        delta += coeff * q
    return TimeSeries(fs=fs, samples=delta)


def transduce_fast_cavity(delta: TimeSeries, mode: OpticalMode, order=2,
                          band_limit=None) -> TimeSeries:
    """Memoryless polynomial cavity transduction of the frequency excursion.

    Returns the relative intracavity intensity fluctuation up to the given
    order; nonlinear terms are AC-coupled (sample means removed).  The
    quadratic coefficient vanishes at the magic detuning.
    """
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    if band_limit is not None:
        ratio = mode.kappa / band_limit
        if ratio < 6.0:
            warnings.warn(f"fast-cavity ratio kappa/band = {ratio:.2f} is marginal",
                          stacklevel=2)
    c1, c2, c3 = fast_cavity_coefficients(mode)
    d = delta.samples
    out = c1 * d
    if order >= 2:
        d2 = d * d
        out = out + c2 * (d2 - d2.mean())
    if order >= 3:
        d3 = d * d * d
        out = out + c3 * (d3 - d3.mean())
    return TimeSeries(fs=delta.fs, samples=out, t0=delta.t0)


def nonlinear_intensity(delta: TimeSeries, mode: OpticalMode, order=3) -> TimeSeries:
    """Nonlinear (intermodulation) part of the transduction only."""
    full = transduce_fast_cavity(delta, mode, order)
    lin = transduce_fast_cavity(delta, mode, 1)
    return TimeSeries(fs=delta.fs, samples=full.samples - lin.samples, t0=delta.t0)


def apply_frequency_response(series: TimeSeries, response) -> TimeSeries:
    """Filter a real record with a frequency response H(omega) satisfying
    H(-w) = conj(H(w)); circular convolution via the real FFT."""
    n = series.n
    freqs = TWO_PI * np.fft.rfftfreq(n, d=1.0 / series.fs)
    spec = np.fft.rfft(series.samples)
    spec *= response(freqs)
    return TimeSeries(fs=series.fs, samples=np.fft.irfft(spec, n=n), t0=series.t0)


def linear_cavity_intensity(delta: TimeSeries, mode: OpticalMode) -> TimeSeries:
    """Linear transduction with the full (dynamic) cavity response applied:
    relative intensity response i [chi(w) - conj(chi(-w))] per rad/s."""
    def h(omega):
        return 1j * (cavity_susceptibility(omega, mode)
                     - np.conj(cavity_susceptibility(-omega, mode)))
    return apply_frequency_response(delta, h)


def integrate_defect_mode(mode: MechanicalMode, fs, n_samples, seed_or_rng, *,
                          n_th_effective=None, gamma_extra=0.0, omega_shift=0.0,
                          extra_white_force_psd=0.0,
                          force_series: TimeSeries | None = None) -> TimeSeries:
    """Dimensionless displacement of the defect mode under thermal noise, an
    additional white force (e.g. quantum backaction emulation), and an
    optional supplied force record (e.g. intermodulation radiation pressure,
    applied with zero-order hold).

    gamma_extra adds the optomechanical damping to the intrinsic one;
    omega_shift moves the resonance (optical spring, absorption).  A
    nonpositive total damping raises DivergentSynthesis.
    """
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) \
        else np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed_or_rng)))
    n_th = mode.n_th if n_th_effective is None else float(n_th_effective)
    psd = 2.0 * mode.gamma * (n_th + 0.5) + float(extra_white_force_psd)
    fseries = None
    if force_series is not None:
        if force_series.fs != fs or force_series.n != int(n_samples):
            raise ValueError("force series must share fs and length")
        fseries = force_series.samples
    if fs < 20.0 * (mode.omega_m + omega_shift) / TWO_PI:
        warnings.warn("fewer than 20 samples per mechanical period", stacklevel=2)
    q = _oscillator_series(mode, fs, int(n_samples), rng, psd,
                           force_series=fseries,
                           gamma_total=mode.gamma + gamma_extra,
                           omega_shift=omega_shift)
    return TimeSeries(fs=fs, samples=q)


# ---------------------------------------------------------------------------
# Welch estimators (two-sided, quanta normalization)

def welch_psd(series: TimeSeries, segment_length, overlap_fraction=0.5,
              window="hann", detrend=False) -> SpectrumGrid:
    """Two-sided Welch PSD on an ascending angular-frequency grid.

    Normalized as a density over ordinary frequency, which under the
    package's d(omega)/2pi integration convention makes a white record of
    variance sigma^2 integrate back to sigma^2.
    """
    nperseg = int(segment_length)
    _check_segments(series.n, nperseg, overlap_fraction)
    f, p = _scipy_welch(series.samples, fs=series.fs, window=window,
                        nperseg=nperseg, noverlap=int(nperseg * overlap_fraction),
                        detrend=detrend, return_onesided=False, scaling="density")
    return SpectrumGrid(TWO_PI * np.fft.fftshift(f), np.fft.fftshift(p))


def welch_csd(series1: TimeSeries, series2: TimeSeries, segment_length,
              overlap_fraction=0.5, window="hann", detrend=False) -> SpectrumGrid:
    """Two-sided cross spectral density of two synchronized records.

    Sign convention: a record pair x2(t) = x1(t - tau) yields
    arg S12(omega) = -omega tau, and for records driven by a common source
    through responses H1, H2 the cross spectrum is H1 conj(H2) S_source,
    matching the forward model in the detection module.
    """
    if series1.fs != series2.fs or series1.n != series2.n:
        raise ValueError("records must share sampling rate and length")
    nperseg = int(segment_length)
    _check_segments(series1.n, nperseg, overlap_fraction)
    f, p = _scipy_csd(series1.samples, series2.samples, fs=series1.fs, window=window,
                      nperseg=nperseg, noverlap=int(nperseg * overlap_fraction),
                      detrend=detrend, return_onesided=False, scaling="density")
    return SpectrumGrid(TWO_PI * np.fft.fftshift(f), np.conj(np.fft.fftshift(p)))


def _check_segments(n, nperseg, overlap_fraction):
    if nperseg > n:
        raise ValueError("segment_length exceeds the record length")
    if not 0.0 <= overlap_fraction < 1.0:
        raise ValueError("overlap_fraction must lie in [0, 1)")
    m = welch_segment_count(n, nperseg, overlap_fraction)
    if m < 8:
        warnings.warn(f"only {m} Welch segments; variance will be large", stacklevel=3)


def welch_segment_count(n, nperseg, overlap_fraction=0.5):
    step = int(nperseg) - int(nperseg * overlap_fraction)
    return 1 + (int(n) - int(nperseg)) // step


def welch_relative_std(n, nperseg, overlap_fraction=0.5, window="hann"):
    """Relative standard deviation of a Welch bin estimate, accounting for
    the correlation between overlapping segments."""
    nperseg = int(nperseg)
    m = welch_segment_count(n, nperseg, overlap_fraction)
    w = get_window(window, nperseg)
    step = nperseg - int(nperseg * overlap_fraction)
    var = 1.0
    k = 1
    while k * step < nperseg:
        rho = np.sum(w[k * step:] * w[:nperseg - k * step]) / np.sum(w * w)
        var += 2.0 * (1.0 - k / m) * rho ** 2
        k += 1
    return float(np.sqrt(var / m))


# ---------------------------------------------------------------------------
# end-to-end photocurrent synthesis

def probe_quadrature_response(theta, probe: OpticalMode):
    """Frequency response from the defect displacement to the measured
    quadrature of the probe output (real-filter symmetric)."""
    def h(omega):
        t_pos = 1j * np.sqrt(2.0) * probe.g * np.sqrt(probe.kappa_1) * cavity_susceptibility(omega, probe)
        t_neg = -1j * np.sqrt(2.0) * probe.g * np.sqrt(probe.kappa_1) * np.conj(cavity_susceptibility(-omega, probe))
        return (np.exp(-1j * theta) * t_pos + np.exp(1j * theta) * t_neg) / np.sqrt(2.0)
    return h


def frequency_noise_quadrature_response(theta, probe: OpticalMode, probe_photons):
    """Response from the cavity frequency excursion (background modes) to the
    measured quadrature of the probe output."""
    amp = np.sqrt(probe.kappa_1 * float(probe_photons))

    def h(omega):
        c_pos = -1j * amp * cavity_susceptibility(omega, probe)
        c_neg = 1j * amp * np.conj(cavity_susceptibility(-omega, probe))
        return (np.exp(-1j * theta) * c_pos + np.exp(1j * theta) * c_neg) / np.sqrt(2.0)
    return h


def _vacuum_series(rng, n, fs):
    # white quadrature record at PSD 1/2: variance = fs/2
    return rng.standard_normal(n) * np.sqrt(fs / 2.0)


def apply_gain_delay(series: TimeSeries, gain, delay_samples) -> TimeSeries:
    """Scale a record and delay it by a (possibly fractional) number of
    samples via an exact circular linear-phase filter."""
    if gain == 1.0 and delay_samples == 0.0:
        return series
    tau = delay_samples / series.fs

    def h(omega):
        return gain * np.exp(-1j * omega * tau)
    return apply_frequency_response(series, h)


def synth_photocurrents(mech: MechanicalMode, cooling: OpticalMode,
                        probe: OpticalMode, ensemble: NoiseEnsemble,
                        chains, fs, n_samples, seed, *,
                        cooling_photons, probe_photons,
                        heating: HeatingBudget | None = None,
                        transduction_order=3,
                        gain_ratio=1.0, delay_samples=0.0,
                        include_tin_force=True):
    """Synthesize the two dual-homodyne photocurrent records.

    Substream order from the master seed: background ensemble, defect mode
    (initial state + thermal/backaction force), splitter vacuum X, splitter
    vacuum Y, detector-1 efficiency vacuum, detector-2 efficiency vacuum.

    Returns (stream1, stream2, info) where info carries the series and
    derived quantities useful for validation (frequency noise record,
    intermodulation force, analytic oscillator parameters).
    """
    if heating is None:
        heating = no_heating(mech)
    n = int(n_samples)
    root = np.random.SeedSequence(seed)
    ss = root.spawn(6)
    ch1, ch2 = chains

    delta = synth_frequency_noise(ensemble, fs, n, ss[0])

    gamma_opt, domega = backaction_damping_and_shift(mech.omega_m, mech, cooling, probe)
    rep_white = _backaction_force_psd(mech, cooling, probe)

    force = None
    x_tin = None
    if include_tin_force and cooling.g > 0:
        xi = nonlinear_intensity(delta, cooling, transduction_order)
        x_tin = TimeSeries(fs=fs, samples=np.sqrt(cooling_photons / 2.0) * xi.samples)
        force = TimeSeries(fs=fs, samples=-2.0 * cooling.g * x_tin.samples)

    rng_defect = np.random.Generator(np.random.PCG64(ss[1]))
    q = integrate_defect_mode(
        mech, fs, n, rng_defect,
        n_th_effective=heating.n_th_effective,
        gamma_extra=gamma_opt,
        omega_shift=domega + heating.absorption_freq_shift,
        extra_white_force_psd=rep_white,
        force_series=force)

    rng_vx = np.random.Generator(np.random.PCG64(ss[2]))
    rng_vy = np.random.Generator(np.random.PCG64(ss[3]))
    v_x = _vacuum_series(rng_vx, n, fs)
    v_y = _vacuum_series(rng_vy, n, fs)

    streams = []
    for idx, (chain, sign, ss_u) in enumerate(((ch1, +1.0, ss[4]), (ch2, -1.0, ss[5]))):
        sig = apply_frequency_response(q, probe_quadrature_response(chain.theta, probe))
        tone = apply_frequency_response(
            delta, frequency_noise_quadrature_response(chain.theta, probe, probe_photons))
        rng_u = np.random.Generator(np.random.PCG64(ss_u))
        samples = (np.sqrt(chain.eta / 2.0) * (sig.samples + tone.samples)
                   + sign * np.sqrt(chain.eta / 2.0)
                   * (np.cos(chain.theta) * v_x + np.sin(chain.theta) * v_y)
                   + np.sqrt(1.0 - chain.eta) * _vacuum_series(rng_u, n, fs))
        if not chain.tin_cancelled:
            xi_p = nonlinear_intensity(delta, probe, transduction_order)
            samples = samples + (np.sqrt(chain.eta / 2.0) * np.cos(chain.theta)
                                 * (-np.sqrt(probe.kappa_1))
                                 * np.sqrt(probe_photons / 2.0) * xi_p.samples)
        streams.append(TimeSeries(fs=fs, samples=samples))

    stream2 = apply_gain_delay(streams[1], gain_ratio, delay_samples)
    info = {
        "delta": delta,
        "tin_quadrature": x_tin,
        "displacement": q,
        "gamma_total": mech.gamma + gamma_opt,
        "omega_shifted": mech.omega_m + domega + heating.absorption_freq_shift,
        "backaction_white_psd": rep_white,
    }
    return streams[0], stream2, info


def _backaction_force_psd(mech, cooling, probe=None):
    """White-force emulation of the quantum backaction of the driven beams:
    the symmetrized radiation-pressure force PSD at the mechanical frequency,
    A+ + A- per beam."""
    total = 0.0
    for mode in (cooling, probe):
        if mode is None or mode.g == 0.0:
            continue
        total += mode.g ** 2 * mode.kappa * (
            np.abs(cavity_susceptibility(mech.omega_m, mode)) ** 2
            + np.abs(cavity_susceptibility(-mech.omega_m, mode)) ** 2)
    return total


def synth_expected_spectra(omega, mech: MechanicalMode, cooling: OpticalMode,
                           probe: OpticalMode, ensemble: NoiseEnsemble,
                           chains, fs, *, cooling_photons, probe_photons,
                           heating: HeatingBudget | None = None,
                           transduction_order=3, include_tin_force=True):
    """Analytic PSDs and cross spectrum of the synthesized photocurrents
    (unity injected gain/delay), for validating Welch estimates.

    The displacement spectrum uses the fixed-coefficient oscillator actually
    integrated (total damping and shifted frequency evaluated at the bare
    resonance) and the Wick-expanded intermodulation force spectrum of the
    polynomial transduction, including the zero-order-hold shaping of the
    supplied force.
    """
    from .tin import fast_transduction_psd
    if heating is None:
        heating = no_heating(mech)
    omega = np.asarray(omega, dtype=float)
    gamma_opt, domega = backaction_damping_and_shift(mech.omega_m, mech, cooling, probe)
    gamma_tot = mech.gamma + gamma_opt
    om0 = mech.omega_m + domega + heating.absorption_freq_shift
    chi2 = np.abs(om0 / (om0 ** 2 - omega ** 2 - 1j * omega * gamma_tot)) ** 2

    s_force = 2.0 * mech.gamma * (heating.n_th_effective + 0.5) \
        + _backaction_force_psd(mech, cooling, probe)
    s_qq = chi2 * s_force
    if include_tin_force and cooling.g > 0:
        noise = ensemble.frequency_noise_spectrum()
        s_xi = fast_transduction_psd(noise, cooling, order=transduction_order,
                                     include_linear=False)
        s_x_tin = (cooling_photons / 2.0) * np.interp(omega, s_xi.omega, s_xi.values,
                                                      left=0.0, right=0.0)
        dt = 1.0 / fs
        zoh = np.sinc(omega * dt / (2.0 * np.pi)) ** 2
        s_qq = s_qq + chi2 * (2.0 * cooling.g) ** 2 * s_x_tin * zoh

    s_dd = ensemble.analytic_psd(omega)
    ch1, ch2 = chains
    h1 = probe_quadrature_response(ch1.theta, probe)(omega)
    h2 = probe_quadrature_response(ch2.theta, probe)(omega)
    t1 = frequency_noise_quadrature_response(ch1.theta, probe, probe_photons)(omega)
    t2 = frequency_noise_quadrature_response(ch2.theta, probe, probe_photons)(omega)

    e1, e2 = ch1.eta / 2.0, ch2.eta / 2.0
    s11 = e1 * (np.abs(h1) ** 2 * s_qq + np.abs(t1) ** 2 * s_dd) + (1.0 - e1) * 0.5
    s22 = e2 * (np.abs(h2) ** 2 * s_qq + np.abs(t2) ** 2 * s_dd) + (1.0 - e2) * 0.5
    s12 = (np.sqrt(e1 * e2) * (h1 * np.conj(h2) * s_qq + t1 * np.conj(t2) * s_dd)
           - np.sqrt(e1 * e2) * np.cos(ch1.theta - ch2.theta) * 0.5)
    return (SpectrumGrid(omega, s11), SpectrumGrid(omega, s22), SpectrumGrid(omega, s12))
