"""Sideband cooling and sideband-asymmetry thermometry of a membrane in an
optical cavity, with thermal intermodulation noise.

The package provides the analytic model (susceptibilities, backaction,
displacement and output-field spectra, intermodulation spectra), a seeded
time-domain synthesizer of dual-homodyne photocurrents, and the
reconstruction / fitting pipeline that recovers the phonon occupancy from
motional sideband asymmetry.
"""

__version__ = "0.1.0"

from .cooling import (BackactionReport, HeatingBudget, absorption_model,
                      backaction, coupling_for_damping, displacement_psd,
                      effective_occupancy, integrated_occupancy, no_heating,
                      quantum_cooperativity, tin_force_psd_from_shot_ratio)
from .detection import (DetectionChain, IllConditionedReconstruction,
                        OccupancyEstimate, SidebandPair, asymmetry_factor,
                        cooling_output_psd, dual_homodyne_forward,
                        dual_homodyne_reconstruct, homodyne_psd,
                        occupancy_from_asymmetry, probe_output_psd,
                        sideband_ratio)
from .fitting import (AsymmetryCalibration, CalibrationError, CalibrationResult,
                      LorentzianFit, apply_detector_calibration,
                      calibrate_cavity_asymmetry, detector_cross_calibration,
                      fit_lorentzian, lorentzian)
from .spectra import ComplexResponse, SpectrumGrid, symmetric_grid
from .system import (MechanicalMode, OpticalMode, backaction_damping_and_shift,
                     backaction_self_energy, cavity_susceptibility,
                     cavity_susceptibility_conj_neg, magic_detuning,
                     mechanical_susceptibility,
                     modified_mechanical_susceptibility)
from .synth import (DivergentSynthesis, NoiseEnsemble, TimeSeries,
                    background_comb, flat_band_ensemble, integrate_defect_mode,
                    linear_cavity_intensity, synth_frequency_noise,
                    synth_photocurrents, transduce_fast_cavity, welch_csd,
                    welch_psd, welch_relative_std, welch_segment_count)
from .tin import (FrequencyNoiseSpectrum, TinSpectrumResult,
                  calibrate_noise_amplitude, fast_cavity_coefficients,
                  fast_transduction_psd, kernel_G, tin_detuning_sweep,
                  tin_second_order_psd, tin_spectrum, tin_third_order_coeff)
from .config import (ConfigError, ExperimentConfig, config_hash, load_config,
                     paper_default_config, save_config)
